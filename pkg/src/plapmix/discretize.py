"""Uniform grid over Omega_J and the discrete mixed energy.

Fields are plain ``ndarray`` objects of shape ``grid.shape`` that vanish at
every node outside the open domain.  The energy

    H(u) = alpha * sum_cells |grad_h u|^p h^N
         + beta  * sum_x sum_k w_k |u(x) - u(x + d_k)|^p h^N

is assembled once as sparse difference operators acting on the interior
unknowns, so energies, gradients and Hessians are all matrix products.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .geometry import Domain, inradius
from .kernel import ResolutionError, WeightTable


class Grid:
    """Uniform lattice anchored at a chosen centre node, covering Omega_J.

    The lattice extends ``r_j + h`` past the bounding box of the domain so
    every pair with one endpoint in Omega is represented.
    """

    def __init__(self, domain: Domain, h: float, r_j: float, center=None):
        r_omega, x0 = inradius(domain)
        tol = 1 + 1e-12
        if h > r_j / 4 * tol:
            raise ResolutionError(f"h={h} exceeds r_j/4={r_j / 4}")
        if h > r_omega / 16 * tol:
            raise ResolutionError(f"h={h} exceeds r_omega/16={r_omega / 16}")
        self.domain = domain
        self.dim = domain.dim
        self.h = float(h)
        self.r_j = float(r_j)
        self.r_omega = float(r_omega)
        self.center = np.asarray(x0 if center is None else center, dtype=float).reshape(self.dim)

        lo, hi = domain.bounding_box()
        margin = r_j + h
        kmin = np.floor((lo - margin - self.center) / h + 1e-9).astype(int)
        kmax = np.ceil((hi + margin - self.center) / h - 1e-9).astype(int)
        self.shape = tuple(int(v) for v in (kmax - kmin + 1))
        self.center_index = tuple(int(v) for v in -kmin)
        self.axes = [self.center[i] + h * np.arange(kmin[i], kmax[i] + 1) for i in range(self.dim)]
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.coords = np.column_stack([m.ravel() for m in mesh])

        self.signed_distance = domain.signed_distance(self.coords).reshape(self.shape)
        self.interior = self.signed_distance > 1e-9 * h
        near = domain.distance_to(self.coords).reshape(self.shape) <= r_j * tol
        self.band = near & ~self.interior
        self.exterior = ~(self.interior | self.band)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def field(self, func) -> np.ndarray:
        """Sample ``func(coords)`` at the nodes and zero it outside the domain."""
        vals = np.asarray(func(self.coords if self.dim > 1 else self.coords[:, 0]), dtype=float)
        return np.where(self.interior, vals.reshape(self.shape), 0.0)

    def restrict(self, u) -> np.ndarray:
        return np.where(self.interior, np.asarray(u, dtype=float).reshape(self.shape), 0.0)

    def distance_from_center(self) -> np.ndarray:
        return np.linalg.norm(self.coords - self.center, axis=1).reshape(self.shape)

    def node_coords(self, index) -> np.ndarray:
        return np.array([self.axes[i][index[i]] for i in range(self.dim)])

    def shifted(self, u: np.ndarray, offset) -> np.ndarray:
        """Return ``v`` with ``v[x] = u[x + offset]`` and zero beyond the lattice."""
        out = np.zeros_like(u)
        src, dst = [], []
        for k, n in zip(offset, self.shape):
            k = int(k)
            if abs(k) >= n:
                return out
            src.append(slice(max(k, 0), n + min(k, 0)))
            dst.append(slice(max(-k, 0), n + min(-k, 0)))
        out[tuple(dst)] = u[tuple(src)]
        return out

    def write_csv(self, u: np.ndarray, path, interior_only: bool = True, name: str = "value") -> Path:
        path = Path(path)
        cols = ["x", "y"][: self.dim]
        mask = self.interior.ravel() if interior_only else np.ones(self.size, bool)
        vals = np.asarray(u).ravel()
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols + [name])
            for c, v in zip(self.coords[mask], vals[mask]):
                writer.writerow([repr(float(ci)) for ci in c] + [repr(float(v))])
        return path


def log_power_sum(values: np.ndarray, p: float, coeff=None) -> float:
    """``log(sum coeff * |values|**p)`` with the largest magnitude factored out."""
    a = np.abs(values)
    if a.size == 0:
        return -math.inf
    m = float(a.max())
    if m == 0.0:
        return -math.inf
    terms = (a / m) ** p
    s = float(np.sum(terms if coeff is None else coeff * terms))
    if s == 0.0:
        return -math.inf
    return p * math.log(m) + math.log(s)


@dataclass(frozen=True)
class EnergyParts:
    """Local and nonlocal energies held as logarithms; ``-inf`` encodes zero."""

    log_local: float
    log_nonlocal: float

    @property
    def local(self) -> float:
        return math.exp(self.log_local)

    @property
    def nonlocal_(self) -> float:
        return math.exp(self.log_nonlocal)

    @property
    def local_is_zero(self) -> bool:
        return self.log_local == -math.inf

    @property
    def nonlocal_is_zero(self) -> bool:
        return self.log_nonlocal == -math.inf

    def log_total(self, alpha: float, beta: float) -> float:
        parts = []
        if alpha > 0 and not self.local_is_zero:
            parts.append(math.log(alpha) + self.log_local)
        if beta > 0 and not self.nonlocal_is_zero:
            parts.append(math.log(beta) + self.log_nonlocal)
        if not parts:
            return -math.inf
        return float(np.logaddexp.reduce(parts))


def _check_weights(alpha: float, beta: float):
    if alpha < 0 or beta < 0 or alpha + beta <= 0:
        raise ValueError(f"need alpha, beta >= 0 with alpha + beta > 0, got ({alpha}, {beta})")


class EnergyModel:
    """Assembled discrete energy on a grid for a given kernel weight table."""

    def __init__(self, grid: Grid, weights: WeightTable):
        if not math.isclose(weights.h, grid.h, rel_tol=1e-12):
            raise ValueError("weight table and grid use different spacings")
        self.grid = grid
        self.weights = weights
        self.cell_volume = grid.h**grid.dim

        flat_interior = grid.interior.ravel()
        self.interior_nodes = np.flatnonzero(flat_interior)
        self.index = np.full(grid.size, -1, dtype=np.int64)
        self.index[self.interior_nodes] = np.arange(self.interior_nodes.size)
        self.n = self.interior_nodes.size

        multi = np.array(np.unravel_index(np.arange(grid.size), grid.shape)).T
        self._diff_ops = self._assemble_local(multi)
        self._pair_op, self._pair_coeff = self._assemble_pairs(multi)

    # -- assembly ---------------------------------------------------------

    def _target(self, multi: np.ndarray, offset) -> tuple[np.ndarray, np.ndarray]:
        tgt = multi + np.asarray(offset)
        ok = np.all((tgt >= 0) & (tgt < np.asarray(self.grid.shape)), axis=1)
        flat = np.full(len(multi), -1, dtype=np.int64)
        flat[ok] = np.ravel_multi_index(tuple(tgt[ok].T), self.grid.shape)
        return flat, ok

    def _difference_rows(self, base: np.ndarray, tgt: np.ndarray, scale: float):
        """Rows ``scale * (u[tgt] - u[base])`` on the interior unknowns."""
        rows, cols, vals = [], [], []
        ib = self.index[base]
        it = np.where(tgt >= 0, self.index[np.maximum(tgt, 0)], -1)
        r = np.arange(len(base))
        m = it >= 0
        rows.append(r[m]), cols.append(it[m]), vals.append(np.full(m.sum(), scale))
        m = ib >= 0
        rows.append(r[m]), cols.append(ib[m]), vals.append(np.full(m.sum(), -scale))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(len(base), self.n),
        )

    def _assemble_local(self, multi):
        grid = self.grid
        targets = []
        ok_all = np.ones(grid.size, bool)
        for j in range(grid.dim):
            e = np.zeros(grid.dim, int)
            e[j] = 1
            flat, ok = self._target(multi, e)
            targets.append(flat)
            ok_all &= ok
        base = np.flatnonzero(ok_all)
        touches = self.index[base] >= 0
        for t in targets:
            touches |= self.index[t[base]] >= 0
        base = base[touches]
        return [self._difference_rows(base, t[base], 1.0 / grid.h) for t in targets]

    def _assemble_pairs(self, multi):
        blocks, coeffs = [], []
        for k, w in zip(self.weights.offsets, self.weights.weights):
            if not np.any(k) or w == 0.0:
                continue
            tgt, ok = self._target(multi, k)
            base = np.arange(self.grid.size)
            live = (self.index >= 0) | (ok & (self.index[np.maximum(tgt, 0)] >= 0))
            base, tgt = base[live], tgt[live]
            # rows hold u(x) - u(x + d_k)
            blocks.append(self._difference_rows(base, tgt, -1.0))
            coeffs.append(np.full(len(base), w * self.cell_volume))
        if not blocks:
            return sp.csr_matrix((0, self.n)), np.zeros(0)
        return sp.vstack(blocks).tocsr(), np.concatenate(coeffs)

    # -- field <-> unknowns -----------------------------------------------

    def unknowns(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.grid.shape:
            u = u.reshape(self.grid.shape)
        flat = u.ravel()
        outside = np.delete(flat, self.interior_nodes)
        if np.any(outside != 0):
            raise ValueError("field must vanish at every node outside the domain")
        return flat[self.interior_nodes].copy()

    def embed(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.size)
        out[self.interior_nodes] = v
        return out.reshape(self.grid.shape)

    # -- vector-level kernels (used by the solver) ------------------------

    def _cell_gradients(self, v: np.ndarray) -> np.ndarray:
        return np.stack([D @ v for D in self._diff_ops])

    def _log_local(self, v, p) -> float:
        g = self._cell_gradients(v)
        mag = g[0] if g.shape[0] == 1 else np.sqrt(np.sum(g * g, axis=0))
        return log_power_sum(mag, p) + math.log(self.cell_volume) if np.any(mag) else -math.inf

    def _log_nonlocal(self, v, p) -> float:
        if self._pair_coeff.size == 0:
            return -math.inf
        return log_power_sum(self._pair_op @ v, p, self._pair_coeff)

    def _log_norm(self, v, p) -> float:
        return log_power_sum(v, p) + math.log(self.cell_volume) if np.any(v) else -math.inf

    def parts_vec(self, v, p) -> EnergyParts:
        return EnergyParts(self._log_local(v, p), self._log_nonlocal(v, p))

    def log_rayleigh_vec(self, v, p, alpha, beta) -> float:
        log_norm = self._log_norm(v, p)
        if log_norm == -math.inf:
            raise ValueError("Rayleigh quotient undefined for the zero field")
        return self.parts_vec(v, p).log_total(alpha, beta) - log_norm

    def energy_vec(self, v, p, alpha, beta) -> float:
        """Plain-arithmetic energy; callers keep ``v`` scaled near unity."""
        g = self._cell_gradients(v)
        mag = np.abs(g[0]) if g.shape[0] == 1 else np.sqrt(np.sum(g * g, axis=0))
        local = np.sum(mag**p) * self.cell_volume
        nonlocal_ = np.sum(self._pair_coeff * np.abs(self._pair_op @ v) ** p)
        return float(alpha * local + beta * nonlocal_)

    def gradient_vec(self, v, p, alpha, beta) -> np.ndarray:
        out = np.zeros(self.n)
        if alpha:
            g = self._cell_gradients(v)
            if g.shape[0] == 1:
                flux = [np.abs(g[0]) ** (p - 2) * g[0]]
            else:
                mag = np.sqrt(np.sum(g * g, axis=0))
                flux = [mag ** (p - 2) * gj for gj in g]
            for D, f in zip(self._diff_ops, flux):
                out += alpha * p * self.cell_volume * (D.T @ f)
        if beta and self._pair_coeff.size:
            d = self._pair_op @ v
            out += beta * p * (self._pair_op.T @ (self._pair_coeff * np.abs(d) ** (p - 2) * d))
        return out

    def hessian_vec(self, v, p, alpha, beta) -> sp.csr_matrix:
        H = sp.csr_matrix((self.n, self.n))
        if alpha:
            g = self._cell_gradients(v)
            c = alpha * p * self.cell_volume
            if g.shape[0] == 1:
                D = self._diff_ops[0]
                H = H + D.T @ sp.diags(c * (p - 1) * np.abs(g[0]) ** (p - 2)) @ D
            else:
                mag = np.sqrt(np.sum(g * g, axis=0))
                base = mag ** (p - 2)
                with np.errstate(invalid="ignore", divide="ignore"):
                    unit = np.where(mag > 0, g / np.where(mag > 0, mag, 1.0), 0.0)
                for j, Dj in enumerate(self._diff_ops):
                    for l, Dl in enumerate(self._diff_ops):
                        diag = (p - 2) * base * unit[j] * unit[l]
                        if j == l:
                            diag = diag + base
                        H = H + Dj.T @ sp.diags(c * diag) @ Dl
        if beta and self._pair_coeff.size:
            d = self._pair_op @ v
            diag = beta * p * (p - 1) * self._pair_coeff * np.abs(d) ** (p - 2)
            H = H + self._pair_op.T @ sp.diags(diag) @ self._pair_op
        return H.tocsr()

    def quadratic_form(self, alpha: float = 1.0, beta: float = 1.0) -> sp.csr_matrix:
        """Symmetric matrix A with H(u) = u^T A u at p = 2 (interior unknowns)."""
        return (0.5 * self.hessian_vec(np.zeros(self.n), 2.0, alpha, beta)).tocsr()

    # -- field-level operations --------------------------------------------

    def energy_parts(self, u, p: float) -> EnergyParts:
        _check_p(p)
        return self.parts_vec(self.unknowns(u), p)

    def local_energy(self, u, p: float) -> float:
        return self.energy_parts(u, p).local

    def nonlocal_energy(self, u, p: float) -> float:
        return self.energy_parts(u, p).nonlocal_

    def norm_pp(self, u, p: float) -> float:
        """Discrete ``||u||_p^p`` over the interior nodes."""
        return math.exp(self._log_norm(self.unknowns(u), p))

    def log_rayleigh(self, u, p: float, alpha: float = 1.0, beta: float = 1.0) -> float:
        _check_p(p)
        _check_weights(alpha, beta)
        return self.log_rayleigh_vec(self.unknowns(u), p, alpha, beta)

    def rayleigh(self, u, p: float, alpha: float = 1.0, beta: float = 1.0) -> float:
        return math.exp(self.log_rayleigh(u, p, alpha, beta))

    def energy_gradient(self, u, p: float, alpha: float = 1.0, beta: float = 1.0) -> np.ndarray:
        """Nodal derivative of ``alpha*local + beta*nonlocal``; zero off the interior."""
        _check_p(p)
        return self.embed(self.gradient_vec(self.unknowns(u), p, alpha, beta))


def _check_p(p: float):
    if not p >= 2:
        raise ValueError(f"exponent p must be >= 2, got {p}")
