"""Discrete residual of the limit equation max{M1(u), M2(u)} = 0.

Derivatives here use centred second-order stencils, independent of the
forward differences in the energy.  Nonlocal sup/inf run over every lattice
node within R_J of x, including x itself and the zero-valued band nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretize import Grid
from .kernel import support_offsets


def nonlocal_sup_inf(field: np.ndarray, grid: Grid, r_j: float) -> tuple[np.ndarray, np.ndarray]:
    """(L+ u, L- u): max and min of u(y) - u(x) over |x - y| <= r_j, at every node."""
    u = np.asarray(field, dtype=float).reshape(grid.shape)
    sup = np.zeros_like(u)
    inf = np.zeros_like(u)
    for k in support_offsets(r_j, grid.h, grid.dim):
        disp = grid.shifted(u, k) - u
        np.maximum(sup, disp, out=sup)
        np.minimum(inf, disp, out=inf)
    return sup, inf


def centered_gradient(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Centred first differences, shape ``(dim, *grid.shape)``; NaN on the lattice edge."""
    u = np.asarray(field, dtype=float).reshape(grid.shape)
    out = np.full((grid.dim,) + grid.shape, np.nan)
    for j in range(grid.dim):
        fwd = [slice(1, -1)] * grid.dim
        lo = [slice(1, -1)] * grid.dim
        hi = [slice(1, -1)] * grid.dim
        lo[j], hi[j] = slice(0, -2), slice(2, None)
        out[(j, *fwd)] = (u[tuple(hi)] - u[tuple(lo)]) / (2 * grid.h)
    return out


def hessian(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Centred second differences, shape ``(dim, dim, *grid.shape)``."""
    u = np.asarray(field, dtype=float).reshape(grid.shape)
    h = grid.h
    out = np.full((grid.dim, grid.dim) + grid.shape, np.nan)
    core = tuple([slice(1, -1)] * grid.dim)

    def sl(shift):
        return tuple(slice(1 + s, u.shape[i] - 1 + s if s < 1 else None) for i, s in enumerate(shift))

    zero = [0] * grid.dim
    for j in range(grid.dim):
        e = list(zero)
        e[j] = 1
        m = [-v for v in e]
        out[(j, j, *core)] = (u[sl(e)] - 2 * u[core] + u[sl(m)]) / h**2
        for l in range(j + 1, grid.dim):
            pp, pm, mp, mm = list(zero), list(zero), list(zero), list(zero)
            pp[j], pp[l] = 1, 1
            pm[j], pm[l] = 1, -1
            mp[j], mp[l] = -1, 1
            mm[j], mm[l] = -1, -1
            mixed = (u[sl(pp)] - u[sl(pm)] - u[sl(mp)] + u[sl(mm)]) / (4 * h**2)
            out[(j, l, *core)] = mixed
            out[(l, j, *core)] = mixed
    return out


def infinity_laplacian(field: np.ndarray, grid: Grid) -> np.ndarray:
    """<D^2u grad u, grad u> with centred stencils; NaN where the stencil is incomplete."""
    g = centered_gradient(field, grid)
    H = hessian(field, grid)
    return np.einsum("i...,ij...,j...->...", g, H, g)


def branch_m1(u, lam, sup_disp, inf_disp, grad_mag):
    """min{-Lambda u - L-u, -(L+u + L-u), -L-u - |grad u|}, elementwise."""
    return np.minimum(
        np.minimum(-lam * u - inf_disp, -(sup_disp + inf_disp)),
        -inf_disp - grad_mag,
    )


def branch_m2(u, lam, sup_disp, inf_disp, grad_mag, inf_lap):
    """min{|grad u| - Lambda u, -Delta_inf u, |grad u| - L+u, |grad u| + L-u}, elementwise."""
    return np.minimum(
        np.minimum(grad_mag - lam * u, -inf_lap),
        np.minimum(grad_mag - sup_disp, grad_mag + inf_disp),
    )


@dataclass
class ViscosityResidual:
    field: np.ndarray
    sup_disp: np.ndarray
    inf_disp: np.ndarray
    grad_mag: np.ndarray
    inf_lap: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    residual: np.ndarray
    robust: np.ndarray
    degenerate: np.ndarray
    sup_residual: float
    mean_abs_residual: float

    def summary(self) -> dict:
        return {
            "sup_residual": self.sup_residual,
            "mean_abs_residual": self.mean_abs_residual,
            "robust_nodes": int(self.robust.sum()),
            "degenerate_nodes": int((self.degenerate & self.robust).sum()),
        }

    def write_csv(self, grid: Grid, path) -> None:
        import csv

        cols = ["x", "y"][: grid.dim]
        mask = self.robust.ravel()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols + ["u", "m1", "m2", "residual", "degenerate"])
            for idx in np.flatnonzero(mask):
                w.writerow(
                    [repr(float(c)) for c in grid.coords[idx]]
                    + [repr(float(a.ravel()[idx])) for a in (self.field, self.m1, self.m2, self.residual)]
                    + [int(self.degenerate.ravel()[idx])]
                )


def residual_report(
    field: np.ndarray,
    grid: Grid,
    r_j: float,
    lam: float,
    normalize: bool = True,
    margin: float = 2.0,
) -> ViscosityResidual:
    """Per-node M1, M2 and max{M1, M2}; summaries over nodes farther than ``margin*h`` from the boundary."""
    u = np.asarray(field, dtype=float).reshape(grid.shape)
    top = float(np.max(np.abs(u)))
    if normalize and top > 0:
        u = u / top
    sup, inf = nonlocal_sup_inf(u, grid, r_j)
    g = centered_gradient(u, grid)
    gmag = np.sqrt(np.sum(g * g, axis=0))
    dinf = infinity_laplacian(u, grid)
    m1 = branch_m1(u, lam, sup, inf, gmag)
    m2 = branch_m2(u, lam, sup, inf, gmag, dinf)
    res = np.maximum(m1, m2)
    interior = grid.interior
    for arr in (m1, m2, res):
        arr[~interior] = 0.0
    robust = interior & (grid.signed_distance > margin * grid.h)
    scale = np.max(np.abs(u)) if np.any(u) else 1.0
    degenerate = gmag < 1e-6 * scale / grid.r_omega
    vals = np.abs(res[robust])
    return ViscosityResidual(
        field=u,
        sup_disp=sup,
        inf_disp=inf,
        grad_mag=gmag,
        inf_lap=dinf,
        m1=m1,
        m2=m2,
        residual=res,
        robust=robust,
        degenerate=degenerate & interior,
        sup_residual=float(vals.max()) if vals.size else 0.0,
        mean_abs_residual=float(vals.mean()) if vals.size else 0.0,
    )
