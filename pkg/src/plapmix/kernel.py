"""Radial, compactly supported kernels J with unit mass and their lattice weights."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad


class ResolutionError(ValueError):
    """Grid spacing too coarse for the kernel or the domain."""


def _tent(r):
    return np.clip(1.0 - r, 0.0, None)


def _bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _truncated_quadratic(r):
    return np.clip(1.0 - np.asarray(r, dtype=float) ** 2, 0.0, None)


PROFILES = {
    "tent": _tent,
    "bump": _bump,
    "truncated-quadratic": _truncated_quadratic,
}


@dataclass(frozen=True)
class Kernel:
    """J(x) = c * profile(|x| / r_j), normalised so that its integral over R^dim is 1."""

    profile: str = "tent"
    r_j: float = 1.0
    dim: int = 1
    norm_const: float = field(init=False)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown kernel profile {self.profile!r}; choose from {sorted(PROFILES)}")
        if not self.r_j > 0:
            raise ValueError(f"r_j must be positive, got {self.r_j}")
        if self.dim not in (1, 2):
            raise ValueError("only 1D and 2D kernels are supported")
        f = PROFILES[self.profile]
        if self.dim == 1:
            mass, _ = quad(lambda r: 2.0 * f(np.array([r]))[0], 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
        else:
            mass, _ = quad(lambda r: 2.0 * math.pi * r * f(np.array([r]))[0], 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
        object.__setattr__(self, "norm_const", 1.0 / (mass * self.r_j**self.dim))

    def evaluate(self, displacement) -> np.ndarray:
        d = np.asarray(displacement, dtype=float)
        if self.dim == 1:
            r = np.abs(d[..., 0] if d.ndim == 2 else d)
        else:
            r = np.linalg.norm(np.atleast_2d(d), axis=-1)
            if d.ndim == 1:
                r = r[0]
        return self.norm_const * PROFILES[self.profile](np.asarray(r) / self.r_j)

    def to_dict(self) -> dict:
        return {"profile": self.profile, "r_j": self.r_j}


@dataclass(frozen=True)
class WeightTable:
    """Lattice offsets within the closed support and their unit-mass weights.

    ``offsets`` are integer multiples of ``h``; ``weights`` already carry the
    inner measure ``h**dim`` and sum to one.  ``raw_sum`` is the midpoint sum
    before rescaling.
    """

    h: float
    offsets: np.ndarray
    weights: np.ndarray
    raw_sum: float

    @property
    def displacements(self) -> np.ndarray:
        return self.offsets * self.h


def support_offsets(r_j: float, h: float, dim: int) -> np.ndarray:
    """All integer offsets k with |k h| <= r_j (closed ball), shape (m, dim)."""
    m = int(math.floor(r_j / h * (1 + 1e-12)))
    rng = range(-m, m + 1)
    ks = np.array(list(itertools.product(rng, repeat=dim)), dtype=int).reshape(-1, dim)
    keep = np.linalg.norm(ks * h, axis=1) <= r_j * (1 + 1e-12)
    return ks[keep]


def quadrature_weights(kernel: Kernel, h: float) -> WeightTable:
    if h > kernel.r_j / 4 * (1 + 1e-12):
        raise ResolutionError(f"spacing h={h} exceeds r_j/4={kernel.r_j / 4}; kernel under-resolved")
    offsets = support_offsets(kernel.r_j, h, kernel.dim)
    raw = kernel.evaluate(offsets * h if kernel.dim > 1 else offsets[:, 0] * h) * h**kernel.dim
    raw_sum = float(raw.sum())
    return WeightTable(h=float(h), offsets=offsets, weights=raw / raw_sum, raw_sum=raw_sum)
