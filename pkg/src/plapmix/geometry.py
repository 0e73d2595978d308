"""Computational domains, inradius and the kernel-dilated region.

All shapes expose the same small vectorised interface on point arrays of
shape ``(n, dim)``:

* ``signed_distance(points)``: distance to the boundary, positive inside.
* ``distance_to(points)``: distance to the closed domain (0 inside).
* ``bounding_box()``: ``(lo, hi)`` arrays.

Polygons violate the C^{1,alpha} boundary assumption of the regularity theory;
the numerics run on them regardless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize


class InvalidDomainError(ValueError):
    """Raised for degenerate or malformed domain descriptions."""


def _as_points(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if dim == 1 and pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != dim:
        raise ValueError(f"expected points with {dim} coordinates, got shape {pts.shape}")
    return pts


class Domain:
    """Base class for bounded open domains in R^1 or R^2."""

    kind: str = ""
    dim: int = 0

    def signed_distance(self, points) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def contains(self, points) -> np.ndarray:
        return self.signed_distance(points) > 0

    def distance_to(self, points) -> np.ndarray:
        return np.maximum(-self.signed_distance(points), 0.0)

    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))


@dataclass(frozen=True)
class Interval(Domain):
    a: float
    b: float

    kind = "interval"
    dim = 1

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a >= self.b:
            raise InvalidDomainError(f"interval needs a < b, got ({self.a}, {self.b})")

    def signed_distance(self, points) -> np.ndarray:
        x = _as_points(points, 1)[:, 0]
        return np.minimum(x - self.a, self.b - x)

    def bounding_box(self):
        return np.array([self.a]), np.array([self.b])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Box(Domain):
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    kind = "box"

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size not in (1, 2):
            raise InvalidDomainError("box corners must be matching 1- or 2-vectors")
        if np.any(lo >= hi):
            raise InvalidDomainError(f"box needs lo < hi componentwise, got {self.lo}, {self.hi}")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))

    @property
    def dim(self) -> int:  # type: ignore[override]
        return len(self.lo)

    def signed_distance(self, points) -> np.ndarray:
        x = _as_points(points, self.dim)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        inner = np.minimum(x - lo, hi - x)
        inside = np.min(inner, axis=1)
        excess = np.maximum(np.maximum(lo - x, x - hi), 0.0)
        outside = np.linalg.norm(excess, axis=1)
        return np.where(inside > 0, inside, np.where(outside > 0, -outside, inside))

    def bounding_box(self):
        return np.asarray(self.lo), np.asarray(self.hi)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Ball(Domain):
    center: tuple[float, ...]
    radius: float

    kind = "ball"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, float))
        if c.ndim != 1 or c.size not in (1, 2):
            raise InvalidDomainError("ball center must have 1 or 2 coordinates")
        if not self.radius > 0:
            raise InvalidDomainError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(v) for v in c))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:  # type: ignore[override]
        return len(self.center)

    def signed_distance(self, points) -> np.ndarray:
        x = _as_points(points, self.dim)
        return self.radius - np.linalg.norm(x - np.asarray(self.center), axis=1)

    def bounding_box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius}


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    # collinear overlaps are treated as intersections
    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    return (
        (o1 == 0 and on_seg(p1, p2, q1))
        or (o2 == 0 and on_seg(p1, p2, q2))
        or (o3 == 0 and on_seg(q1, q2, p1))
        or (o4 == 0 and on_seg(q1, q2, p2))
    )


@dataclass(frozen=True)
class Polygon(Domain):
    """Simple polygon with counterclockwise vertices (2D only)."""

    vertices: tuple[tuple[float, float], ...]

    kind = "polygon"
    dim = 2

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            if v.size % 2:
                raise InvalidDomainError("flat vertex array must have even length")
            v = v.reshape(-1, 2)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidDomainError("polygon needs at least 3 vertices in 2D")
        if np.allclose(v[0], v[-1]) and len(v) > 3:
            v = v[:-1]
        x, y = v[:, 0], v[:, 1]
        area = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        scale = float(np.ptp(v, axis=0).max()) ** 2
        if abs(area) <= 1e-14 * max(scale, 1e-300):
            raise InvalidDomainError("polygon has zero area")
        if area < 0:
            raise InvalidDomainError("polygon vertices must be counterclockwise")
        n = len(v)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                    raise InvalidDomainError("polygon is self-intersecting")
        object.__setattr__(self, "vertices", tuple((float(a), float(b)) for a, b in v))

    def _edge_distance(self, x: np.ndarray) -> np.ndarray:
        v = np.asarray(self.vertices)
        a, b = v, np.roll(v, -1, axis=0)
        ab = b - a
        # (n_points, n_edges, 2)
        ap = x[:, None, :] - a[None, :, :]
        t = np.clip(np.sum(ap * ab, axis=2) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        closest = a[None] + t[..., None] * ab[None]
        return np.min(np.linalg.norm(x[:, None, :] - closest, axis=2), axis=1)

    def _inside(self, x: np.ndarray) -> np.ndarray:
        v = np.asarray(self.vertices)
        a, b = v, np.roll(v, -1, axis=0)
        px, py = x[:, 0:1], x[:, 1:2]
        crosses = (a[:, 1] > py) != (b[:, 1] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[:, 0] + (py - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
        return (np.sum(crosses & (px < xint), axis=1) % 2) == 1

    def signed_distance(self, points) -> np.ndarray:
        x = _as_points(points, 2)
        d = self._edge_distance(x)
        return np.where(self._inside(x), d, -d)

    def bounding_box(self):
        v = np.asarray(self.vertices)
        return v.min(axis=0), v.max(axis=0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "vertices": [c for vert in self.vertices for c in vert]}


def domain_from_dict(block: dict) -> Domain:
    """Build a domain from its config block (``kind`` tag plus parameters)."""
    kind = block.get("kind")
    try:
        if kind == "interval":
            return Interval(float(block["a"]), float(block["b"]))
        if kind == "box":
            return Box(tuple(block["lo"]), tuple(block["hi"]))
        if kind == "ball":
            return Ball(tuple(np.atleast_1d(block["center"])), float(block["radius"]))
        if kind == "polygon":
            return Polygon(tuple(np.asarray(block["vertices"], float).reshape(-1, 2).tolist()))
    except KeyError as exc:
        raise InvalidDomainError(f"domain '{kind}' is missing field {exc.args[0]!r}") from None
    raise InvalidDomainError(f"unknown domain kind {kind!r}")


@dataclass(frozen=True)
class InradiusData:
    r_omega: float
    center: np.ndarray
    k_omega: int
    b: float


def inradius(domain: Domain) -> tuple[float, np.ndarray]:
    """Return ``(R_Omega, x0)``, the inradius and a point realising it."""
    if isinstance(domain, Interval):
        return 0.5 * (domain.b - domain.a), np.array([0.5 * (domain.a + domain.b)])
    if isinstance(domain, Box):
        lo, hi = domain.bounding_box()
        return float(0.5 * np.min(hi - lo)), 0.5 * (lo + hi)
    if isinstance(domain, Ball):
        return domain.radius, np.asarray(domain.center, dtype=float)
    if isinstance(domain, Polygon):
        return _polygon_inradius(domain)
    raise InvalidDomainError(f"no inradius rule for {type(domain).__name__}")


def _polygon_inradius(poly: Polygon, samples: int = 256) -> tuple[float, np.ndarray]:
    lo, hi = poly.bounding_box()
    diam = poly.diameter()
    xs = np.linspace(lo[0], hi[0], samples)
    ys = np.linspace(lo[1], hi[1], samples)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    sd = np.concatenate([poly.signed_distance(chunk) for chunk in np.array_split(pts, 16)])
    start = pts[np.argmax(sd)]
    res = minimize(
        lambda z: -poly.signed_distance(z[None, :])[0],
        start,
        method="Nelder-Mead",
        options={"xatol": 1e-6 * diam, "fatol": 1e-9 * diam, "maxiter": 4000},
    )
    best = res.x if -res.fun >= sd.max() else start
    return float(poly.signed_distance(best[None, :])[0]), np.asarray(best, dtype=float)


def decompose(r_omega: float, r_j: float, tol_b: float = 1e-9) -> tuple[int, float]:
    """Split ``r_omega = k * r_j + b`` with ``0 <= b < r_j``.

    Remainders within ``tol_b * r_j`` of either end are snapped, so a
    floating-point division never yields ``b`` just below ``r_j`` or a
    spurious positive ``b`` when ``r_j`` divides ``r_omega``.
    """
    if not (r_omega > 0 and r_j > 0):
        raise ValueError("decompose needs r_omega > 0 and r_j > 0")
    k = int(math.floor(r_omega / r_j))
    b = r_omega - k * r_j
    if b < 0:
        k, b = k - 1, b + r_j
    if b >= r_j - tol_b * r_j:
        return k + 1, 0.0
    if b <= tol_b * r_j:
        return k, 0.0
    return k, b


def inradius_data(domain: Domain, r_j: float) -> InradiusData:
    r, x0 = inradius(domain)
    k, b = decompose(r, r_j)
    return InradiusData(r, x0, k, b)


class DilatedRegion:
    """Membership predicate for Omega_J = {y : dist(y, Omega) <= R_J}."""

    def __init__(self, domain: Domain, r_j: float):
        if not r_j > 0:
            raise ValueError("r_j must be positive")
        self.domain = domain
        self.r_j = float(r_j)

    def __call__(self, points) -> np.ndarray:
        # supp(J) is the closed ball, so the outer shell is included
        return self.domain.distance_to(points) <= self.r_j * (1 + 1e-12)

    contains = __call__


def dilate(domain: Domain, r_j: float) -> Callable[[np.ndarray], np.ndarray]:
    return DilatedRegion(domain, r_j)
