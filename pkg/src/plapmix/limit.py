"""The p -> infinity limit: closed-form Lambda, the infinity quotient and extremal fields."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .discretize import Grid
from .geometry import decompose
from .kernel import support_offsets

B_ZERO = "B_ZERO"
SMALL_RJ_OR_K0 = "SMALL_RJ_OR_K0"
BIG_RJ_B_GE_1 = "BIG_RJ_B_GE_1"
BIG_RJ_B_LT_1 = "BIG_RJ_B_LT_1"


@dataclass(frozen=True)
class LambdaCase:
    tag: str
    value: float
    r_omega: float
    r_j: float
    k_omega: int
    b: float

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "Lambda": self.value,
            "r_omega": self.r_omega,
            "r_j": self.r_j,
            "k_omega": self.k_omega,
            "b": self.b,
        }


def case_predicates(k_omega: int, b: float, r_j: float) -> dict[str, bool]:
    """Which of the four geometric cases hold (exactly one for valid input)."""
    return {
        B_ZERO: b == 0,
        SMALL_RJ_OR_K0: k_omega == 0 or (k_omega != 0 and b != 0 and r_j <= 1),
        BIG_RJ_B_GE_1: k_omega > 0 and r_j > 1 and b >= 1,
        BIG_RJ_B_LT_1: k_omega > 0 and r_j > 1 and 0 < b < 1,
    }


def lambda_formula(r_omega: float, r_j: float, k_omega: int, b: float, tol: float = 1e-9) -> LambdaCase:
    if not (r_omega > 0 and r_j > 0):
        raise ValueError("r_omega and r_j must be positive")
    if k_omega < 0 or int(k_omega) != k_omega:
        raise ValueError(f"k_omega must be a nonnegative integer, got {k_omega}")
    if not 0 <= b < r_j:
        raise ValueError(f"remainder b={b} outside [0, r_j)")
    if abs(k_omega * r_j + b - r_omega) > tol * max(1.0, r_omega):
        raise ValueError(f"inconsistent decomposition: {k_omega}*{r_j} + {b} != {r_omega}")
    if b == 0 and k_omega == 0:
        raise ValueError("b = 0 with k_omega = 0 would mean r_omega = 0")
    k = int(k_omega)
    fired = [tag for tag, hit in case_predicates(k, b, r_j).items() if hit]
    if len(fired) != 1:
        raise AssertionError(f"case selection not exclusive: {fired}")
    tag = fired[0]
    if tag == B_ZERO:
        value = max(1 / r_omega, 1 / k)
    elif tag == SMALL_RJ_OR_K0:
        value = max(1 / r_omega, 1 / (k + 1))
    elif tag == BIG_RJ_B_GE_1:
        value = 1 / (k + 1)
    else:
        value = 1 / (k + b)
    return LambdaCase(tag, value, float(r_omega), float(r_j), k, float(b))


def lambda_for(r_omega: float, r_j: float) -> LambdaCase:
    k, b = decompose(r_omega, r_j)
    return lambda_formula(r_omega, r_j, k, b)


# -- infinity quotient ---------------------------------------------------------


@dataclass(frozen=True)
class InfQuotient:
    sup_grad: float
    j_seminorm: float
    sup_norm: float

    @property
    def quotient(self) -> float:
        if self.sup_norm <= 0:
            raise ValueError("quotient undefined for the zero field")
        return max(self.sup_grad, self.j_seminorm) / self.sup_norm

    def to_dict(self) -> dict:
        return {
            "sup_grad": self.sup_grad,
            "j_seminorm": self.j_seminorm,
            "sup_norm": self.sup_norm,
            "quotient": self.quotient,
        }


def _half_offsets(grid: Grid, r_j: float) -> np.ndarray:
    ks = support_offsets(r_j, grid.h, grid.dim)
    # one representative of each +-k pair; the zero offset contributes nothing
    first = np.array([next((v for v in k if v != 0), 0) for k in ks])
    return ks[first > 0]


def j_seminorm(field: np.ndarray, grid: Grid, r_j: float) -> float:
    """max |u(x) - u(y)| over lattice pairs with |x - y| <= r_j (band nodes included)."""
    u = np.asarray(field, dtype=float).reshape(grid.shape)
    best = 0.0
    for k in _half_offsets(grid, r_j):
        best = max(best, float(np.max(np.abs(u - grid.shifted(u, k)))))
    return best


def sup_grad(field: np.ndarray, grid: Grid) -> float:
    """Largest discrete gradient magnitude over all cells.

    In 1D this is the forward difference.  In 2D each square cell uses the
    gradient of its bilinear interpolant at the cell centre (the mean of the
    two forward differences along each axis); a pure forward difference
    overestimates the Lipschitz constant by up to sqrt(2) at kinks.
    """
    u = np.asarray(field, dtype=float).reshape(grid.shape)
    h = grid.h
    if grid.dim == 1:
        return float(np.max(np.abs(np.diff(u)))) / h if u.size > 1 else 0.0
    gx = 0.5 * ((u[1:, :-1] - u[:-1, :-1]) + (u[1:, 1:] - u[:-1, 1:])) / h
    gy = 0.5 * ((u[:-1, 1:] - u[:-1, :-1]) + (u[1:, 1:] - u[1:, :-1])) / h
    return float(np.max(np.hypot(gx, gy)))


def inf_quotient(field: np.ndarray, grid: Grid, r_j: float) -> InfQuotient:
    u = np.asarray(field, dtype=float)
    return InfQuotient(sup_grad(u, grid), j_seminorm(u, grid, r_j), float(np.max(np.abs(u))))


# -- extremal fields -----------------------------------------------------------


def _center_and_radius(grid: Grid, x0, r_omega):
    if x0 is None:
        x0 = grid.center
    x0 = np.asarray(x0, dtype=float).reshape(grid.dim)
    if r_omega is None:
        r_omega = grid.r_omega
    dist = float(grid.domain.signed_distance(x0[None, :])[0])
    if abs(dist - r_omega) > 1e-6 * max(1.0, r_omega):
        warnings.warn(
            f"x0={x0.tolist()} is at distance {dist:.6g} from the boundary, not r_omega={r_omega:.6g};"
            " the closed-form quotients only hold at the inradius centre",
            stacklevel=3,
        )
    return x0, float(r_omega)


def _radial_field(grid: Grid, x0, profile) -> np.ndarray:
    t = np.linalg.norm(grid.coords - x0, axis=1).reshape(grid.shape)
    return grid.restrict(profile(t))


def cone_profile(t, r_omega: float):
    return np.clip(r_omega - np.asarray(t, dtype=float), 0.0, None) / r_omega


def build_cone(grid: Grid, x0=None, r_omega: float | None = None) -> np.ndarray:
    """v(x) = (R_Omega - |x - x0|)_+ / R_Omega sampled on the grid."""
    x0, r_omega = _center_and_radius(grid, x0, r_omega)
    return _radial_field(grid, x0, lambda t: cone_profile(t, r_omega))


def staircase_profile(t, r_omega: float, r_j: float, k_omega: int, b: float) -> np.ndarray:
    """Radial staircase: drop 1/(K+1) over each [iR_J, iR_J+b], flat on the rest."""
    t = np.asarray(t, dtype=float)
    step = 1.0 / (k_omega + 1)
    out = np.zeros_like(t)
    for i in range(k_omega):
        a_lo, a_hi, b_hi = i * r_j, i * r_j + b, (i + 1) * r_j
        on_a = (t >= a_lo) & (t <= a_hi)
        on_b = (t > a_hi) & (t < b_hi)
        out = np.where(on_a, 1 - i * step - step * (t - a_lo) / b, out)
        out = np.where(on_b, 1 - (i + 1) * step, out)
    last = (t >= r_omega - b) & (t < r_omega)
    out = np.where(last, step * (r_omega - t) / b, out)
    return out


def build_staircase(grid: Grid, x0=None, r_omega=None, r_j=None, k_omega=None, b=None) -> np.ndarray:
    x0, r_omega = _center_and_radius(grid, x0, r_omega)
    r_j = grid.r_j if r_j is None else r_j
    if k_omega is None or b is None:
        k_omega, b = decompose(r_omega, r_j)
    if b <= 0 or k_omega <= 0:
        raise ValueError("staircase needs k_omega > 0 and b > 0")
    return _radial_field(grid, x0, lambda t: staircase_profile(t, r_omega, r_j, k_omega, b))


def z_profile(t, r_omega: float, r_j: float, k_omega: int, b: float) -> np.ndarray:
    """Piecewise-linear profile: slope 1/(K+b) on [iR_J, iR_J+b], gentler slope in between."""
    t = np.asarray(t, dtype=float)
    steep = 1.0 / (k_omega + b)
    gentle = (1 - b) / ((k_omega + b) * (r_j - b))
    out = np.zeros_like(t)
    for i in range(k_omega):
        y_i = 1 - i * steep
        a_lo, a_hi, b_hi = i * r_j, i * r_j + b, (i + 1) * r_j
        on_a = (t >= a_lo) & (t <= a_hi)
        on_b = (t > a_hi) & (t < b_hi)
        out = np.where(on_a, y_i - steep * (t - a_lo), out)
        out = np.where(on_b, y_i - b * steep - gentle * (t - a_hi), out)
    last = (t >= r_omega - b) & (t < r_omega)
    out = np.where(last, b * steep - steep * (t - r_omega + b), out)
    return out


def build_profile_z(grid: Grid, x0=None, r_omega=None, r_j=None, k_omega=None, b=None) -> np.ndarray:
    x0, r_omega = _center_and_radius(grid, x0, r_omega)
    r_j = grid.r_j if r_j is None else r_j
    if k_omega is None or b is None:
        k_omega, b = decompose(r_omega, r_j)
    if not (k_omega > 0 and 0 < b < 1 < r_j):
        raise ValueError(f"profile z needs K > 0 and 0 < b < 1 < R_J (got K={k_omega}, b={b}, R_J={r_j})")
    return _radial_field(grid, x0, lambda t: z_profile(t, r_omega, r_j, k_omega, b))


# -- verification -------------------------------------------------------------


@dataclass(frozen=True)
class LowerBoundCheck:
    passed: bool
    margin: float
    quotient: float
    Lambda: float
    tolerance: float
    components: InfQuotient

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "margin": self.margin,
            "quotient": self.quotient,
            "Lambda": self.Lambda,
            "tolerance": self.tolerance,
            **{k: v for k, v in self.components.to_dict().items() if k != "quotient"},
        }


def grid_tolerance(grid: Grid, lipschitz: float, sup_norm: float = 1.0) -> float:
    """One-cell slack for node-sampled sup quantities, relative to ||u||_inf."""
    return 2.0 * lipschitz * grid.h / sup_norm


def verify_lower_bounds(
    field: np.ndarray, grid: Grid, lambda_case: LambdaCase, lipschitz: float | None = None
) -> LowerBoundCheck:
    """Check quotient(field) >= Lambda - eps_grid; ``margin`` is quotient - Lambda."""
    comps = inf_quotient(field, grid, lambda_case.r_j)
    q = comps.quotient
    lip = comps.sup_grad if lipschitz is None else lipschitz
    eps = grid_tolerance(grid, lip, comps.sup_norm)
    margin = q - lambda_case.value
    return LowerBoundCheck(margin >= -eps, margin, q, lambda_case.value, eps, comps)


@dataclass
class ExtremalField:
    name: str
    field: np.ndarray
    expected: dict
    lipschitz: float


def extremal_fields(grid: Grid, lambda_case: LambdaCase) -> list[ExtremalField]:
    """The cone plus whichever of the staircase and z-profile the case admits.

    ``expected`` holds the closed-form ``sup_grad``, ``j_seminorm`` and
    ``quotient`` of each construction (with ``sup_norm`` 1).
    """
    r, rj, k, b = lambda_case.r_omega, lambda_case.r_j, lambda_case.k_omega, lambda_case.b
    out = []
    cone_j = 1.0 if rj > r else rj / r
    out.append(
        ExtremalField(
            "cone",
            build_cone(grid, r_omega=r),
            {"sup_grad": 1 / r, "j_seminorm": cone_j, "quotient": max(1 / r, cone_j)},
            1 / r,
        )
    )
    if k > 0 and b > 0:
        grad = 1 / ((k + 1) * b)
        out.append(
            ExtremalField(
                "staircase",
                build_staircase(grid, r_omega=r, r_j=rj, k_omega=k, b=b),
                {"sup_grad": grad, "j_seminorm": 1 / (k + 1), "quotient": max(grad, 1 / (k + 1))},
                grad,
            )
        )
    if k > 0 and 0 < b < 1 < rj:
        grad = max(1 / (k + b), (1 - b) / ((k + b) * (rj - b)))
        out.append(
            ExtremalField(
                "profile_z",
                build_profile_z(grid, r_omega=r, r_j=rj, k_omega=k, b=b),
                {"sup_grad": grad, "j_seminorm": 1 / (k + b), "quotient": max(grad, 1 / (k + b))},
                grad,
            )
        )
    return out


def check_extremal(grid: Grid, ext: ExtremalField, lambda_case: LambdaCase) -> dict:
    """Compare measured quotient components against closed forms within 2*Lip*h."""
    comps = inf_quotient(ext.field, grid, lambda_case.r_j)
    tol = grid_tolerance(grid, ext.lipschitz)
    measured = comps.to_dict()
    errors = {key: abs(measured[key] - ext.expected[key]) for key in ("sup_grad", "j_seminorm", "quotient")}
    bound = verify_lower_bounds(ext.field, grid, lambda_case, lipschitz=ext.lipschitz)
    return {
        "name": ext.name,
        "measured": measured,
        "expected": ext.expected,
        "tolerance": tol,
        "max_error": max(errors.values()),
        "components_ok": all(e <= tol for e in errors.values()),
        "lower_bound": bound.to_dict(),
        "passed": all(e <= tol for e in errors.values()) and bound.passed,
    }
