"""First eigenpair of the discrete mixed p-Laplacian.

The default method is the nonlinear inverse power iteration

    v = argmin  H(v)/p - <|u|^{p-2} u, v>_h,   u <- v / ||v||_p,

whose inner problem is convex and solved by damped Newton.  Every outer step
is checked against the Rayleigh quotient; a step that would raise it is
replaced by a projected gradient step with backtracking, so accepted iterates
never increase the quotient.  ``method="gradient"`` runs the projected
gradient iteration alone.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import EnergyModel

log = logging.getLogger(__name__)


class UnsupportedExponentError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Solver hit ``max_iters``; ``report`` carries the best iterate."""

    def __init__(self, message: str, report: "EigenReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int | None = None  # None -> 200 * number of unknowns
    tol_lambda: float = 1e-10
    tol_grad: float = 1e-8
    step_init: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    method: str = "inverse_power"
    init: str = "distance"
    newton_tol: float = 1e-13
    newton_max_iters: int = 200
    keep_trace: bool = True

    def __post_init__(self):
        if not (self.tol_lambda > 0 and self.tol_grad > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.method not in ("inverse_power", "gradient"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.init not in INITIALIZERS:
            raise ValueError(f"unknown initializer {self.init!r}")


@dataclass
class EigenReport:
    p: float
    alpha: float
    beta: float
    lambda1: float
    log_lambda1: float
    lambda1_root: float
    field: np.ndarray
    iterations: int
    residual: float
    lambda_change: float
    converged: bool
    monotone: bool
    wall_time: float
    trace: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "p": self.p,
            "alpha": self.alpha,
            "beta": self.beta,
            "lambda1": self.lambda1,
            "log_lambda1": self.log_lambda1,
            "lambda1_root": self.lambda1_root,
            "iterations": self.iterations,
            "residual": self.residual,
            "lambda_change": self.lambda_change,
            "converged": self.converged,
            "monotone": self.monotone,
        }


def _init_distance(model: EnergyModel) -> np.ndarray:
    return model.grid.signed_distance.ravel()[model.interior_nodes].copy()


def _init_squared_distance(model: EnergyModel) -> np.ndarray:
    return _init_distance(model) ** 2


def _init_constant(model: EnergyModel) -> np.ndarray:
    return np.ones(model.n)


INITIALIZERS = {
    "distance": _init_distance,
    "squared-distance": _init_squared_distance,
    "constant": _init_constant,
}


def _normalize(model: EnergyModel, v: np.ndarray, p: float) -> np.ndarray:
    return v * math.exp(-model._log_norm(v, p) / p)


class _Problem:
    """Quotient bookkeeping for one (p, alpha, beta); fields scaled to max 1 internally."""

    def __init__(self, model: EnergyModel, p: float, alpha: float, beta: float):
        self.model, self.p, self.alpha, self.beta = model, p, alpha, beta
        self.h = model.cell_volume

    def log_quotient(self, u) -> float:
        return self.model.log_rayleigh_vec(u, self.p, self.alpha, self.beta)

    def residual(self, u: np.ndarray, lam_log: float) -> float:
        """Relative eigen-equation residual ||E'(u) - lam N'(u)|| / ||lam N'(u)||."""
        s = u / np.max(np.abs(u))
        p = self.p
        grad_e = self.model.gradient_vec(s, p, self.alpha, self.beta)
        lam = math.exp(lam_log)
        grad_n = lam * p * self.h * np.abs(s) ** (p - 2) * s
        return float(np.linalg.norm(grad_e - grad_n) / np.linalg.norm(grad_n))

    def quotient_gradient(self, s: np.ndarray, lam: float) -> np.ndarray:
        p = self.p
        norm_pp = self.h * np.sum(np.abs(s) ** p)
        grad_e = self.model.gradient_vec(s, p, self.alpha, self.beta)
        grad_n = p * self.h * np.abs(s) ** (p - 2) * s
        return (grad_e - lam * grad_n) / norm_pp

    def inverse_step(self, u: np.ndarray, opts: SolverOptions) -> np.ndarray:
        """Solve the convex inner problem by damped Newton."""
        p, a, b, model = self.p, self.alpha, self.beta, self.model
        s = u / np.max(u)
        rhs = self.h * s ** (p - 1)
        e0 = model.energy_vec(s, p, a, b)
        # minimiser along the ray t*s
        t = (float(rhs @ s) / e0) ** (1.0 / (p - 1))
        v = t * s

        def objective(x):
            # rejected trial points may overflow; inf simply fails the Armijo test
            with np.errstate(over="ignore", invalid="ignore"):
                val = model.energy_vec(x, p, a, b) / p - float(rhs @ x)
            return val if math.isfinite(val) else math.inf

        f = objective(v)
        rhs_norm = np.linalg.norm(rhs)
        for _ in range(opts.newton_max_iters):
            g = model.gradient_vec(v, p, a, b) / p - rhs
            if np.linalg.norm(g) <= opts.newton_tol * rhs_norm:
                break
            H = model.hessian_vec(v, p, a, b) / p
            diag = H.diagonal()
            mu = 1e-12 * max(float(diag.max()), 1e-300)
            step = spla.spsolve((H + mu * sp.identity(model.n, format="csr")).tocsc(), -g)
            decrement = -float(g @ step)
            if not np.all(np.isfinite(step)) or decrement <= 0:
                step, decrement = -g, float(g @ g)
            tau = 1.0
            while True:
                trial = v + tau * step
                f_trial = objective(trial)
                if f_trial <= f - opts.armijo * tau * decrement or tau < 1e-12:
                    break
                tau *= 0.5
            if tau < 1e-12 and f_trial > f:
                break
            converged_f = abs(f - f_trial) <= 1e-16 * abs(f)
            v, f = trial, f_trial
            if converged_f and decrement <= 1e-15 * abs(f):
                break
        return np.maximum(v, 0.0)

    def gradient_step(self, u: np.ndarray, lam_log: float, opts: SolverOptions):
        """Projected gradient step with backtracking on the quotient."""
        s = u / np.max(np.abs(u))
        lam = math.exp(lam_log)
        g = self.quotient_gradient(s, lam)
        gnorm = float(np.max(np.abs(g)))
        if gnorm == 0:
            return None
        tau = opts.step_init / gnorm
        g2 = float(g @ g)
        for _ in range(80):
            trial = np.maximum(s - tau * g, 0.0)
            if np.any(trial > 0):
                trial_log = self.log_quotient(trial)
                decrease = opts.armijo * tau * g2 / lam
                if decrease < 1 and trial_log < lam_log + math.log1p(-decrease):
                    return trial, trial_log
            tau *= opts.shrink
        return None


def solve_first(
    model: EnergyModel,
    p: float,
    alpha: float = 1.0,
    beta: float = 1.0,
    options: SolverOptions | None = None,
    init=None,
) -> EigenReport:
    """Compute (lambda_1(p), u_p) with ``||u_p||_p = 1`` and ``u_p > 0`` in the interior."""
    if not p >= 2:
        raise UnsupportedExponentError(f"p must be >= 2, got {p}")
    if alpha < 0 or beta < 0 or alpha + beta <= 0:
        raise ValueError("need alpha, beta >= 0 with alpha + beta > 0")
    opts = options or SolverOptions()
    max_iters = opts.max_iters if opts.max_iters is not None else 200 * model.n
    start = time.perf_counter()
    prob = _Problem(model, p, alpha, beta)

    if init is None:
        u = INITIALIZERS[opts.init](model)
    else:
        u = np.asarray(init, dtype=float)
        u = model.unknowns(u) if u.size == model.grid.size else u.copy()
        u = np.maximum(u, 0.0)
    if not np.any(u > 0):
        raise ValueError("initializer must be positive somewhere in the domain")
    u = _normalize(model, u / np.max(u), p)
    lam_log = prob.log_quotient(u)
    trace = [(0, math.exp(lam_log), math.nan)]
    monotone = True
    converged = False
    change = math.inf
    res = math.nan
    it = 0

    for it in range(1, max_iters + 1):
        candidate = None
        if opts.method == "inverse_power":
            v = prob.inverse_step(u, opts)
            if np.any(v > 0):
                v_log = prob.log_quotient(v)
                if v_log <= lam_log + 1e-12:
                    candidate = (v, v_log)
        if candidate is None:
            candidate = prob.gradient_step(u, lam_log, opts)
        if candidate is None:
            change = 0.0
            res = prob.residual(u, lam_log)
            converged = res <= opts.tol_grad
            break
        v, v_log = candidate
        if v_log > lam_log + 1e-12:
            monotone = False
        change = abs(math.expm1(v_log - lam_log))
        u, lam_log = _normalize(model, v / np.max(v), p), v_log
        res = prob.residual(u, lam_log)
        if opts.keep_trace:
            trace.append((it, math.exp(lam_log), res))
        if change <= opts.tol_lambda and res <= opts.tol_grad:
            converged = True
            break

    report = EigenReport(
        p=float(p),
        alpha=float(alpha),
        beta=float(beta),
        lambda1=math.exp(lam_log),
        log_lambda1=lam_log,
        lambda1_root=math.exp(lam_log / p),
        field=model.embed(u),
        iterations=it,
        residual=res,
        lambda_change=change,
        converged=converged,
        monotone=monotone,
        wall_time=time.perf_counter() - start,
        trace=trace,
    )
    if not converged:
        raise ConvergenceError(
            f"p={p}: no convergence in {it} iterations (change={change:.3e}, residual={res:.3e})", report
        )
    log.debug("p=%g lambda1=%.12e iters=%d residual=%.2e", p, report.lambda1, it, res)
    return report


def sweep_p(
    model: EnergyModel,
    p_list,
    alpha: float = 1.0,
    beta: float = 1.0,
    options: SolverOptions | None = None,
    init=None,
) -> list[EigenReport]:
    """Solve for ascending ``p_list``, warm-starting each solve from the previous field.

    A non-converged entry is kept (``converged=False``) and the sweep continues.
    """
    p_list = [float(p) for p in p_list]
    if any(b < a for a, b in zip(p_list, p_list[1:])):
        raise ValueError("p_list must be ascending")
    if any(p < 2 for p in p_list):
        raise UnsupportedExponentError("every p in the sweep must be >= 2")
    reports = []
    warm = init
    for p in p_list:
        try:
            rep = solve_first(model, p, alpha, beta, options, init=warm)
        except ConvergenceError as exc:
            log.warning("%s", exc)
            rep = exc.report
        reports.append(rep)
        warm = rep.field
    return reports


def with_options(options: SolverOptions | None, **changes) -> SolverOptions:
    return replace(options or SolverOptions(), **changes)
