import numpy as np
import pytest

import oracles
from conftest import interval_model
from plapmix.discretize import Grid
from plapmix.eigensolver import sweep_p
from plapmix.geometry import Ball, Box, Interval
from plapmix.kernel import Kernel, quadrature_weights
from plapmix.limit import build_cone, lambda_for
from plapmix.viscosity import (
    branch_m1,
    branch_m2,
    centered_gradient,
    infinity_laplacian,
    nonlocal_sup_inf,
    residual_report,
)


def random_interior(grid, rng):
    u = grid.zeros()
    u[grid.interior] = rng.normal(size=grid.n_interior)
    return u


@pytest.mark.parametrize("domain", [Interval(-1, 1), Ball((0.0, 0.0), 1.0)])
def test_sup_inf_matches_exhaustive_scan(domain, rng):
    grid = Grid(domain, 1 / 16, 0.25)
    u = random_interior(grid, rng)
    sup, inf = nonlocal_sup_inf(u, grid, 0.25)
    ref_sup, ref_inf = oracles.sup_inf_scan(grid, u, 0.25)
    live = grid.interior
    assert np.array_equal(sup[live], ref_sup[live])
    assert np.array_equal(inf[live], ref_inf[live])
    assert np.all(sup >= 0) and np.all(inf <= 0)


def test_sup_inf_of_zero_field():
    grid = Grid(Interval(-1, 1), 1 / 16, 0.25)
    sup, inf = nonlocal_sup_inf(grid.zeros(), grid, 0.25)
    assert not sup.any() and not inf.any()


def test_cone_displacements_at_peak():
    grid = Grid(Interval(-2, 2), 1 / 64, 1.0)
    sup, inf = nonlocal_sup_inf(build_cone(grid), grid, 1.0)
    c = grid.center_index
    assert sup[c] == 0.0
    assert inf[c] == pytest.approx(-0.5, abs=1e-15)


def test_infinity_laplacian_quadratics():
    grid = Grid(Interval(0, 1), 1 / 64, 1 / 4)
    u = grid.field(lambda x: x**2)
    assert infinity_laplacian(u, grid)[grid.center_index] == pytest.approx(2.0, rel=1e-10)
    affine = grid.field(lambda x: 3 * x - 1)
    core = grid.signed_distance > 2 * grid.h  # field() zeroes the band, so skip the kinks
    assert np.max(np.abs(infinity_laplacian(affine, grid)[core])) < 1e-9

    grid2 = Grid(Box((0, -1), (2, 1)), 1 / 32, 1 / 4)
    saddle = grid2.field(lambda p: p[:, 0] ** 2 - p[:, 1] ** 2)
    c = grid2.center_index
    assert grid2.coords[np.ravel_multi_index(c, grid2.shape)] == pytest.approx([1.0, 0.0])
    assert infinity_laplacian(saddle, grid2)[c] == pytest.approx(8.0, rel=1e-10)
    plane = grid2.field(lambda p: 2 * p[:, 0] - 0.5 * p[:, 1])
    core2 = grid2.signed_distance > 2 * grid2.h
    assert np.max(np.abs(infinity_laplacian(plane, grid2)[core2])) < 1e-8


def test_edge_nodes_have_no_stencil():
    grid = Grid(Interval(0, 1), 1 / 64, 1 / 4)
    g = centered_gradient(grid.field(lambda x: x), grid)
    assert np.isnan(g[0, 0]) and np.isnan(g[0, -1]) and not np.isnan(g[0, 1])


def test_decomposition_and_signs(rng):
    grid = Grid(Ball((0.0, 0.0), 1.0), 1 / 16, 0.25)
    u = random_interior(grid, rng)
    rep = residual_report(u, grid, 0.25, 1.0)
    total = rep.sup_disp + rep.inf_disp
    # L = L+ + L- by construction; check against the scan directly
    ref_sup, ref_inf = oracles.sup_inf_scan(grid, rep.field, 0.25)
    assert np.allclose(total[grid.interior], (ref_sup + ref_inf)[grid.interior], rtol=0, atol=1e-15)
    assert np.all(rep.sup_disp >= 0) and np.all(rep.inf_disp <= 0)


def test_branches_recomputed_from_scratch(rng):
    grid = Grid(Interval(-1, 1), 1 / 32, 0.25)
    x = grid.coords[:, 0]
    u = grid.restrict((np.cos(np.pi * x / 2) * (1 + 0.3 * np.sin(5 * x))).reshape(grid.shape))
    lam = 0.8
    rep = residual_report(u, grid, 0.25, lam, normalize=False)
    h = grid.h
    m = int(round(0.25 / h))
    for i in np.flatnonzero(grid.interior):
        du = (u[i + 1] - u[i - 1]) / (2 * h)
        d2 = (u[i + 1] - 2 * u[i] + u[i - 1]) / h**2
        window = u[max(i - m, 0) : i + m + 1] - u[i]
        lp, lm = window.max(), window.min()
        m1 = min(-lam * u[i] - lm, -(lp + lm), -lm - abs(du))
        m2 = min(abs(du) - lam * u[i], -(du * du * d2), abs(du) - lp, abs(du) + lm)
        assert rep.m1[i] == pytest.approx(m1, abs=1e-12)
        assert rep.m2[i] == pytest.approx(m2, abs=1e-9 * max(1.0, abs(m2)))
        assert rep.residual[i] == max(rep.m1[i], rep.m2[i])


def test_m1_is_one_homogeneous(rng):
    grid = Grid(Interval(-1, 1), 1 / 32, 0.25)
    u = grid.restrict(np.abs(random_interior(grid, rng)))
    base = residual_report(u, grid, 0.25, 1.3, normalize=False)
    for k in (0.5, 3.0, 40.0):
        scaled = residual_report(k * u, grid, 0.25, 1.3, normalize=False)
        assert np.allclose(scaled.m1, k * base.m1, rtol=1e-12, atol=1e-12 * k)


def test_affine_region_m2_nonpositive():
    grid = Grid(Interval(0, 4), 1 / 32, 0.25)
    u = grid.restrict(grid.field(lambda x: 0.5 * x + 0.1))
    rep = residual_report(u, grid, 0.25, 0.1, normalize=False)
    core = grid.interior & (grid.signed_distance > 0.5)
    assert np.all(np.abs(rep.inf_lap[core]) < 1e-9)
    assert np.all(rep.m2[core] <= 1e-12)


def test_zero_field_residual_is_exactly_zero():
    grid = Grid(Interval(-2, 2), 1 / 64, 1.0)
    rep = residual_report(grid.zeros(), grid, 1.0, 0.5)
    assert not rep.residual.any() and rep.sup_residual == 0.0


def test_scaled_cone_residual_unchanged():
    grid = Grid(Interval(-2, 2), 1 / 64, 1.0)
    cone = build_cone(grid)
    for k in (1.0, 7.0):
        rep = residual_report(k * cone, grid, 1.0, 0.5)
        assert rep.sup_residual == 0.0


def test_resolution_trend_for_off_lattice_cone():
    sups = []
    for h in (1 / 16, 1 / 32, 1 / 64, 1 / 128):
        grid = Grid(Interval(-2, 2), h, 1.0, center=[0.37 * h])
        rep = residual_report(build_cone(grid, x0=[0.0]), grid, 1.0, 0.5)
        sups.append(rep.sup_residual)
    assert all(b < a for a, b in zip(sups, sups[1:]))
    assert sups[-1] < sups[0] / 4


def test_large_p_eigenfield_residual():
    model = interval_model()
    reps = sweep_p(model, [4, 8, 16, 32, 64])
    lam = lambda_for(2.0, 1.0).value
    rep = residual_report(reps[-1].field, model.grid, 1.0, lam)
    assert rep.sup_residual < 0.15
    assert rep.robust.sum() > 200


def _plus_minus_roots(phi, grid, weights, node, p):
    u = phi.ravel()
    plus = minus = 0.0
    for k, w in zip(weights.offsets[:, 0], weights.weights):
        d = u[node + k] - u[node]
        plus += w * max(d, 0.0) ** (p - 1)
        minus += w * max(-d, 0.0) ** (p - 1)
    return plus ** (1 / (p - 1)), minus ** (1 / (p - 1))


def test_plus_minus_integrals_approach_sup_inf():
    grid = Grid(Interval(-2, 2), 1 / 64, 1.0)
    weights = quadrature_weights(Kernel("tent", 1.0, 1), grid.h)
    phi = build_cone(grid)
    sup, inf = nonlocal_sup_inf(phi, grid, 1.0)
    peak = grid.center_index[0]
    off = peak + 32  # x0 + 1/2
    for node in (peak, off):
        gaps_plus, gaps_minus = [], []
        for p in (8, 16, 32, 64):
            plus, minus = _plus_minus_roots(phi, grid, weights, node, p)
            assert plus <= sup[node] + 1e-15 and minus <= -inf[node] + 1e-15
            gaps_plus.append(sup[node] - plus)
            gaps_minus.append(-inf[node] - minus)
        for gaps in (gaps_plus, gaps_minus):
            assert all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:]))
            assert gaps[-1] < 0.1 * phi.max()
    assert sup[off] == pytest.approx(0.25) and inf[off] == pytest.approx(-0.5)


def test_csv_export(tmp_path):
    grid = Grid(Interval(-2, 2), 1 / 32, 1.0)
    rep = residual_report(build_cone(grid), grid, 1.0, 0.5)
    path = tmp_path / "res.csv"
    rep.write_csv(grid, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,u,m1,m2,residual,degenerate"
    assert len(lines) - 1 == rep.robust.sum()


def test_branches_at_cone_peak():
    # cone of radius 2 with R_J = 1 at its peak: u = 1, L+ = 0, L- = -1/2, centred |grad| = 0
    lam = 0.5
    assert branch_m1(1.0, lam, 0.0, -0.5, 0.0) == 0.0
    assert branch_m2(1.0, lam, 0.0, -0.5, 0.0, 0.0) == -0.5
    grid = Grid(Interval(-2, 2), 1 / 64, 1.0)
    rep = residual_report(build_cone(grid), grid, 1.0, lam)
    c = grid.center_index
    assert rep.grad_mag[c] == 0.0 and rep.degenerate[c]
    assert rep.m1[c] == 0.0 and rep.residual[c] == 0.0
