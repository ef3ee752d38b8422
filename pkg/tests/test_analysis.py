import math

import numpy as np
import pytest

from nehari_dp import (
    NoBracket,
    SolverOptions,
    build_interval_mesh,
    estimate_lambda_star,
    estimate_sobolev_constant,
    lambda_sweep,
    minus_norm_lower_bound,
)
from nehari_dp.analysis import (
    _feasible,
    default_probes,
    degenerate_fraction,
    minimize_sobolev_quotient,
    ray_threshold,
    sobolev_quotient,
)
from nehari_dp.fibering import default_problem, fibering_roots
from nehari_dp.mesh import GridFunction
from nehari_dp.solver import default_starts


@pytest.fixture(scope="module")
def small():
    return default_problem(n=12)


def test_sobolev_positive_and_bounds(small):
    mesh = small.mesh
    S, umin = minimize_sobolev_quotient(mesh, 1.8, 3.0)
    assert S > 0
    rng = np.random.default_rng(0)
    for _ in range(100):
        u = GridFunction.from_interior(mesh, rng.uniform(-1, 1, mesh.interior.size))
        assert sobolev_quotient(u, 1.8, 3.0) >= S * (1 - 1e-12)


def test_sobolev_nested_refinement_1d():
    vals, u = [], None
    for n in (8, 16, 32, 64):
        mesh = build_interval_mesh(n)
        u0 = None
        if u is not None:
            # the coarse minimiser lives in the fine space unchanged
            u0 = GridFunction(mesh, np.interp(mesh.nodes[:, 0], u.mesh.nodes[:, 0], u.values))
        S, u = minimize_sobolev_quotient(mesh, 1.8, 3.0, u0)
        vals.append(S)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    assert estimate_sobolev_constant(build_interval_mesh(16), 1.8, 3.0) == pytest.approx(vals[1], rel=1e-6)


def test_ray_threshold_is_exact_boundary(small):
    u = default_probes(small.mesh, 4)[0]
    lam = ray_threshold(u, small)
    assert not fibering_roots(u, small.with_lambda(lam * (1 - 1e-9)), raise_on_degenerate=False).degenerate
    assert fibering_roots(u, small.with_lambda(lam * (1 + 1e-9)), raise_on_degenerate=False).degenerate


def test_small_lambda_never_degenerate(small):
    probes = default_probes(small.mesh)
    assert all(np.all(p.values >= 0) and not p.is_zero() for p in probes)
    assert degenerate_fraction(probes, small.with_lambda(1e-6)) == 0.0


def test_feasibility_monotone(small):
    probes = default_probes(small.mesh)
    starts = default_starts(small.mesh)
    opts = SolverOptions()
    grid = [1.0, 10.0, 30.0, 45.0, 60.0, 200.0]
    flags = [_feasible(small.with_lambda(l), probes, opts, starts)[0] for l in grid]
    assert flags[0] and not flags[-1]
    first_bad = flags.index(False)
    assert not any(flags[first_bad:])


def test_more_probes_shrink_interval(small):
    few = default_probes(small.mesh, 6)
    many = default_probes(small.mesh, 16)
    assert min(ray_threshold(u, small) for u in many) <= min(ray_threshold(u, small) for u in few)


def test_threshold_bracket(small):
    est = estimate_lambda_star(small, resolution=1e-2)
    assert 0 < est.lambda_lo < est.lambda_hi <= est.ray_bound
    assert est.lambda_hi - est.lambda_lo <= 1e-2 * est.lambda_hi
    ok = [l for l, f, _ in est.evaluations if f]
    bad = [l for l, f, _ in est.evaluations if not f]
    assert max(ok) == est.lambda_lo and min(bad) == est.lambda_hi
    assert set(est.summary()) >= {"lambda_lo", "lambda_hi", "probes_used"}


def test_threshold_no_bracket(small):
    with pytest.raises(NoBracket):
        estimate_lambda_star(small, max_halvings=1, opts=SolverOptions(max_iters=1))


def test_lower_bound_slope():
    prob = default_problem(n=4)
    lams = np.geomspace(1e-3, 10, 9)
    vals = [minus_norm_lower_bound(11.4, prob.with_lambda(l)) for l in lams]
    slopes = np.diff(np.log(vals)) / np.diff(np.log(lams))
    assert np.allclose(slopes, -1 / (prob.exps.r - prob.exps.p), atol=1e-6)


@pytest.fixture(scope="module")
def sweeps(small):
    grid = np.geomspace(0.01, 200, 5)
    return grid, lambda_sweep(small, grid), lambda_sweep(small, grid, jobs=4)


def test_sweep_rows(sweeps, small):
    grid, serial, _ = sweeps
    assert len(serial) == len(grid)
    S = estimate_sobolev_constant(small.mesh, small.exps.p, small.exps.r)
    for row in serial.rows:
        if row.status in ("ok", "not_split"):
            assert row.m_plus < 0
            bound = minus_norm_lower_bound(S, small.with_lambda(row.lam))
            assert row.minus_r_norm >= bound
    assert serial.rows[0].status == "ok" and serial.rows[0].m_minus > 0
    assert serial.rows[-1].status == "lambda_too_large"
    assert math.isnan(serial.rows[-1].m_minus)


def test_sweep_serial_matches_parallel(sweeps):
    _, a, b = sweeps
    for x, y in zip(a.rows, b.rows):
        assert repr(x.as_tuple()) == repr(y.as_tuple())


def test_sweep_rejects_unsorted(small):
    with pytest.raises(ValueError):
        lambda_sweep(small, [1.0, 0.5])
