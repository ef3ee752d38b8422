"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed outside
output capture) or directly with ``python3 tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from nehari_dp import NehariClass, estimate_lambda_star, estimate_sobolev_constant, find_two_solutions, lambda_sweep
from nehari_dp.analysis import minus_norm_lower_bound
from nehari_dp.fibering import default_problem
from nehari_dp.properties import (
    check_energy_identities,
    check_fibering_identity,
    check_modular_norm,
    check_monotone_operator,
    check_plus_negativity,
    check_ray_invariance,
    check_residual_gradient,
    check_root_contract,
)
from nehari_dp.solver import verify_weak_solution

SWEEP_GRID = np.geomspace(1e-3, 100.0, 12)


def _emit(capsys, number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return passed


@pytest.fixture(scope="module")
def prob():
    return default_problem()


@pytest.fixture(scope="module")
def threshold_and_sweep(prob):
    t0 = time.perf_counter()
    est = estimate_lambda_star(prob)
    t1 = time.perf_counter()
    table = lambda_sweep(prob, SWEEP_GRID)
    t2 = time.perf_counter()
    return est, table, t1 - t0, t2 - t1


def test_two_solutions(prob, capsys):
    t0 = time.perf_counter()
    plus, minus = find_two_solutions(prob)
    elapsed = time.perf_counter() - t0
    checks = {
        "energy_split": plus.energy < 0 < minus.energy,
        "residuals": max(plus.residual_norm, minus.residual_norm) <= 1e-6,
        "classes": plus.nehari_class is NehariClass.PLUS and minus.nehari_class is NehariClass.MINUS,
        "positive": min(plus.u.interior.min(), minus.u.interior.min()) > 0,
        "verified": all(verify_weak_solution(r.u, prob, branch=r.branch).passed for r in (plus, minus)),
        "runtime": elapsed <= 60.0,
    }
    detail = (f"E+={plus.energy:.6g} E-={minus.energy:.6g} res=({plus.residual_norm:.2e}, "
              f"{minus.residual_norm:.2e}) min u=({plus.u.interior.min():.3g}, {minus.u.interior.min():.3g}) "
              f"time={elapsed:.1f}s")
    assert _emit(capsys, 1, "two solutions with opposite energy signs", all(checks.values()), detail), checks


def _property_criterion(capsys, number, title, result, limit=None):
    passed = result.passed and (limit is None or result.elapsed <= limit)
    detail = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in result.detail.items())
    detail += f", time={result.elapsed:.2f}s"
    assert _emit(capsys, number, title, passed, detail), result.detail


def test_modular_norm_suite(capsys):
    _property_criterion(capsys, 2, "modular/norm relations on 1000 fields",
                        check_modular_norm(n=1000, tol=1e-10), limit=5.0)


def test_fibering_identity(prob, capsys):
    _property_criterion(capsys, 3, "fibering derivative identity on 500 pairs",
                        check_fibering_identity(prob, n=500, tol=1e-10))


def test_root_contract(prob, capsys):
    _property_criterion(capsys, 4, "root contract on 200 directions", check_root_contract(prob, n=200))


def test_plus_negativity(capsys):
    _property_criterion(capsys, 5, "plus-branch energy negative at lambda=0.01",
                        check_plus_negativity(default_problem(lam=0.01), n=100))


def test_energy_identities(prob, capsys):
    _property_criterion(capsys, 6, "on-manifold energy identities at 1e-12",
                        check_energy_identities(prob, n=100, tol=1e-12))


def test_residual_gradient(capsys):
    _property_criterion(capsys, 7, "residual matches energy gradient at order h^2",
                        check_residual_gradient(hs=(1e-4, 1e-5, 1e-6)))


def test_monotone_operator(prob, capsys):
    _property_criterion(capsys, 8, "operator monotone on 200 pairs", check_monotone_operator(prob, n=200, tol=1e-12))


def test_threshold_behaviour(threshold_and_sweep, capsys):
    est, table, t_est, t_sweep = threshold_and_sweep
    below = [r for r in table.rows if r.lam <= est.lambda_lo]
    checks = {
        "finite_bracket": 0 < est.lambda_lo < est.lambda_hi < math.inf,
        "rows_below": len(below) > 0,
        "minus_positive": all(r.status == "ok" and r.m_minus > 0 for r in below),
        "no_degeneracy": all(r.degenerate_fraction == 0.0 for r in below),
        "plus_negative": all(r.m_plus < 0 for r in table.rows if r.status in ("ok", "not_split")),
        "sweep_runtime": len(table) == 12 and t_sweep <= 600.0,
    }
    detail = (f"lambda* in [{est.lambda_lo:.6g}, {est.lambda_hi:.6g}], {len(below)}/12 rows below, "
              f"statuses={[r.status for r in table.rows]}, threshold {t_est:.1f}s, sweep {t_sweep:.1f}s")
    assert _emit(capsys, 9, "threshold bracket and sweep", all(checks.values()), detail), checks


def test_lower_bound_law(prob, threshold_and_sweep, capsys):
    _, table, _, _ = threshold_and_sweep
    S = estimate_sobolev_constant(prob.mesh, prob.exps.p, prob.exps.r)
    rows = [r for r in table.rows if r.minus_report is not None and r.minus_report.converged]
    ratios = [r.minus_r_norm / minus_norm_lower_bound(S, prob.with_lambda(r.lam)) for r in rows]
    passed = len(rows) > 0 and min(ratios) >= 1.0
    detail = f"S={S:.6g}, converged minus rows={len(rows)}, min norm/bound={min(ratios, default=math.nan):.4g}"
    assert _emit(capsys, 10, "minus-branch lower bound on the r-norm", passed, detail)


def test_ray_invariance(prob, capsys):
    _property_criterion(capsys, 11, "projection invariant along rays",
                        check_ray_invariance(prob, n=50, scales=(0.5, 2.0, 10.0), tol=1e-9))


if __name__ == "__main__":
    p = default_problem()
    test_two_solutions(p, None)
    test_modular_norm_suite(None)
    test_fibering_identity(p, None)
    test_root_contract(p, None)
    test_plus_negativity(None)
    test_energy_identities(p, None)
    test_residual_gradient(None)
    test_monotone_operator(p, None)
    t0 = time.perf_counter()
    est = estimate_lambda_star(p)
    t1 = time.perf_counter()
    tab = lambda_sweep(p, SWEEP_GRID)
    data = (est, tab, t1 - t0, time.perf_counter() - t1)
    test_threshold_behaviour(data, None)
    test_lower_bound_law(p, data, None)
    test_ray_invariance(p, None)
