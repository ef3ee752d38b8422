"""Randomised invariant checks shared by the ``props`` command and the tests.

Each check returns a :class:`PropertyResult`; none of them raise on a
failed property.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .fibering import (
    FiberingProfile,
    NehariClass,
    Problem,
    classify,
    default_problem,
    energy,
    fibering_roots,
    omega_d1,
    omega_d2,
    profile,
    project,
    psi,
    psi_d1,
)
from .mesh import GridFunction, build_interval_mesh, build_rect_mesh
from .orlicz import ElementField, Exponents, ScalarField, luxemburg_norm, modular
from .solver import assemble_residual, monotonicity_pairing


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"[{tag}] {self.name} ({self.elapsed:.2f}s) {info}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t = time.perf_counter()
        res = fn(*args, **kwargs)
        res.elapsed = time.perf_counter() - t
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_element_field(rng: np.random.Generator) -> tuple[ElementField, Exponents, np.ndarray]:
    m = int(rng.integers(3, 40))
    dim = int(rng.integers(1, 3))
    scale = 10 ** rng.uniform(-1, 1)
    vals = rng.normal(size=(m, dim)) * scale
    meas = rng.uniform(0.1, 1.0, size=m)
    meas /= meas.sum()
    p = rng.uniform(1.1, 3.0)
    q = p + rng.uniform(0.05, 2.0)
    exps = Exponents(p, q, 0.5, q + 1.0)
    mu = np.zeros(m) if rng.random() < 0.2 else rng.uniform(0.0, 2.0, size=m)
    return ElementField(vals, meas), exps, mu


def random_positive(prob: Problem, rng: np.random.Generator) -> GridFunction:
    return GridFunction.from_interior(prob.mesh, rng.uniform(0.0, 1.0, prob.mesh.interior.size))


@_timed
def check_modular_norm(n: int = 1000, seed: int = 0, tol: float = 1e-10) -> PropertyResult:
    """Modular/Luxemburg-norm relations (unit level, equivalence, two-sided power bounds)."""
    rng = np.random.default_rng(seed)
    worst = {"unit_level": 0.0, "bound_violation": 0.0}
    failures = 0
    for k in range(n):
        y, exps, mu = random_element_field(rng)
        if k % 10 == 0:
            # exact unit-modular case: y / |y| has modular one
            y = y / luxemburg_norm(y, exps, mu)
        nrm = luxemburg_norm(y, exps, mu)
        rho = modular(y, exps, mu)
        unit = abs(modular(y / nrm, exps, mu) - 1.0)
        worst["unit_level"] = max(worst["unit_level"], unit)
        ok = unit <= tol
        if abs(rho - 1.0) <= tol:
            ok &= abs(nrm - 1.0) <= tol
        else:
            ok &= (nrm < 1.0) == (rho < 1.0)
        slack = tol * max(1.0, rho)
        lo, hi = (nrm**exps.q, nrm**exps.p) if nrm < 1 else (nrm**exps.p, nrm**exps.q)
        viol = max(lo - rho, rho - hi, 0.0)
        worst["bound_violation"] = max(worst["bound_violation"], viol)
        ok &= viol <= slack
        failures += not ok
    return PropertyResult("modular_norm_relations", failures == 0,
                          {"samples": n, "failures": failures, **worst})


@_timed
def check_modular_sequence(seed: int = 0, levels: int = 30) -> PropertyResult:
    """``y / 2^k`` drives both norm and modular monotonically to zero."""
    rng = np.random.default_rng(seed)
    y, exps, mu = random_element_field(rng)
    norms = [luxemburg_norm(y / 2**k, exps, mu) for k in range(levels)]
    mods = [modular(y / 2**k, exps, mu) for k in range(levels)]
    ok = all(np.diff(norms) < 0) and all(np.diff(mods) < 0) and norms[-1] < 1e-6 and mods[-1] < 1e-6
    return PropertyResult("modular_null_sequence", ok, {"last_norm": norms[-1], "last_modular": mods[-1]})


@_timed
def check_fibering_identity(prob: Problem | None = None, n: int = 500, seed: int = 0,
                            tol: float = 1e-10) -> PropertyResult:
    """``omega'(t) = t^(r-1) (psi(t) - lam R)`` over random rays and scalings."""
    prob = prob or default_problem()
    rng = np.random.default_rng(seed)
    r = prob.exps.r
    worst = 0.0
    for _ in range(n):
        pr = profile(random_positive(prob, rng), prob)
        t = 10 ** rng.uniform(-2, 2)
        d1 = omega_d1(pr, prob, t)
        alt = t ** (r - 1) * (psi(pr, prob, t) - prob.lam * pr.R)
        worst = max(worst, abs(d1 - alt) / (1 + abs(d1)))
    return PropertyResult("fibering_identity", worst <= tol, {"samples": n, "worst_scaled_error": worst})


@_timed
def check_root_contract(prob: Problem | None = None, n: int = 200, seed: int = 0) -> PropertyResult:
    """Two roots of ``psi = lam R`` around the maximiser, with the right slopes and curvatures."""
    prob = prob or default_problem()
    rng = np.random.default_rng(seed)
    checked = failures = 0
    worst = 0.0
    while checked < n:
        pr = profile(random_positive(prob, rng), prob)
        roots = fibering_roots(pr, prob, raise_on_degenerate=False)
        if roots.degenerate:
            continue
        checked += 1
        level = prob.lam * pr.R
        err = max(abs(psi(pr, prob, roots.t1) - level), abs(psi(pr, prob, roots.t2) - level))
        worst = max(worst, err / max(1.0, level))
        ok = err <= 1e-10 * max(1.0, level)
        ok &= 0 < roots.t1 < roots.t0 < roots.t2
        ok &= psi_d1(pr, prob, roots.t1) > 0 > psi_d1(pr, prob, roots.t2)
        ok &= omega_d2(pr, prob, roots.t1) > 0 > omega_d2(pr, prob, roots.t2)
        failures += not ok
    return PropertyResult("root_contract", failures == 0,
                          {"directions": checked, "failures": failures, "worst_level_error": worst})


@_timed
def check_plus_negativity(prob: Problem | None = None, n: int = 100, seed: int = 0) -> PropertyResult:
    """Projections onto the plus branch carry negative energy."""
    prob = prob or default_problem(lam=0.01)
    rng = np.random.default_rng(seed)
    energies = [energy(project(random_positive(prob, rng), prob, NehariClass.PLUS), prob) for _ in range(n)]
    return PropertyResult("plus_branch_negative", max(energies) < 0,
                          {"directions": n, "max_energy": max(energies)})


def nehari_energy_forms(pr: FiberingProfile, exps: Exponents, lam: float) -> tuple[float, float]:
    """Energy rewritten by eliminating ``R`` (first) or ``B`` (second) through the Nehari balance."""
    p, q, g, r = exps.p, exps.q, exps.gamma, exps.r
    first = (1 / p - 1 / r) * pr.P + (1 / q - 1 / r) * pr.Q + (1 / r - 1 / (1 - g)) * pr.B
    second = (1 / p - 1 / (1 - g)) * pr.P + (1 / q - 1 / (1 - g)) * pr.Q + lam * (1 / (1 - g) - 1 / r) * pr.R
    return first, second


@_timed
def check_energy_identities(prob: Problem | None = None, n: int = 100, seed: int = 0,
                            tol: float = 1e-12) -> PropertyResult:
    """Both Nehari rewritings of the energy agree with the energy at projected points."""
    prob = prob or default_problem()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n):
        branch = NehariClass.PLUS if k % 2 == 0 else NehariClass.MINUS
        v = project(random_positive(prob, rng), prob, branch)
        pr = profile(v, prob)
        E = energy(pr, prob)
        for form in nehari_energy_forms(pr, prob.exps, prob.lam):
            worst = max(worst, abs(form - E) / abs(E))
    return PropertyResult("nehari_energy_identities", worst <= tol, {"points": n, "worst_rel_error": worst})


def mp_energy(values, prob: Problem, dps: int = 40):
    """Energy evaluated in ``dps``-digit arithmetic from the mesh and quadrature data."""
    with mpmath.workdps(dps):
        mpf = mpmath.mpf
        mesh, rule, e = prob.mesh, prob.rule, prob.exps
        vals = [mpf(v) for v in values]
        p, q, g, r = mpf(e.p), mpf(e.q), mpf(e.gamma), mpf(e.r)
        G = mesh.basis_gradients
        P = Q = B = R = mpf(0)
        for el in range(mesh.n_elements):
            nodes = mesh.elements[el]
            comps = [sum(vals[nodes[k]] * mpf(G[el, k, d]) for k in range(mesh.dim + 1)) for d in range(mesh.dim)]
            a = mpmath.sqrt(sum(c * c for c in comps))
            meas = mpf(mesh.measures[el])
            P += meas * a**p
            Q += meas * mpf(prob.mu_elem[el]) * a**q
        coo = rule.interp.tocoo()
        uq = [mpf(0)] * rule.weights.size
        for i, j, v in zip(coo.row, coo.col, coo.data):
            uq[i] += mpf(v) * vals[j]
        for k, w in enumerate(rule.weights):
            B += mpf(w) * mpf(prob.a_quad[k]) * abs(uq[k]) ** (1 - g)
            R += mpf(w) * abs(uq[k]) ** r
        return P / p + Q / q - B / (1 - g) - mpf(prob.lam) * R / r


def fd_errors(u: GridFunction, prob: Problem, node: int, hs=(1e-4, 1e-5, 1e-6), dps: int = 40) -> list[float]:
    """``|central difference of the energy - residual|`` at one node for each step."""
    res = assemble_residual(u, prob)[node]
    errs = []
    with mpmath.workdps(dps):
        for h in hs:
            plus = [mpmath.mpf(float(v)) for v in u.values]
            minus = list(plus)
            plus[node] += mpmath.mpf(h)
            minus[node] -= mpmath.mpf(h)
            fd = (mp_energy(plus, prob, dps) - mp_energy(minus, prob, dps)) / (2 * mpmath.mpf(h))
            errs.append(float(abs(fd - mpmath.mpf(res))))
    return errs


def _fd_problems():
    exps = Exponents(1.8, 2.2, 0.5, 3.0)
    return [
        Problem(exps, 0.7, ScalarField.affine(0.5, 1.0), ScalarField.affine(1.0, 0.5), build_interval_mesh(6)),
        Problem(exps, 0.7, ScalarField.affine(0.0, 1.0, 0.0), ScalarField.affine(1.0, 0.5, 0.0), build_rect_mesh(4, 4)),
    ]


@_timed
def check_residual_gradient(seed: int = 0, hs=(1e-4, 1e-5, 1e-6), nodes_per_mesh: int = 3) -> PropertyResult:
    """Residual equals the energy gradient: central-difference error shrinks like ``h^2``."""
    rng = np.random.default_rng(seed)
    orders = []
    for prob in _fd_problems():
        u = GridFunction.from_interior(prob.mesh, rng.uniform(0.02, 0.3, prob.mesh.interior.size))
        for node in prob.mesh.interior[:nodes_per_mesh]:
            errs = fd_errors(u, prob, int(node), hs)
            for e0, e1, h0, h1 in zip(errs, errs[1:], hs, hs[1:]):
                orders.append(math.log(e0 / e1) / math.log(h0 / h1))
    ok = all(1.8 <= o <= 2.2 for o in orders)
    return PropertyResult("residual_gradient_consistency", ok,
                          {"pairs": len(orders), "min_order": min(orders), "max_order": max(orders)})


@_timed
def check_monotone_operator(prob: Problem | None = None, n: int = 200, seed: int = 0,
                            tol: float = 1e-12) -> PropertyResult:
    """``<A(u) - A(v), u - v> >= 0`` for random pairs (some sharing gradients on part of the domain)."""
    prob = prob or default_problem()
    rng = np.random.default_rng(seed)
    mesh = prob.mesh
    worst = math.inf
    for k in range(n):
        u = GridFunction.from_interior(mesh, rng.normal(size=mesh.interior.size))
        if k % 4 == 0:
            v = u + mesh.node_function(lambda x: 1e-3 * rng.normal() * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]))
        else:
            v = GridFunction.from_interior(mesh, rng.normal(size=mesh.interior.size))
        worst = min(worst, monotonicity_pairing(u, v, prob))
    same = monotonicity_pairing(u, u, prob)
    return PropertyResult("monotone_operator", worst >= -tol and same == 0.0,
                          {"pairs": n, "min_pairing": worst})


@_timed
def check_ray_invariance(prob: Problem | None = None, n: int = 50, seed: int = 0,
                         scales=(0.5, 2.0, 10.0), tol: float = 1e-9) -> PropertyResult:
    """Projection depends only on the ray: ``project(s u) == project(u)``."""
    prob = prob or default_problem()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for branch in (NehariClass.PLUS, NehariClass.MINUS):
        for _ in range(n):
            u = random_positive(prob, rng)
            base = project(u, prob, branch).values
            for s in scales:
                worst = max(worst, float(np.max(np.abs(project(u * s, prob, branch).values - base))))
    return PropertyResult("ray_invariance", worst <= tol, {"directions": 2 * n, "max_abs_diff": worst})


@_timed
def check_projection_class(prob: Problem | None = None, n: int = 100, seed: int = 0) -> PropertyResult:
    """Projected points land on the requested branch."""
    prob = prob or default_problem(lam=0.01)
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        u = random_positive(prob, rng)
        for branch in (NehariClass.PLUS, NehariClass.MINUS):
            bad += classify(project(u, prob, branch), prob) is not branch
    return PropertyResult("projection_class", bad == 0, {"directions": n, "misclassified": bad})


ALL_CHECKS = (
    check_modular_norm,
    check_modular_sequence,
    check_fibering_identity,
    check_root_contract,
    check_plus_negativity,
    check_energy_identities,
    check_residual_gradient,
    check_monotone_operator,
    check_ray_invariance,
    check_projection_class,
)


def run_all(seed: int = 0) -> list[PropertyResult]:
    return [check(seed=seed) for check in ALL_CHECKS]
