"""Projected descent on the Nehari branches and weak-form verification."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateDirection, LambdaTooLarge, MaxIters, NotSplit
from .fibering import (
    NehariClass,
    Problem,
    _branch,
    classify,
    energy,
    fibering_roots,
    projection_scale,
)
from .mesh import GridFunction, gradient


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 3000
    tol_energy: float = 1e-15
    tol_residual: float = 1e-6
    eps_singular: float | None = None
    step_init: float = 1.0
    step_shrink: float = 0.5
    seed: int = 0
    n_starts: int = 8
    jobs: int = 1

    def __post_init__(self):
        if not (self.tol_energy > 0 and self.tol_residual > 0):
            raise ValueError("tolerances must be positive")
        if self.eps_singular is not None and self.eps_singular < 0:
            raise ValueError("eps_singular must be nonnegative")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.step_init <= 0 or self.max_iters < 1 or self.n_starts < 1 or self.jobs < 1:
            raise ValueError("step_init, max_iters, n_starts and jobs must be positive")


def _flux_coeff(a: np.ndarray, prob: Problem) -> np.ndarray:
    """``|g|^(p-2) + mu |g|^(q-2)`` with the zero-gradient value set to 0 (flux vanishes there)."""
    e = prob.exps
    safe = np.where(a > 0, a, 1.0)
    c = safe ** (e.p - 2) + prob.mu_elem * safe ** (e.q - 2)
    return np.where(a > 0, c, 0.0)


def operator_A(u: GridFunction, prob: Problem) -> np.ndarray:
    """Nodal vector ``<A(u), phi_i>`` for every hat function (boundary rows included)."""
    mesh = prob.mesh
    g = gradient(u)
    flux = g.values * (_flux_coeff(g.norms(), prob) * mesh.measures)[:, None]
    return mesh.gradient_operator.T @ flux.ravel()


def monotonicity_pairing(u: GridFunction, v: GridFunction, prob: Problem) -> float:
    """``<A(u) - A(v), u - v>`` computed element by element."""
    gu, gv = gradient(u), gradient(v)
    fu = gu.values * _flux_coeff(gu.norms(), prob)[:, None]
    fv = gv.values * _flux_coeff(gv.norms(), prob)[:, None]
    terms = np.einsum("ij,ij->i", fu - fv, gu.values - gv.values)
    return float(np.sum(prob.mesh.measures * terms))


def assemble_residual(u: GridFunction, prob: Problem, eps: float = 0.0) -> np.ndarray:
    """Discrete weak-form residual, one entry per node (boundary entries 0).

    Entry ``i`` is ``<A(u), phi_i> - int a (u+ + eps)^(-gamma) phi_i - lam int (u+)^(r-1) phi_i``.
    With ``eps = 0`` this is the exact gradient of :func:`energy` at
    strictly positive ``u``.
    """
    e, rule = prob.exps, prob.rule
    uq = np.maximum(rule.interp @ u.values, 0.0)
    live = rule.touches_interior
    with np.errstate(divide="ignore"):
        sing = np.where(live, prob.a_quad * (uq + eps) ** (-e.gamma), 0.0)
    load = rule.weights * (sing + prob.lam * uq ** (e.r - 1))
    res = operator_A(u, prob) - rule.interp.T @ load
    res[prob.mesh.boundary] = 0.0
    return res


def _stiffness(u: GridFunction, prob: Problem) -> sp.csc_matrix:
    """Linearised diffusion matrix on interior nodes (frozen flux coefficient)."""
    mesh = prob.mesh
    a = gradient(u).norms()
    floor = 1e-3 * max(float(np.max(a)), 1e-300)
    coeff = _flux_coeff(np.maximum(a, floor), prob) * mesh.measures
    D = mesh.gradient_operator
    W = sp.diags(np.repeat(coeff, mesh.dim))
    K = (D.T @ W @ D).tocsc()
    idx = mesh.interior
    return K[idx][:, idx]


@dataclass
class SolveReport:
    branch: NehariClass
    u: GridFunction
    energy: float
    nehari_class: NehariClass
    residual_norm: float
    iterations: int
    degenerate_hits: int
    wall_time: float
    converged: bool
    energy_trace: list = field(default_factory=list, repr=False)
    start_index: int = -1

    def summary(self) -> dict:
        u = self.u.interior
        return {
            "branch": self.branch.value,
            "energy": self.energy,
            "class": self.nehari_class.value,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "degenerate_hits": self.degenerate_hits,
            "wall_time": self.wall_time,
            "converged": self.converged,
            "start_index": self.start_index,
            "u_min_interior": float(u.min()),
            "u_max": float(u.max()),
        }


def residual_norm(u: GridFunction, prob: Problem, eps: float = 0.0) -> float:
    return float(np.max(np.abs(assemble_residual(u, prob, eps)[prob.mesh.interior])))


def _default_eps(u: GridFunction) -> float:
    x = u.interior
    return 1e-10 * float(np.mean(np.abs(x)))


def descend_on_branch(u0: GridFunction, branch, prob: Problem,
                      opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Minimise the energy over one Nehari branch by projected descent.

    A run that stalls at rounding noise returns with ``converged=False``;
    only an exhausted iteration budget raises :class:`MaxIters`.
    """
    branch = _branch(branch)
    t_start = time.perf_counter()
    mesh = prob.mesh
    idx = mesh.interior
    u = abs(u0)
    if u.is_zero():
        raise ValueError("initial guess must be nonzero")
    u = u * projection_scale(u, prob, branch)
    E = energy(u, prob)
    trace = [E]
    degenerate_hits = 0
    step = opts.step_init
    polishing = False
    rn = math.inf
    it = 0
    for it in range(1, opts.max_iters + 1):
        if np.min(u.interior) > 0:
            rn = residual_norm(u, prob)
            if rn <= opts.tol_residual:
                break
        eps = _default_eps(u) if opts.eps_singular is None else opts.eps_singular
        res = assemble_residual(u, prob, eps)[idx]
        d = -spla.spsolve(_stiffness(u, prob), res)
        # energy differences below this are rounding noise
        noise = 64 * np.finfo(float).eps * max(abs(E), 1.0)
        s = opts.step_init if polishing else min(2.0 * step, opts.step_init)
        trial = None
        feasible_seen = False
        while s > 1e-12:
            cand = GridFunction.from_interior(mesh, np.abs(u.interior + s * d))
            try:
                cand = cand * projection_scale(cand, prob, branch)
            except DegenerateDirection:
                degenerate_hits += 1
                s *= opts.step_shrink
                continue
            feasible_seen = True
            Ec = energy(cand, prob)
            if not polishing and Ec < E:
                trial = cand
                break
            if polishing and Ec <= E + noise and np.min(cand.interior) > 0 \
                    and residual_norm(cand, prob) < rn:
                trial = cand
                break
            s *= opts.step_shrink
        if trial is None:
            if not feasible_seen:
                raise DegenerateDirection(f"every trial step left the {branch.value} branch at iteration {it}")
            if polishing:
                break
            polishing = True
            continue
        dE = E - Ec
        u, E, step = trial, Ec, s
        trace.append(E)
        if not polishing and dE <= max(opts.tol_energy * max(1.0, abs(E)), noise):
            polishing = True
    else:
        report = _report(branch, u, E, prob, opts, it, degenerate_hits, t_start, trace)
        if not report.converged:
            raise MaxIters(f"no convergence in {opts.max_iters} iterations", report)
        return report
    return _report(branch, u, E, prob, opts, it, degenerate_hits, t_start, trace)


def _report(branch, u, E, prob, opts, it, degenerate_hits, t_start, trace) -> SolveReport:
    rn = residual_norm(u, prob) if np.min(u.interior) > 0 else math.inf
    return SolveReport(
        branch=branch,
        u=u,
        energy=E,
        nehari_class=classify(u, prob),
        residual_norm=rn,
        iterations=it,
        degenerate_hits=degenerate_hits,
        wall_time=time.perf_counter() - t_start,
        converged=rn <= opts.tol_residual,
        energy_trace=trace,
    )


@dataclass
class VerificationReport:
    residual_norm: float
    energy: float
    energy_sign: int
    classification: NehariClass
    positivity_min: float
    checks: dict
    passed: bool

    def summary(self) -> dict:
        return {
            "residual_norm": self.residual_norm,
            "energy": self.energy,
            "energy_sign": self.energy_sign,
            "classification": self.classification.value,
            "positivity_min": self.positivity_min,
            "checks": dict(self.checks),
            "pass": self.passed,
        }


def verify_weak_solution(u: GridFunction, prob: Problem, tol_residual: float = 1e-6,
                         branch=None) -> VerificationReport:
    """Re-check a candidate solution with the unregularised residual.

    Checks interior positivity, the weak-form residual, that ``u`` sits on
    the Nehari manifold, and (when ``branch`` is given) the class and the
    expected energy sign: negative on the plus branch, positive on minus.
    """
    umin = float(np.min(u.interior))
    rn = residual_norm(u, prob) if umin > 0 else math.inf
    cls = classify(u, prob)
    E = energy(u, prob)
    checks = {
        "positive": umin > 0,
        "residual": rn <= tol_residual,
        "on_manifold": cls is not NehariClass.OFF,
    }
    if branch is not None:
        b = _branch(branch)
        checks["class"] = cls is b
        checks["energy_sign"] = E < 0 if b is NehariClass.PLUS else E > 0
    return VerificationReport(
        residual_norm=rn,
        energy=E,
        energy_sign=int(np.sign(E)),
        classification=cls,
        positivity_min=umin,
        checks=checks,
        passed=all(checks.values()),
    )


def default_starts(mesh, n_starts: int = 8, seed: int = 0) -> list[GridFunction]:
    """Positive initial guesses: sine bumps, off-centre bumps, then random fields.

    Random fields are smooth-envelope times uniform noise, drawn from ``seed``.
    """
    x = mesh.nodes
    if mesh.dim == 1:
        env = np.sin(np.pi * x[:, 0])
    else:
        env = np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
    centres = [(0.3, 0.3), (0.7, 0.7), (0.3, 0.7), (0.7, 0.3)]
    shapes = [env, env**2]
    for c in centres:
        r2 = np.sum((x - np.asarray(c)[: mesh.dim]) ** 2, axis=1)
        shapes.append(env * np.exp(-r2 / 0.05))
    rng = np.random.default_rng(seed)
    starts = [mesh.node_function(lambda _x, f=f: f) for f in shapes[:n_starts]]
    while len(starts) < n_starts:
        noise = rng.uniform(0.2, 1.0, size=mesh.n_nodes)
        starts.append(mesh.node_function(lambda _x, f=env * noise: f))
    return starts


def _best_on_branch(starts, branch, prob, opts) -> SolveReport:
    branch = _branch(branch)

    def run(k):
        try:
            rep = descend_on_branch(starts[k], branch, prob, opts)
        except DegenerateDirection:
            return None
        except MaxIters as exc:
            rep = exc.report
        rep.start_index = k
        return rep

    if opts.jobs > 1:
        with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
            reports = list(pool.map(run, range(len(starts))))
    else:
        reports = [run(k) for k in range(len(starts))]
    reports = [r for r in reports if r is not None]
    if not reports:
        raise LambdaTooLarge(f"every start is degenerate on the {branch.value} branch at lambda={prob.lam}")
    good = [r for r in reports if r.converged and r.nehari_class is branch]
    pool = good or reports
    best = min(pool, key=lambda r: (r.energy, r.start_index))
    if not good:
        raise MaxIters(f"no start converged on the {branch.value} branch", best)
    return best


def find_two_solutions(prob: Problem, opts: SolverOptions = SolverOptions(),
                       starts: list[GridFunction] | None = None) -> tuple[SolveReport, SolveReport]:
    """Minimise on both branches from a multi-start set; returns ``(plus, minus)``.

    Raises :class:`LambdaTooLarge` when every start is degenerate and
    :class:`NotSplit` when the energies fail ``E(u*) < 0 < E(v*)``.
    """
    if starts is None:
        starts = default_starts(prob.mesh, opts.n_starts, opts.seed)
    if all(fibering_roots(s, prob, raise_on_degenerate=False).degenerate for s in starts):
        raise LambdaTooLarge(f"all {len(starts)} probes are degenerate at lambda={prob.lam}")
    plus = _best_on_branch(starts, NehariClass.PLUS, prob, opts)
    minus = _best_on_branch(starts, NehariClass.MINUS, prob, opts)
    if not plus.energy < 0 < minus.energy:
        raise NotSplit(
            f"energies {plus.energy:.6g} (plus) and {minus.energy:.6g} (minus) do not straddle 0",
            (plus, minus),
        )
    return plus, minus
