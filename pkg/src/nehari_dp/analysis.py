"""Parameter thresholds, embedding constants and lambda sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LambdaTooLarge, MaxIters, NoBracket, NotSplit
from .fibering import NehariClass, Problem, fibering_roots, profile, psi_argmax, psi
from .mesh import GridFunction, Mesh, gradient
from .solver import SolverOptions, _best_on_branch, default_starts, find_two_solutions


def default_probes(mesh: Mesh, n: int = 16, seed: int = 0) -> list[GridFunction]:
    """Coordinate bumps, low-frequency sine products, then random positive fields."""
    x = mesh.nodes
    sines = []
    for kx, ky in [(1, 1), (1, 2), (2, 1), (2, 2)]:
        if mesh.dim == 1:
            f = np.abs(np.sin(kx * np.pi * x[:, 0])) * (np.sin(np.pi * x[:, 0]) ** (ky - 1))
        else:
            f = np.abs(np.sin(kx * np.pi * x[:, 0]) * np.sin(ky * np.pi * x[:, 1]))
        sines.append(f)
    interior = mesh.interior
    # bumps at a spread of interior nodes, each supported on its hat
    picks = interior[np.linspace(0, interior.size - 1, 6).round().astype(int)]
    bumps = []
    for i in picks:
        r2 = np.sum((x - x[i]) ** 2, axis=1)
        env = np.prod(np.sin(np.pi * x), axis=1)
        bumps.append(env * np.exp(-r2 / 0.02))
    rng = np.random.default_rng(seed)
    env = np.prod(np.sin(np.pi * x), axis=1)
    shapes = sines + bumps
    while len(shapes) < n:
        shapes.append(env * rng.uniform(0.1, 1.0, size=mesh.n_nodes))
    return [mesh.node_function(lambda _x, f=f: f) for f in shapes[:n]]


def ray_threshold(u, prob: Problem) -> float:
    """Largest parameter at which the ray through ``u`` still meets the Nehari set.

    ``max psi_u`` does not depend on the parameter, so this is
    ``max psi_u / |u|_r^r`` in closed form.
    """
    pr = profile(u, prob) if isinstance(u, GridFunction) else u
    t0 = psi_argmax(pr, prob)
    return psi(pr, prob, t0) / pr.R


def degenerate_fraction(probes, prob: Problem) -> float:
    flags = [fibering_roots(u, prob, raise_on_degenerate=False).degenerate for u in probes]
    return float(np.mean(flags))


@dataclass(frozen=True)
class ThresholdEstimate:
    lambda_lo: float
    lambda_hi: float
    probes_used: int
    ray_bound: float  # min over probes of the closed-form ray threshold
    evaluations: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "lambda_lo": self.lambda_lo,
            "lambda_hi": self.lambda_hi,
            "probes_used": self.probes_used,
            "ray_bound": self.ray_bound,
            "note": "empirical bracket from a finite probe family (upper estimate of the true threshold)",
            "evaluations": [list(e) for e in self.evaluations],
        }


def _feasible(prob: Problem, probes, opts: SolverOptions, starts) -> tuple[bool, float]:
    if degenerate_fraction(probes, prob) > 0:
        return False, math.nan
    try:
        rep = _best_on_branch(starts, NehariClass.MINUS, prob, opts)
    except (LambdaTooLarge, MaxIters):
        return False, math.nan
    return rep.energy > 0, rep.energy


def estimate_lambda_star(prob: Problem, probes=None, resolution: float = 1e-3,
                         opts: SolverOptions = SolverOptions(), starts=None,
                         max_halvings: int = 30) -> ThresholdEstimate:
    """Bracket the largest parameter with non-degenerate probes and positive minus energy.

    ``prob`` fixes everything but the parameter. ``resolution`` is relative
    to ``lambda_hi``.
    """
    if probes is None:
        probes = default_probes(prob.mesh, seed=opts.seed)
    if starts is None:
        starts = default_starts(prob.mesh, opts.n_starts, opts.seed)
    for u in probes:
        if u.is_zero() or np.any(u.values < 0):
            raise ValueError("probes must be nonzero and nonnegative")
    ray = min(ray_threshold(u, prob) for u in probes)
    evals = []
    hi = ray  # degenerate by construction
    lo = ray / 2
    for _ in range(max_halvings):
        ok, e = _feasible(prob.with_lambda(lo), probes, opts, starts)
        evals.append((lo, ok, e))
        if ok:
            break
        hi, lo = lo, lo / 2
    else:
        raise NoBracket(f"no feasible parameter found down to {lo:.3g}")
    while hi - lo > resolution * hi:
        mid = 0.5 * (lo + hi)
        ok, e = _feasible(prob.with_lambda(mid), probes, opts, starts)
        evals.append((mid, ok, e))
        if ok:
            lo = mid
        else:
            hi = mid
    return ThresholdEstimate(lo, hi, len(probes), ray, sorted(evals))


def _p_stiffness(u: GridFunction, p: float) -> sp.csc_matrix:
    mesh = u.mesh
    a = gradient(u).norms()
    a = np.maximum(a, 1e-3 * a.max())
    W = sp.diags(np.repeat(a ** (p - 2) * mesh.measures, mesh.dim))
    D = mesh.gradient_operator
    idx = mesh.interior
    return (D.T @ W @ D).tocsc()[idx][:, idx]


def sobolev_quotient(u: GridFunction, p: float, s: float, rule=None) -> float:
    """``|grad u|_p^p / |u|_s^p`` with the mesh's quadrature for the denominator."""
    rule = rule or u.mesh.default_rule
    P = float(np.sum(u.mesh.measures * gradient(u).norms() ** p))
    N = float(np.sum(rule.weights * np.abs(rule.interp @ u.values) ** s))
    return P / N ** (p / s)


def minimize_sobolev_quotient(mesh: Mesh, p: float, s_target: float, u0: GridFunction | None = None,
                              max_iters: int = 2000, rtol: float = 1e-12) -> tuple[float, GridFunction]:
    """Normalised projected descent for the discrete embedding quotient.

    Returns the smallest quotient found and its (s-normalised, nonnegative)
    minimiser.
    """
    rule = mesh.default_rule
    idx = mesh.interior
    D, interp, w = mesh.gradient_operator, rule.interp, rule.weights
    if u0 is None:
        u0 = mesh.node_function(lambda x: np.prod(np.sin(np.pi * x), axis=1))

    def normalise(x):
        v = GridFunction.from_interior(mesh, np.abs(x))
        n = float(np.sum(w * np.abs(interp @ v.values) ** s_target)) ** (1 / s_target)
        return v / n

    u = normalise(u0.interior)
    J = sobolev_quotient(u, p, s_target, rule)
    step = 1.0
    stalls = 0
    for _ in range(max_iters):
        g = gradient(u)
        a = g.norms()
        safe = np.where(a > 0, a, 1.0)
        flux = g.values * np.where(a > 0, safe ** (p - 2), 0.0)[:, None] * mesh.measures[:, None]
        dP = p * (D.T @ flux.ravel())
        uq = np.abs(interp @ u.values)
        dN = s_target * (interp.T @ (w * uq ** (s_target - 1)))
        # on the unit sphere N = 1 and J = P
        grad = (dP - (p / s_target) * J * dN)[idx]
        d = -spla.spsolve(_p_stiffness(u, p), grad)
        s = min(2 * step, 1.0)
        accepted = False
        while s > 1e-14:
            cand = normalise(u.interior + s * d)
            Jc = sobolev_quotient(cand, p, s_target, rule)
            if Jc < J:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        dJ = J - Jc
        u, J, step = cand, Jc, s
        stalls = stalls + 1 if dJ <= rtol * J else 0
        if stalls >= 3:
            break
    return J, u


def estimate_sobolev_constant(mesh: Mesh, p: float, s_target: float, u0: GridFunction | None = None) -> float:
    """Discrete infimum of ``|grad u|_p^p / |u|_s^p`` over the P1 space.

    The value found is an upper bound for the discrete infimum; the constant
    ``c`` with ``c^p |u|_s^p <= |grad u|_p^p`` is its ``p``-th root.
    """
    return minimize_sobolev_quotient(mesh, p, s_target, u0)[0]


def minus_norm_lower_bound(S: float, prob: Problem) -> float:
    """Lower bound on ``|v|_r`` over the minus branch given ``S |u|_r^p <= |grad u|_p^p``."""
    e = prob.exps
    g = e.gamma
    return (S * (e.p + g - 1) / (prob.lam * (e.r + g - 1))) ** (1 / (e.r - e.p))


SWEEP_HEADER = ("lambda", "m_plus", "m_minus", "degenerate_fraction",
                "residual_plus", "residual_minus", "status")


@dataclass
class SweepRow:
    lam: float
    m_plus: float
    m_minus: float
    degenerate_fraction: float
    residual_plus: float
    residual_minus: float
    status: str
    minus_r_norm: float = math.nan
    plus_report: object = field(default=None, repr=False)
    minus_report: object = field(default=None, repr=False)

    def as_tuple(self):
        return (self.lam, self.m_plus, self.m_minus, self.degenerate_fraction,
                self.residual_plus, self.residual_minus, self.status)


@dataclass
class SweepTable:
    rows: list

    def __post_init__(self):
        lams = [r.lam for r in self.rows]
        if lams != sorted(lams):
            raise ValueError("sweep rows must be sorted by lambda")

    def __len__(self):
        return len(self.rows)


def _sweep_row(prob: Problem, lam: float, opts: SolverOptions, probes, starts) -> SweepRow:
    pl = prob.with_lambda(lam)
    frac = degenerate_fraction(probes, pl)
    nan = math.nan
    try:
        plus, minus = find_two_solutions(pl, opts, starts)
        status = "ok"
    except NotSplit as exc:
        plus, minus = exc.reports
        status = "not_split"
    except LambdaTooLarge:
        return SweepRow(lam, nan, nan, frac, nan, nan, "lambda_too_large")
    except MaxIters:
        return SweepRow(lam, nan, nan, frac, nan, nan, "max_iters")
    r_norm = profile(minus.u, pl).R ** (1 / pl.exps.r)
    return SweepRow(lam, plus.energy, minus.energy, frac, plus.residual_norm,
                    minus.residual_norm, status, r_norm, plus, minus)


def lambda_sweep(prob: Problem, lambda_grid, opts: SolverOptions = SolverOptions(),
                 probes=None, starts=None, jobs: int = 1) -> SweepTable:
    """Solve both branches at every grid value; failures are recorded per row."""
    grid = [float(v) for v in lambda_grid]
    if grid != sorted(grid):
        raise ValueError("lambda grid must be sorted ascending")
    if probes is None:
        probes = default_probes(prob.mesh, seed=opts.seed)
    if starts is None:
        starts = default_starts(prob.mesh, opts.n_starts, opts.seed)

    def run(lam):
        return _sweep_row(prob, lam, opts, probes, starts)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, grid))
    else:
        rows = [run(lam) for lam in grid]
    return SweepTable(rows)
