"""Energy functional, fibering maps and Nehari projections.

Along a ray ``t -> t*u`` every term of the energy is a power of ``t``, so
the whole fibering analysis reduces to four numbers (see
:class:`FiberingProfile`). The scalar routines here accept either a grid
function or a precomputed profile.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import DegenerateDirection, HypothesisViolation
from .mesh import GridFunction, Mesh, QuadratureRule, gradient
from .orlicz import Exponents, ScalarField

ROOT_TOL = 1e-10
CLASSIFY_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class Problem:
    """Discrete singular double-phase Dirichlet problem."""

    exps: Exponents
    lam: float
    mu: ScalarField
    a: ScalarField
    mesh: Mesh
    rule: QuadratureRule = field(default=None)

    def __post_init__(self):
        if self.rule is None:
            object.__setattr__(self, "rule", self.mesh.default_rule)
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise HypothesisViolation("λ>0", f"lambda={self.lam}")
        self.exps.check_dimension(self.mesh.dim)
        if np.any(self.mu_quad < 0):
            raise HypothesisViolation("μ≥0", "mu takes negative values")
        if np.any(self.a_quad <= 0):
            raise HypothesisViolation("a>0", "a is not strictly positive")

    @cached_property
    def mu_quad(self) -> np.ndarray:
        return self.mu.at(self.rule)

    @cached_property
    def mu_elem(self) -> np.ndarray:
        return self.mu.element_means(self.mesh, self.rule)

    @cached_property
    def a_quad(self) -> np.ndarray:
        return self.a.at(self.rule)

    def with_lambda(self, lam: float) -> "Problem":
        return replace(self, lam=float(lam))


@dataclass(frozen=True)
class FiberingProfile:
    """``P = |grad u|_p^p``, ``Q = |grad u|_{q,mu}^q``, ``B = int a|u|^(1-g)``, ``R = |u|_r^r``."""

    P: float
    Q: float
    B: float
    R: float

    def scaled(self, t: float, exps: Exponents) -> "FiberingProfile":
        return FiberingProfile(
            t**exps.p * self.P,
            t**exps.q * self.Q,
            t ** (1 - exps.gamma) * self.B,
            t**exps.r * self.R,
        )


class NehariClass(enum.Enum):
    PLUS = "plus"
    ZERO = "zero"
    MINUS = "minus"
    OFF = "off"


@dataclass(frozen=True)
class FiberingRoots:
    t1: float
    t0: float
    t2: float
    degenerate: bool = False
    psi_max: float = math.nan
    level: float = math.nan  # lambda * R


def profile(u: GridFunction, prob: Problem) -> FiberingProfile:
    e = prob.exps
    a = gradient(u).norms()
    meas = prob.mesh.measures
    P = float(np.sum(meas * a**e.p))
    Q = float(np.sum(meas * prob.mu_elem * a**e.q))
    uq = np.abs(prob.rule.interp @ u.values)
    w = prob.rule.weights
    B = float(np.sum(w * prob.a_quad * uq ** (1 - e.gamma)))
    R = float(np.sum(w * uq**e.r))
    return FiberingProfile(P, Q, B, R)


def _prof(u, prob) -> FiberingProfile:
    return u if isinstance(u, FiberingProfile) else profile(u, prob)


def energy_from_profile(pr: FiberingProfile, exps: Exponents, lam: float) -> float:
    return pr.P / exps.p + pr.Q / exps.q - pr.B / (1 - exps.gamma) - lam * pr.R / exps.r


def energy(u, prob: Problem) -> float:
    """Discrete energy ``P/p + Q/q - B/(1-gamma) - lam R/r``."""
    return energy_from_profile(_prof(u, prob), prob.exps, prob.lam)


def omega(u, prob, t: float) -> float:
    """``t -> energy(t u)``."""
    e, pr, lam = prob.exps, _prof(u, prob), prob.lam
    return (t**e.p * pr.P / e.p + t**e.q * pr.Q / e.q
            - t ** (1 - e.gamma) * pr.B / (1 - e.gamma) - lam * t**e.r * pr.R / e.r)


def omega_d1(u, prob, t: float) -> float:
    e, pr, lam = prob.exps, _prof(u, prob), prob.lam
    return (t ** (e.p - 1) * pr.P + t ** (e.q - 1) * pr.Q
            - t ** (-e.gamma) * pr.B - lam * t ** (e.r - 1) * pr.R)


def omega_d2(u, prob, t: float) -> float:
    e, pr, lam = prob.exps, _prof(u, prob), prob.lam
    return ((e.p - 1) * t ** (e.p - 2) * pr.P + (e.q - 1) * t ** (e.q - 2) * pr.Q
            + e.gamma * t ** (-e.gamma - 1) * pr.B - lam * (e.r - 1) * t ** (e.r - 2) * pr.R)


def psi(u, prob, t: float) -> float:
    e, pr = prob.exps, _prof(u, prob)
    return t ** (e.p - e.r) * pr.P + t ** (e.q - e.r) * pr.Q - t ** (1 - e.gamma - e.r) * pr.B


def psi_d1(u, prob, t: float) -> float:
    e, pr = prob.exps, _prof(u, prob)
    return ((e.p - e.r) * t ** (e.p - e.r - 1) * pr.P + (e.q - e.r) * t ** (e.q - e.r - 1) * pr.Q
            + (e.r + e.gamma - 1) * t ** (-e.r - e.gamma) * pr.B)


def psi_hat(u, prob, t: float) -> float:
    """``psi`` without the ``Q`` term."""
    e, pr = prob.exps, _prof(u, prob)
    return t ** (e.p - e.r) * pr.P - t ** (1 - e.gamma - e.r) * pr.B


def t_hat0(u, prob) -> tuple[float, float]:
    """Closed-form maximizer of ``psi_hat`` and the maximum value."""
    e, pr = prob.exps, _prof(u, prob)
    if not (pr.P > 0 and pr.B > 0):
        raise DegenerateDirection("psi_hat has no interior maximum when P or B vanishes")
    p, g, r = e.p, e.gamma, e.r
    k = p + g - 1
    t = ((r + g - 1) * pr.B / ((r - p) * pr.P)) ** (1 / k)
    value = (k / (r - p) * ((r - p) / (r + g - 1)) ** ((r + g - 1) / k)
             * pr.P ** ((r + g - 1) / k) / pr.B ** ((r - p) / k))
    return t, value


def _bisect(f, lo: float, hi: float) -> float:
    """Sign-change bisection run to floating-point resolution; ``f(lo) > 0 > f(hi)`` or reverse."""
    flo = f(lo)
    best, fbest = lo, abs(flo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= min(lo, hi) or mid >= max(lo, hi):
            break
        fm = f(mid)
        if abs(fm) < fbest:
            best, fbest = mid, abs(fm)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    fhi = abs(f(hi))
    return hi if fhi < fbest else best


def psi_argmax(u, prob) -> float:
    """Unique maximizer of ``psi`` (root of its derivative)."""
    e, pr = prob.exps, _prof(u, prob)
    th, _ = t_hat0(pr, prob)
    p, q, g, r = e.p, e.q, e.gamma, e.r

    # t^(r+g) * psi'(t): strictly decreasing from +((r+g-1)B) to -inf
    def slope(t):
        return (r + g - 1) * pr.B - (r - p) * pr.P * t ** (p + g - 1) - (r - q) * pr.Q * t ** (q + g - 1)

    lo, hi = th / 8, 8 * th
    while slope(lo) <= 0:
        lo /= 2
    while slope(hi) >= 0:
        hi *= 2
    return _bisect(slope, lo, hi)


def fibering_roots(u, prob, *, raise_on_degenerate: bool = True) -> FiberingRoots:
    """Solve ``psi(t) = lam R`` for ``t1 < t0 < t2``.

    Raises :class:`DegenerateDirection` when ``max psi <= lam R``; with
    ``raise_on_degenerate=False`` a degenerate record is returned instead.
    """
    pr = _prof(u, prob)
    if not (pr.P > 0 and pr.B > 0 and pr.R > 0):
        raise DegenerateDirection("zero direction has no fibering roots")
    level = prob.lam * pr.R
    t0 = psi_argmax(pr, prob)
    pmax = psi(pr, prob, t0)
    scale = t0 ** (prob.exps.p - prob.exps.r) * pr.P + t0 ** (prob.exps.q - prob.exps.r) * pr.Q
    if pmax - level <= 1e-14 * max(scale, level):
        if raise_on_degenerate:
            raise DegenerateDirection(
                f"max psi = {pmax:.6g} <= lambda*R = {level:.6g}: parameter too large along this ray")
        return FiberingRoots(math.nan, t0, math.nan, True, pmax, level)

    def gap(t):
        return psi(pr, prob, t) - level

    lo = t0 / 2
    while gap(lo) >= 0:
        lo /= 2
    hi = t0 * 2
    while gap(hi) >= 0:
        hi *= 2
    t1 = _bisect(gap, t0, lo)
    t2 = _bisect(gap, t0, hi)
    return FiberingRoots(t1, t0, t2, False, pmax, level)


def classify(u, prob, tol_N: float | None = None) -> NehariClass:
    """Nehari class of ``u`` from the sign of ``omega_u''(1)``."""
    e, pr, lam = prob.exps, _prof(u, prob), prob.lam
    lhs, rhs = pr.P + pr.Q, pr.B + lam * pr.R
    tol = CLASSIFY_RTOL * max(lhs, rhs) if tol_N is None else tol_N
    if abs(lhs - rhs) > tol:
        return NehariClass.OFF
    g = e.gamma
    second = (e.p + g - 1) * pr.P + (e.q + g - 1) * pr.Q - lam * (e.r + g - 1) * pr.R
    if second > tol:
        return NehariClass.PLUS
    if second < -tol:
        return NehariClass.MINUS
    return NehariClass.ZERO


def _branch(branch) -> NehariClass:
    b = NehariClass(branch) if not isinstance(branch, NehariClass) else branch
    if b not in (NehariClass.PLUS, NehariClass.MINUS):
        raise ValueError(f"projection branch must be plus or minus, got {b}")
    return b


def projection_scale(u, prob, branch) -> float:
    roots = fibering_roots(u, prob)
    return roots.t1 if _branch(branch) is NehariClass.PLUS else roots.t2


def project(u: GridFunction, prob: Problem, branch) -> GridFunction:
    """Rescale ``u`` onto the requested Nehari branch (``t1 u`` or ``t2 u``)."""
    return u * projection_scale(u, prob, branch)


def default_problem(lam: float = 0.05, n: int = 32) -> Problem:
    """Unit square, ``p=1.8, q=2.2, gamma=0.5, r=3``, ``mu(x) = x1``, ``a = 1``."""
    from .mesh import build_rect_mesh

    return Problem(
        exps=Exponents(1.8, 2.2, 0.5, 3.0),
        lam=lam,
        mu=ScalarField.affine(0.0, 1.0, 0.0),
        a=ScalarField.constant(1.0),
        mesh=build_rect_mesh(n, n),
    )
