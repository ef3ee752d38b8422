"""Double-phase modular, Luxemburg norm and Lebesgue-type norms.

All quantities are evaluated over element-wise constant vector fields
(gradients of P1 functions), so the integrals are exact sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import HypothesisViolation, NonFinite

LUX_TOL = 1e-12


@dataclass(frozen=True)
class Exponents:
    """Exponents ``p < q < r`` and singular power ``gamma``."""

    p: float
    q: float
    gamma: float
    r: float

    def __post_init__(self):
        p, q, g, r = self.p, self.q, self.gamma, self.r
        if not all(math.isfinite(v) for v in (p, q, g, r)):
            raise HypothesisViolation("finite exponents")
        if not p > 1:
            raise HypothesisViolation("1<p", f"p={p}")
        if not p < q:
            raise HypothesisViolation("p<q", f"p={p}, q={q}")
        if not 0 < g < 1:
            raise HypothesisViolation("0<γ<1", f"gamma={g}")
        if not q < r:
            raise HypothesisViolation("q<r", f"q={q}, r={r}")

    def critical(self, dim: int) -> float:
        """Sobolev exponent ``Np/(N-p)``; +inf in 1D or when ``p >= N``."""
        if dim == 1 or self.p >= dim:
            return math.inf
        return dim * self.p / (dim - self.p)

    def check_dimension(self, dim: int) -> None:
        """Raise unless the dimension-dependent inequalities hold.

        1D runs skip ``p < N`` on purpose (critical exponent taken as +inf).
        """
        if dim >= 2 and not self.p < dim:
            raise HypothesisViolation("p<N", f"p={self.p}, N={dim}")
        pstar = self.critical(dim)
        if not self.q < pstar:
            raise HypothesisViolation("q<p*", f"q={self.q}, p*={pstar}")
        if not self.r < pstar:
            raise HypothesisViolation("r<p*", f"r={self.r}, p*={pstar}")


@dataclass(frozen=True)
class ScalarField:
    """Coefficient field: ``constant``, ``affine`` or ``nodal`` table.

    ``coeffs`` is ``(c,)`` for constant, ``(c0, c1[, c2])`` for
    ``c0 + c1*x1 + c2*x2``, or the nodal value table for ``nodal``
    (linearly interpolated).
    """

    kind: str
    coeffs: tuple = field(default=(0.0,))

    def __post_init__(self):
        if self.kind not in ("constant", "affine", "nodal"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.kind == "constant" and len(self.coeffs) != 1:
            raise ValueError("constant field takes one coefficient")
        if self.kind == "affine" and not 2 <= len(self.coeffs) <= 3:
            raise ValueError("affine field takes (c0, c1) or (c0, c1, c2)")

    @classmethod
    def constant(cls, c: float) -> "ScalarField":
        return cls("constant", (c,))

    @classmethod
    def affine(cls, *coeffs: float) -> "ScalarField":
        return cls("affine", coeffs)

    @classmethod
    def nodal(cls, table: Sequence[float]) -> "ScalarField":
        return cls("nodal", tuple(table))

    def at_points(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.kind == "constant":
            return np.full(points.shape[0], self.coeffs[0])
        if self.kind == "affine":
            c = np.asarray(self.coeffs[1:])
            if c.size > points.shape[1]:
                if np.any(c[points.shape[1]:] != 0):
                    raise ValueError("affine coefficient references a missing coordinate")
                c = c[: points.shape[1]]
            return self.coeffs[0] + points[:, : c.size] @ c
        raise TypeError("nodal fields are evaluated through a quadrature rule")

    def at(self, rule) -> np.ndarray:
        """Values at the quadrature points of ``rule``."""
        if self.kind == "nodal":
            table = np.asarray(self.coeffs)
            if table.size != rule.interp.shape[1]:
                raise ValueError("nodal table does not match the mesh")
            return rule.interp @ table
        return self.at_points(rule.points)

    def element_means(self, mesh, rule) -> np.ndarray:
        """Element averages (exact for affine and nodal kinds)."""
        vals = self.at(rule)
        sums = np.bincount(rule.element, weights=rule.weights * vals, minlength=mesh.n_elements)
        return sums / mesh.measures


@dataclass(frozen=True)
class ElementField:
    """Element-wise constant vectors with their element measures."""

    values: np.ndarray
    measures: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        m = np.asarray(self.measures, dtype=float)
        if v.shape[0] != m.shape[0]:
            raise ValueError("one vector per element required")
        if np.any(m <= 0):
            raise ValueError("element measures must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "measures", m)

    def norms(self) -> np.ndarray:
        if self.values.shape[1] == 1:
            return np.abs(self.values[:, 0])
        return np.sqrt(np.einsum("ij,ij->i", self.values, self.values))

    def __truediv__(self, t: float) -> "ElementField":
        return ElementField(self.values / t, self.measures)

    def __mul__(self, t: float) -> "ElementField":
        return ElementField(self.values * t, self.measures)

    __rmul__ = __mul__


def _modular_from_norms(a: np.ndarray, meas: np.ndarray, p: float, q: float, mu) -> float:
    return float(np.sum(meas * (a**p + mu * a**q)))


def modular(g: ElementField, exps: Exponents, mu=0.0) -> float:
    """``sum meas * (|g|^p + mu |g|^q)``; ``mu`` is a scalar or per-element array."""
    return _modular_from_norms(g.norms(), g.measures, exps.p, exps.q, mu)


def luxemburg_norm(g: ElementField, exps: Exponents, mu=0.0, tol: float = LUX_TOL) -> float:
    """Unique ``tau > 0`` with ``modular(g / tau) == 1`` (0 for the zero field)."""
    a = g.norms()
    if not np.any(a):
        return 0.0
    meas, p, q = g.measures, exps.p, exps.q

    def rho(tau):
        return _modular_from_norms(a / tau, meas, p, q, mu)

    rho1 = rho(1.0)
    if not math.isfinite(rho1):
        raise NonFinite("modular overflow at the initial bracket")
    lo = min(1.0, tol)
    hi = max(1.0, rho1) + 1.0
    while rho(hi) >= 1.0:
        hi *= 2.0
        if not math.isfinite(hi):
            raise NonFinite("could not bracket the Luxemburg norm")
    # rho is strictly decreasing in tau; shrink lo until rho(lo) > 1
    while rho(lo) <= 1.0:
        lo *= 0.5
        if lo == 0.0:
            raise NonFinite("could not bracket the Luxemburg norm")
    # absolute tolerance at or above 1, relative below (tiny norms stay accurate)
    while hi - lo > tol * min(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def seminorm_q_mu(g: ElementField, q: float, mu=1.0) -> float:
    """``(sum meas * mu |g|^q)^(1/q)``."""
    return _scaled_power_norm(g.norms(), g.measures * np.broadcast_to(mu, g.measures.shape), q)


def _scaled_power_norm(a: np.ndarray, w: np.ndarray, s: float) -> float:
    """``(sum w |a|^s)^(1/s)`` without under- or overflow in the power."""
    top = float(np.max(np.abs(a), initial=0.0))
    if top == 0.0:
        return 0.0
    return top * float(np.sum(w * (np.abs(a) / top) ** s)) ** (1.0 / s)


def lp_norm(u, s: float, rule=None) -> float:
    """Lebesgue ``s``-norm of a GridFunction (quadrature) or ElementField (exact)."""
    if s < 1:
        raise ValueError("lp_norm needs s >= 1; use mesh.integrate for raw integrals")
    if isinstance(u, ElementField):
        return _scaled_power_norm(u.norms(), u.measures, s)
    rule = rule or u.mesh.default_rule
    return _scaled_power_norm(rule.interp @ u.values, rule.weights, s)
