"""P1 meshes on (0,1) and the unit square, grid functions and quadrature.

Elements are simplices (segments or triangles). A piecewise-linear
function is stored by its nodal values; boundary values are pinned to
zero so every :class:`GridFunction` lives in the discrete analogue of
``W_0^{1,H}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import BadSize


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh.

    Attributes
    ----------
    dim : int
        Space dimension, 1 or 2.
    nodes : (n_nodes, dim) array
    elements : (n_elem, dim + 1) int array
    measures : (n_elem,) array of element lengths/areas.
    boundary : (n_nodes,) bool mask of Dirichlet nodes.
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    measures: np.ndarray
    boundary: np.ndarray

    def __post_init__(self):
        for arr in (self.nodes, self.elements, self.measures, self.boundary):
            arr.setflags(write=False)
        if np.any(self.measures <= 0):
            raise ValueError("element measures must be positive")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @cached_property
    def interior(self) -> np.ndarray:
        """Indices of the free (interior) nodes."""
        return np.flatnonzero(~self.boundary)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """(n_elem, dim+1, dim) gradients of the local hat functions."""
        verts = self.nodes[self.elements]  # (m, d+1, d)
        if self.dim == 1:
            h = verts[:, 1, 0] - verts[:, 0, 0]
            g = np.empty((self.n_elements, 2, 1))
            g[:, 0, 0] = -1.0 / h
            g[:, 1, 0] = 1.0 / h
            return g
        # rows of inv(J)^T applied to reference gradients
        e1 = verts[:, 1] - verts[:, 0]
        e2 = verts[:, 2] - verts[:, 0]
        jac = np.stack([e1, e2], axis=2)  # columns are edges
        inv = np.linalg.inv(jac)
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return np.einsum("kj,mji->mki", ref, inv)

    @cached_property
    def gradient_operator(self) -> sp.csr_matrix:
        """Sparse map from nodal values to stacked element gradients.

        Row ``e * dim + k`` gives component ``k`` of the gradient on element ``e``.
        """
        m, d = self.n_elements, self.dim
        rows = (np.arange(m)[:, None, None] * d + np.arange(d)[None, None, :])
        rows = np.broadcast_to(rows, (m, d + 1, d))
        cols = np.broadcast_to(self.elements[:, :, None], (m, d + 1, d))
        return sp.csr_matrix(
            (self.basis_gradients.ravel(), (rows.ravel(), cols.ravel())),
            shape=(m * d, self.n_nodes),
        )

    @cached_property
    def default_rule(self) -> "QuadratureRule":
        return quadrature_rule(self)

    def node_function(self, f: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Interpolate ``f`` (called on an (n, dim) coordinate array) with zero trace."""
        vals = np.asarray(f(self.nodes), dtype=float).reshape(self.n_nodes)
        vals = np.where(self.boundary, 0.0, vals)
        return GridFunction(self, vals)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n_nodes))


def build_interval_mesh(n: int) -> Mesh:
    """Uniform mesh of (0, 1) with ``n`` elements."""
    if int(n) != n or n < 2:
        raise BadSize(f"interval mesh needs n >= 2 elements, got {n}")
    n = int(n)
    x = np.linspace(0.0, 1.0, n + 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    boundary = np.zeros(n + 1, dtype=bool)
    boundary[[0, -1]] = True
    return Mesh(1, x[:, None], elements, np.diff(x), boundary)


def build_rect_mesh(nx: int, ny: int) -> Mesh:
    """Unit square cut into ``nx * ny`` cells, each split along its diagonal."""
    for k in (nx, ny):
        if int(k) != k or k < 2:
            raise BadSize(f"rectangle mesh needs nx, ny >= 2, got ({nx}, {ny})")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    elements = np.empty((2 * nx * ny, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper
    measures = np.full(2 * nx * ny, 0.5 / (nx * ny))
    bx = np.isclose(nodes[:, 0], 0.0) | np.isclose(nodes[:, 0], 1.0)
    by = np.isclose(nodes[:, 1], 0.0) | np.isclose(nodes[:, 1], 1.0)
    return Mesh(2, nodes, elements, measures, bx | by)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Element quadrature, flattened over all elements.

    ``interp`` maps nodal values to values at the quadrature points;
    ``element`` gives the owning element of each point.
    """

    points: np.ndarray
    weights: np.ndarray
    element: np.ndarray
    interp: sp.csr_matrix
    order: int
    # False where u vanishes identically (both/all vertices on the boundary)
    touches_interior: np.ndarray


_GAUSS3 = (
    np.array([0.5 - np.sqrt(0.15), 0.5, 0.5 + np.sqrt(0.15)]),
    np.array([5.0, 8.0, 5.0]) / 18.0,
)
_EDGE_MIDPOINTS = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def quadrature_rule(mesh: Mesh) -> QuadratureRule:
    """3-point Gauss per segment, or the edge-midpoint rule per triangle."""
    m = mesh.n_elements
    if mesh.dim == 1:
        s, w = _GAUSS3
        bary = np.column_stack([1.0 - s, s])
        wts = np.outer(mesh.measures, w)
        order = 5
    else:
        bary = _EDGE_MIDPOINTS
        wts = np.outer(mesh.measures, np.full(3, 1.0 / 3.0))
        order = 2
    nq = bary.shape[0]
    verts = mesh.nodes[mesh.elements]  # (m, d+1, d)
    points = np.einsum("qk,mkd->mqd", bary, verts).reshape(m * nq, mesh.dim)
    rows = np.repeat(np.arange(m * nq), mesh.dim + 1)
    cols = np.repeat(mesh.elements, nq, axis=0).ravel()
    vals = np.tile(bary.ravel(), m)
    interp = sp.csr_matrix((vals, (rows, cols)), shape=(m * nq, mesh.n_nodes))
    interp.eliminate_zeros()
    return QuadratureRule(
        points=points,
        weights=wts.ravel(),
        element=np.repeat(np.arange(m), nq),
        interp=interp,
        order=order,
        touches_interior=np.asarray(interp[:, mesh.interior].sum(axis=1)).ravel() > 0,
    )


class GridFunction:
    """Nodal values of a P1 function with zero boundary trace."""

    __slots__ = ("mesh", "values")

    def __init__(self, mesh: Mesh, values):
        values = np.array(values, dtype=float).reshape(mesh.n_nodes)
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        if np.any(values[mesh.boundary] != 0.0):
            raise ValueError("grid function must vanish on the boundary")
        values.setflags(write=False)
        self.mesh = mesh
        self.values = values

    @classmethod
    def from_interior(cls, mesh: Mesh, x) -> "GridFunction":
        vals = np.zeros(mesh.n_nodes)
        vals[mesh.interior] = x
        return cls(mesh, vals)

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.mesh.interior]

    def __mul__(self, t):
        return GridFunction(self.mesh, self.values * float(t))

    __rmul__ = __mul__

    def __truediv__(self, t):
        return GridFunction(self.mesh, self.values / float(t))

    def __add__(self, other: "GridFunction"):
        return GridFunction(self.mesh, self.values + other.values)

    def __sub__(self, other: "GridFunction"):
        return GridFunction(self.mesh, self.values - other.values)

    def __neg__(self):
        return GridFunction(self.mesh, -self.values)

    def __abs__(self):
        return GridFunction(self.mesh, np.abs(self.values))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def __repr__(self):
        return f"GridFunction(n_nodes={self.mesh.n_nodes}, max={self.values.max():.4g})"


def gradient(u: GridFunction):
    """Per-element constant gradient of ``u`` as an :class:`ElementField`."""
    from .orlicz import ElementField

    mesh = u.mesh
    g = (mesh.gradient_operator @ u.values).reshape(mesh.n_elements, mesh.dim)
    return ElementField(g, mesh.measures)


def quad_values(u: GridFunction, rule: QuadratureRule | None = None) -> np.ndarray:
    rule = rule or u.mesh.default_rule
    return rule.interp @ u.values


def integrate(u: GridFunction, f: Callable[[np.ndarray], np.ndarray] | None = None,
              coeff=None, rule: QuadratureRule | None = None) -> float:
    """Quadrature of ``coeff(x) * f(u(x))`` over the domain.

    ``coeff`` may be None, a :class:`~nehari_dp.orlicz.ScalarField`, or an
    array of values at the quadrature points.
    """
    rule = rule or u.mesh.default_rule
    vals = rule.interp @ u.values
    fv = np.ones_like(vals) if f is None else f(vals)
    if coeff is None:
        c = 1.0
    elif hasattr(coeff, "at"):
        c = coeff.at(rule)
    else:
        c = np.asarray(coeff, dtype=float)
    return float(np.sum(rule.weights * c * fv))


def write_node_csv(u: GridFunction, path) -> None:
    """Columns: id, x[, y], value."""
    mesh = u.mesh
    header = ["id", "x"] + (["y"] if mesh.dim == 2 else []) + ["value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(mesh.n_nodes):
            w.writerow([i, *(repr(float(c)) for c in mesh.nodes[i]), repr(float(u.values[i]))])


def write_element_csv(mesh: Mesh, path) -> None:
    """Columns: id, n0, n1[, n2], measure."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"n{k}" for k in range(mesh.dim + 1)] + ["measure"])
        for e in range(mesh.n_elements):
            w.writerow([e, *mesh.elements[e].tolist(), repr(float(mesh.measures[e]))])


def read_node_csv(mesh: Mesh, path) -> GridFunction:
    """Inverse of :func:`write_node_csv`; coordinates are checked against ``mesh``."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != mesh.n_nodes:
        raise ValueError(f"expected {mesh.n_nodes} nodes, file has {len(rows)}")
    vals = np.empty(mesh.n_nodes)
    for row in rows:
        i = int(row["id"])
        xy = [float(row["x"])] + ([float(row["y"])] if mesh.dim == 2 else [])
        if not np.allclose(xy, mesh.nodes[i], atol=1e-12):
            raise ValueError(f"node {i} coordinates do not match the mesh")
        vals[i] = float(row["value"])
    return GridFunction(mesh, vals)
