import numpy as np
import pytest

from nehari_dp import BadSize, GridFunction, build_interval_mesh, build_rect_mesh, integrate
from nehari_dp.mesh import gradient, read_node_csv, write_node_csv
from nehari_dp.orlicz import ScalarField


def test_interval_nodes():
    m = build_interval_mesh(2)
    assert np.allclose(m.nodes[:, 0], [0, 0.5, 1])
    m4 = build_interval_mesh(4)
    assert m4.n_nodes == 5
    assert np.allclose(m4.measures, 0.25)


@pytest.mark.parametrize("n", [0, 1])
def test_interval_too_small(n):
    with pytest.raises(BadSize):
        build_interval_mesh(n)


def test_rect_counts():
    m = build_rect_mesh(2, 2)
    assert (m.n_nodes, m.n_elements) == (9, 8)
    m = build_rect_mesh(5, 7)
    assert m.measures.sum() == pytest.approx(1.0, abs=1e-14)
    assert m.interior.size == 4 * 6


def test_gradients(hat):
    assert np.allclose(gradient(hat).values[:, 0], [2, -2])
    mesh = build_interval_mesh(4)
    u = mesh.node_function(lambda x: x[:, 0] * (1 - x[:, 0]))
    assert np.allclose(gradient(u).values[:, 0], [0.75, 0.25, -0.25, -0.75])
    assert np.all(gradient(mesh.zeros()).values == 0)


def test_boundary_must_vanish():
    mesh = build_interval_mesh(2)
    with pytest.raises(ValueError):
        GridFunction(mesh, [1.0, 1.0, 0.0])


def test_integrate_hat(hat):
    assert integrate(hat, lambda v: np.abs(v) ** 0.5) == pytest.approx(2 / 3, abs=2e-2)
    assert integrate(hat, lambda v: v**4) == pytest.approx(0.2, rel=1e-12)
    assert integrate(hat, lambda v: np.ones_like(v), ScalarField.constant(1.0)) == pytest.approx(1.0)


def _hat_integral(n):
    m = build_interval_mesh(n)
    u = m.node_function(lambda x: 1 - np.abs(2 * x[:, 0] - 1))
    return integrate(u, lambda v: np.abs(v) ** 0.5)


def test_integrate_converges_under_refinement():
    vals = [_hat_integral(2**k) for k in range(1, 8)]
    errs = [abs(v - 2 / 3) for v in vals]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[1:] <= diffs[:-1] / 2)


def test_smooth_integrand_2d_refinement():
    def val(n):
        m = build_rect_mesh(n, n)
        u = m.node_function(lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]))
        return integrate(u, lambda v: v**2)

    vals = [val(n) for n in (4, 8, 16, 32)]
    d = np.abs(np.diff(vals))
    assert np.all(d[1:] <= d[:-1] / 2)
    assert vals[-1] == pytest.approx(0.25, rel=1e-2)


def test_node_csv_round_trip(tmp_path):
    m = build_rect_mesh(3, 4)
    u = m.node_function(lambda x: x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1]) / 3)
    write_node_csv(u, tmp_path / "u.csv")
    v = read_node_csv(m, tmp_path / "u.csv")
    assert np.array_equal(u.values, v.values)
    assert (tmp_path / "u.csv").read_text().splitlines()[0] == "id,x,y,value"
