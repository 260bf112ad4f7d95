import numpy as np
import pytest

from conicstab.derivatives import (PiecewisePolyhedralSet, Piece, graphical_derivative_normal_cone,
                                   graphical_derivative_projection, graphical_derivative_solution_map)
from conicstab.geometry import directional_derivative_projection_gamma, project_gamma
from conicstab.numdiff import forward_difference
from conicstab.problem_io import bundled_path, load_problem


def problem(name):
    return load_problem(bundled_path(name)).problem


@pytest.fixture(scope="module")
def soc():
    return problem("example_6_4")


def test_ds_at_zero(soc):
    ds = graphical_derivative_solution_map(soc, np.zeros(3))
    assert ds.equality and ds.status == "equality"
    assert ds.is_trivial()
    assert ds.contains(np.zeros(3)) and not ds.contains([1.0, 0.0, 1.0])


def test_ds_homogeneity(soc):
    rng = np.random.default_rng(0)
    for _ in range(5):
        u = rng.standard_normal(3)
        ds, ds2 = (graphical_derivative_solution_map(soc, s * u) for s in (1.0, 2.0))
        for v in ds.set.points():
            assert ds2.contains(2.0 * v)


def test_inclusion_only_flag():
    ds = graphical_derivative_solution_map(problem("f_zero_degenerate"), np.zeros(2))
    assert not ds.equality and ds.status == "inclusion-only"
    assert not ds.is_trivial()


def test_piece_membership_and_witness():
    # {v in R^2 : v1 = a, a >= 0, v2 <= 0}
    piece = Piece(eq_v=np.array([[1.0, 0.0]]), eq_nonneg=np.array([[-1.0]]), eq_free=np.zeros((1, 0)),
                  rhs=np.zeros(1), ineq_v=np.array([[0.0, 1.0]]))
    assert piece.contains([2.0, -1.0]) and not piece.contains([-1.0, 0.0]) and not piece.contains([0.0, 1.0])
    x = piece.nonzero_witness()
    assert x is not None and np.linalg.norm(x[:2]) > 0
    S = PiecewisePolyhedralSet(2, [piece])
    assert not S.is_trivial()
    zero = Piece(eq_v=np.eye(2), eq_nonneg=np.zeros((2, 0)), eq_free=np.zeros((2, 0)),
                 rhs=np.zeros(2), ineq_v=np.zeros((0, 2)))
    assert PiecewisePolyhedralSet(2, [zero]).is_trivial()


def test_projection_graph_derivative_matches_fd(soc):
    rng = np.random.default_rng(1)
    for _ in range(8):
        u = rng.standard_normal(3) * 0.1
        h = rng.standard_normal(3)
        d = graphical_derivative_projection(soc, u, h)
        fd = forward_difference(lambda w: project_gamma(soc, w)[0], u, h)
        assert np.allclose(d.value, fd, atol=1e-4)
        assert np.allclose(d.value, directional_derivative_projection_gamma(soc, u, h).value, atol=1e-7)


def test_normal_cone_derivative_inverse_relation(soc):
    # w in DN(ybar, wbar)(v)  iff  P'(ybar + wbar; v + w) = v
    wbar = 0.2 * np.array([1.0, 0.0, -1.0])
    v = np.array([1.0, 0.0, 1.0])
    dn = graphical_derivative_normal_cone(soc, wbar, v)
    assert not dn.empty
    # offset = 0.2 * diag(-0.4, -0.4, 0) v; the cone part is the plane a1 + a3 = 0
    assert np.allclose(dn.offset, [-0.08, 0.0, 0.0])
    rng = np.random.default_rng(2)
    for _ in range(5):
        a = rng.standard_normal(3)
        a -= (a[0] + a[2]) / 2 * np.array([1.0, 0.0, 1.0])
        w = dn.offset + a
        assert dn.contains(w)
        d = directional_derivative_projection_gamma(soc, soc.ybar + wbar, v + w).value
        assert np.allclose(d, v, atol=1e-7)
    assert not dn.contains(dn.offset + np.array([1.0, 0.0, 1.0]))
    # directions outside the critical cone give an empty value
    assert graphical_derivative_normal_cone(soc, wbar, [1.0, 0.0, -1.0]).empty
