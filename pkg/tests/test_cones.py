import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from conicstab import cones
from conicstab.cones import Lorentz, Orthant, PolyCone, PowerSurface, Product, cone_from_dict
from conicstab.errors import DimensionMismatch, NotMember, OutsideChart
from conicstab.numdiff import forward_difference

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def catalogue():
    rng = np.random.default_rng(11)
    return [Orthant(3), Orthant(2, sign=-1), Lorentz(3), Lorentz(4, axis=2), Lorentz(3, sign=-1),
            PolyCone(rng.standard_normal((4, 3))), PolyCone(ineq=[[1.0, 1.0, 0.0]], eq=[[0.0, 0.0, 1.0]]),
            Product([Orthant(1), Lorentz(3)])]


def moreau_ok(K, u, tol=1e-8):
    p, q = K.project(u), K.polar().project(u)
    return (np.linalg.norm(u - p - q) <= tol and abs(p @ q) <= tol
            and K.contains(p, 1e-8) and K.polar().contains(q, 1e-8))


@pytest.mark.parametrize("K", catalogue(), ids=repr)
def test_moreau_decomposition(K):
    rng = np.random.default_rng(0)
    for u in rng.standard_normal((40, K.dim)) * 3:
        assert moreau_ok(K, u)


@settings(max_examples=60, deadline=None)
@given(arrays(float, 3, elements=finite))
def test_lorentz_projection_is_variational(u):
    # independent characterization: p in K, u - p in polar, orthogonality
    K = Lorentz(3, axis=1)
    assert moreau_ok(K, u, tol=1e-7 * max(1.0, np.linalg.norm(u)))


def test_polyhedral_projection_matches_qp():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((5, 3))
    K = PolyCone(A)
    for u in rng.standard_normal((10, 3)):
        res = minimize(lambda z: 0.5 * np.sum((z - u) ** 2), np.zeros(3), jac=lambda z: z - u,
                       constraints=[{"type": "ineq", "fun": lambda z: -A @ z, "jac": lambda z: -A}],
                       method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        assert np.allclose(K.project(u), res.x, atol=1e-6)


def test_dual_is_negated_polar():
    K = Lorentz(3)
    assert isinstance(K.dual(), Lorentz)
    z = np.array([2.0, 1.0, 0.5])
    assert K.dual().contains(z)            # self-dual
    assert K.polar().contains(-z)
    assert cones.dual(K, polar=True).contains(-z)
    O = Orthant(3)
    assert O.dual().contains([1.0, 2.0, 0.0]) and O.polar().contains([-1.0, -2.0, 0.0])


def test_lorentz_axis_convention():
    K = Lorentz(3, axis=2)
    assert K.contains([0.3, 0.4, 0.5]) and not K.contains([0.5, 0.4, 0.3])
    d = cone_from_dict({"type": "lorentz", "dim": 3, "axis": 3})
    assert d.contains([0.3, 0.4, 0.5])
    assert d.to_dict()["axis"] == 3


def test_lorentz_boundary_cones():
    K = Lorentz(3)
    z = np.array([1.0, 0.6, 0.8])
    N = K.normal_cone(z)
    T = K.tangent_cone(z)
    n = np.array([-1.0, 0.6, 0.8])
    assert N.contains(n) and N.contains(2 * n) and not N.contains(-n)
    # definition: <n, k - z> <= 0 over the cone
    for k in Lorentz(3).sample(np.random.default_rng(2), 50):
        assert n @ (k - z) <= 1e-9
    assert T.contains([0.0, 0.8, -0.6]) and T.contains(-np.array([0.0, 0.8, -0.6]))
    assert not T.contains(n)


def test_tangent_cone_limit_definition():
    K = Lorentz(3)
    z = np.array([1.0, 1.0, 0.0])
    T = K.tangent_cone(z)
    rng = np.random.default_rng(3)
    for d in rng.standard_normal((30, 3)):
        t = 1e-6
        dist = np.linalg.norm(z + t * d - K.project(z + t * d)) / t
        if T.contains(d, 1e-9):
            assert dist < 1e-4
        elif np.linalg.norm(d - T.project(d)) > 1e-2:
            assert dist > 1e-4


def test_vertex_cones():
    K = Lorentz(3)
    assert K.tangent_cone(np.zeros(3)).contains([1.0, 0.5, 0.5])
    assert K.normal_cone(np.zeros(3)).contains([-1.0, 0.5, 0.5])


def test_lineality_and_membership_errors():
    K = PolyCone(ineq=[[1.0, 0.0, 0.0]])
    L = K.lineality()
    assert L.shape == (2, 3)
    with pytest.raises(NotMember):
        Lorentz(3).normal_cone([0.0, 1.0, 0.0])
    with pytest.raises(DimensionMismatch):
        Lorentz(3).project([1.0, 2.0])


@pytest.mark.parametrize("K", [Orthant(3), Lorentz(3), Lorentz(4, axis=3), PolyCone(np.eye(3)[:2]),
                               Product([Orthant(2), Lorentz(3)])], ids=repr)
def test_projection_derivative_matches_fd(K):
    rng = np.random.default_rng(4)
    for _ in range(30):
        u, h = rng.standard_normal((2, K.dim))
        d = K.projection_derivative(u)(h)
        assert np.allclose(d, forward_difference(K.project, u, h), atol=1e-5)


def test_lorentz_derivative_at_kinks():
    K = Lorentz(3)
    rng = np.random.default_rng(5)
    for u in (np.zeros(3), np.array([1.0, 1.0, 0.0]), np.array([-1.0, 0.6, 0.8])):
        for h in rng.standard_normal((10, 3)):
            d = K.projection_derivative(u)(h)
            assert np.allclose(d, forward_difference(K.project, u, h, 1e-7), atol=1e-5)


def test_fault_injection_changes_projection():
    K = Lorentz(3)
    u = np.array([1.0, 2.0, 0.0])
    base = K.project(u)
    cones.set_fault("lorentz_projection")
    try:
        assert not np.allclose(K.project(u), base)
    finally:
        cones.set_fault("lorentz_projection", False)
    assert np.allclose(K.project(u), base)


def test_power_surface_projection_and_chart():
    K = PowerSurface()
    rng = np.random.default_rng(6)
    for u in rng.standard_normal((8, 3)) * 0.5 + [2.0, 0.0, 0.0]:
        p = K.project(u)
        assert K.contains(p, 1e-8)
        # local optimality: no sampled member is closer
        for k in K.sample(rng, 50):
            assert np.linalg.norm(u - p) <= np.linalg.norm(u - k) + 1e-8
    assert K.contains([1.0, 0.5, 0.0625]) and not K.contains([1.0, 1.0, 0.5])
    assert K.contains(np.zeros(3))
    with pytest.raises(OutsideChart):
        K.contains([-1.0, 0.0, 0.0])


def test_polycone_canonical_form():
    K = PolyCone(ineq=[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, 2.0]])
    assert K.B.shape[0] == 1          # implicit equality detected
    assert K.A.shape[0] == 1          # duplicate row removed
    assert K.same_set(PolyCone(ineq=[[0.0, 1.0]], eq=[[1.0, 0.0]]))


def test_product_round_trip():
    spec = {"type": "product", "factors": [{"type": "orthant", "dim": 2, "sign": "+"},
                                           {"type": "lorentz", "dim": 3, "axis": 1}]}
    K = cone_from_dict(spec)
    assert K.dim == 5
    assert cone_from_dict(K.to_dict()).contains([1.0, 0.0, 1.0, 0.5, 0.5])
