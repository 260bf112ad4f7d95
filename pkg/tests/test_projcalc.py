import numpy as np
import pytest

from conicstab.cones import Lorentz, Orthant, PolyCone, PowerSurface, Product
from conicstab.errors import NotMember, NotNormal, NotTangent
from conicstab.numdiff import forward_difference
from conicstab.projcalc import (critical_cone, directional_derivative_projection, extended_polyhedricity,
                                fd_directional_derivative_projection, is_normal, parabolic_second_derivative,
                                pdc_check, second_order_tangent_set, POWER_SURFACE_PHI)


def test_critical_cone_of_lorentz_vertex():
    Q = Lorentz(3, axis=2)
    cc = critical_cone(Q, np.zeros(3), [1.0, 0.0, -1.0])
    assert cc.is_polyhedral and cc.cone.same_set(PolyCone.ray([1.0, 0.0, 1.0]))
    # b in the interior of the polar: only the origin is critical
    assert critical_cone(Q, np.zeros(3), [0.0, 0.0, -1.0]).cone.same_set(PolyCone.zero(3))
    # b = 0: the whole cone, not polyhedral
    assert not critical_cone(Q, np.zeros(3), np.zeros(3)).is_polyhedral


def test_critical_cone_definition_polyhedral():
    # oracle: T(z) ∩ b^⊥ sampled directly
    rng = np.random.default_rng(0)
    K = PolyCone(rng.standard_normal((4, 3)))
    z = K.project(rng.standard_normal(3))
    b = K.polar().project(rng.standard_normal(3))
    b = K.normal_cone(z).project(b)
    cc = critical_cone(K, z, b).cone
    T = K.tangent_cone(z)
    for h in rng.standard_normal((50, 3)):
        assert cc.contains(h) == (T.contains(h) and abs(b @ h) <= 1e-9)


def test_critical_cone_errors():
    Q = Lorentz(3)
    with pytest.raises(NotMember):
        critical_cone(Q, [0.0, 1.0, 0.0], np.zeros(3))
    with pytest.raises(NotNormal):
        critical_cone(Q, np.zeros(3), [1.0, 0.0, 0.0])
    assert is_normal(Q, np.zeros(3), [-1.0, 0.5, 0.0])


def test_parabolic_derivative_matches_quotient():
    z = np.array([1.0, 1.0, 1.0])
    rng = np.random.default_rng(1)
    for _ in range(10):
        h, w = rng.standard_normal((2, 3))
        exact = parabolic_second_derivative(POWER_SURFACE_PHI, z, h, w)
        t = 1e-4
        phi = PowerSurface.phi
        num = (phi(z + t * h + 0.5 * t * t * w) - phi(z) - t * PowerSurface.grad_phi(z) @ h) / (0.5 * t * t)
        assert np.isclose(exact, num, rtol=1e-3, atol=1e-3)


def test_second_order_tangent_sets():
    Q = Lorentz(3)
    z = np.array([1.0, 1.0, 0.0])
    with pytest.raises(NotTangent):
        second_order_tangent_set(Q, z, [-1.0, 1.0, 0.0])
    # h in the interior of the tangent cone: no curvature constraint
    assert second_order_tangent_set(Q, z, [1.0, 0.0, 0.0]).contains([-5.0, 3.0, 2.0])
    T2 = second_order_tangent_set(Q, z, [1.0, 1.0, 0.5])
    assert not T2.contains_zero()
    prod = second_order_tangent_set(Product([Orthant(1), Q]), np.array([0.0, *z]), [1.0, 1.0, 1.0, 0.0])
    assert prod.contains_zero()


def test_extended_polyhedricity_catalogue():
    assert extended_polyhedricity(Orthant(3), [0.0, 1.0, 0.0]).status == "holds"
    assert extended_polyhedricity(Lorentz(3), np.zeros(3)).status == "holds"
    assert extended_polyhedricity(Lorentz(3), [2.0, 1.0, 0.0]).status == "holds"
    ep = extended_polyhedricity(Lorentz(3), [1.0, 1.0, 0.0])
    assert ep.status == "fails"
    b, h = ep.normal_b, ep.witness_h
    assert abs(b @ h) <= 1e-9 and not second_order_tangent_set(Lorentz(3), [1.0, 1.0, 0.0], h).contains_zero()


def test_pdc_verdicts():
    assert pdc_check(Lorentz(3), np.zeros(3)).method == "structural:vertex"
    assert pdc_check(PolyCone(np.eye(3)[:1]), [-1.0, 0.0, 0.0]).status == "certified"
    assert pdc_check(PowerSurface(), [1.0, 0.0, 0.0]).method == "structural:extended-polyhedricity"
    v = pdc_check(Lorentz(3), [1.0, 1.0, 0.0], seed=0)
    assert v.status == "refuted"
    # the witness is reproducible from its data
    Q = Lorentz(3)
    z = np.array([1.0, 1.0, 0.0])
    fd = forward_difference(Q.project, z + v.witness_b, v.witness_h)
    pk = critical_cone(Q, z, v.witness_b).cone.project(v.witness_h)
    assert np.linalg.norm(fd - pk) > 1e-5
    assert pdc_check(Lorentz(3), [1.0, 1.0, 0.0], seed=0).to_dict() == v.to_dict()


def test_directional_derivatives():
    rng = np.random.default_rng(2)
    Q = Lorentz(4, axis=1)
    for _ in range(10):
        u, h = rng.standard_normal((2, 4))
        d = directional_derivative_projection(Q, u, h)
        assert np.allclose(d, fd_directional_derivative_projection(Q, u, h), atol=1e-5)
    # positive homogeneity in h
    u, h = rng.standard_normal((2, 4))
    assert np.allclose(directional_derivative_projection(Q, u, 3 * h), 3 * directional_derivative_projection(Q, u, h))
