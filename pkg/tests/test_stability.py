import numpy as np
import pytest

from conicstab.cones import Lorentz, PolyCone
from conicstab.derivatives import graphical_derivative_solution_map
from conicstab.faces import enumerate_faces
from conicstab.geometry import GEProblem, recover_multiplier
from conicstab.polynomial import PolynomialMap
from conicstab.problem_io import bundled_path, load_problem
from conicstab.projcalc import critical_cone
from conicstab.stability import _adjoint_residual, certify_isolated_calmness, empirical_calmness_probe

from helpers import linear_problem


def problem(name):
    return load_problem(bundled_path(name)).problem


def scaled(P, factor):
    comps = [[(factor * c, e) for c, e in terms] for terms in P.f.components]
    f = PolynomialMap(P.f.in_dim, P.f.out_dim, comps)
    return GEProblem(f, P.g, P.theta, P.xbar, P.ybar, P.name)


def test_certified_example():
    v = certify_isolated_calmness(problem("example_6_4"))
    assert v.status == "certified" and v.necessary and v.witness is None
    assert v.interpretation == "isolatedly calm"


@pytest.mark.parametrize("name", ["power_surface", "f_zero_degenerate"])
def test_refutation_witness_verified(name):
    P = problem(name)
    v = certify_isolated_calmness(P)
    assert v.status == "refuted"
    w = v.witness
    lam = recover_multiplier(P).lam
    L = P.lagrangian_hessian(lam)
    J = P.g.jacobian(P.ybar)
    K = critical_cone(P.theta, P.g(P.ybar), lam).cone
    vv, mu = np.array(w["v"]), np.array(w["mu"])
    assert np.isclose(np.linalg.norm(vv), 1.0)
    # independent check of the homogeneous inclusion and of mu in the face normal cone
    assert np.linalg.norm(L @ vv + J.T @ mu) <= 1e-10
    F = enumerate_faces(K).faces[w["face"]]
    N = PolyCone.from_generators(F.normal_rays, F.normal_lineality, K.dim)
    assert F.cone.contains(J @ vv, 1e-9) and N.contains(mu, 1e-9)
    assert _adjoint_residual(L, J, K, vv, mu) <= 1e-10


def test_power_surface_witness_direction():
    v = certify_isolated_calmness(problem("power_surface"))
    w = np.array(v.witness["v"])
    assert abs(abs(w[0]) - np.sqrt(0.5)) < 1e-9 and abs(w[0] + w[1]) < 1e-9 and abs(w[2]) < 1e-9


def test_necessity_flag():
    v = certify_isolated_calmness(problem("f_zero_degenerate"))
    assert not v.necessary and "undecided" in v.interpretation


@pytest.mark.parametrize("name", ["example_6_4", "power_surface", "orthant_nlp", "soc_vertex"])
def test_scaling_invariance(name):
    P = problem(name)
    base = certify_isolated_calmness(P)
    lam = recover_multiplier(P).lam
    for factor in (0.5, 3.0):
        Q = scaled(P, factor)
        assert np.allclose(recover_multiplier(Q).lam, factor * lam, atol=1e-9)
        assert certify_isolated_calmness(Q).status == base.status


def test_consistency_on_random_instances():
    rng = np.random.default_rng(3)
    seen = set()
    for _ in range(15):
        theta = PolyCone.from_generators(rng.standard_normal((2, 2)))
        G = rng.standard_normal((2, 2)) + 2 * np.eye(2)
        Fy = rng.standard_normal((2, 2)) * rng.integers(0, 2)
        rays, _ = theta.normal_cone(np.zeros(2)).generators()
        lam = rays[0] * rng.integers(0, 2)
        P = linear_problem(theta, G, np.eye(2), Fy, -G.T @ lam, [0.0, 0.0], [0.0, 0.0])
        v = certify_isolated_calmness(P)
        ds = graphical_derivative_solution_map(P, np.zeros(2))
        assert (v.status == "certified") == ds.is_trivial()
        seen.add(v.status)
    assert seen == {"certified", "refuted"}


def _soc_identity(Fy):
    # g(y) = y into Q^3 at the vertex with lambda = 0: the critical cone is the full Lorentz cone
    return linear_problem(Lorentz(3, axis=2), np.eye(3), np.eye(3), Fy, np.zeros(3), np.zeros(3), np.zeros(3))


def test_nonpolyhedral_fallback():
    v = certify_isolated_calmness(_soc_identity(np.zeros((3, 3))))
    assert v.status == "refuted" and not v.method.startswith("faces")
    assert v.witness["residual"] <= 1e-10
    v = certify_isolated_calmness(_soc_identity(np.eye(3)))
    assert v.status == "inconclusive"


def test_probe_flags_and_determinism():
    P = problem("f_zero_degenerate")
    a = empirical_calmness_probe(P, (1e-2, 1e-3), directions=8, seed=4)
    b = empirical_calmness_probe(P, (1e-2, 1e-3), directions=8, seed=4)
    assert a.unbounded
    assert a.to_dict() == b.to_dict()
    assert a.to_dict()["method"] == "empirical"
