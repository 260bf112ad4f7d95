import numpy as np
import pytest
from scipy.optimize import minimize

from conicstab.cones import Lorentz, Orthant
from conicstab.errors import Infeasible, NoMultiplier, NormalityViolation, OutsideTrustRegion
from conicstab.geometry import (check_nondegeneracy, directional_derivative_projection_gamma, project_gamma,
                                recover_multiplier, semismooth_newton, theta_convexity_probe)
from conicstab.numdiff import forward_difference
from conicstab.polynomial import PolynomialMap
from conicstab.problem_io import bundled_path, load_problem

from helpers import linear_problem


@pytest.fixture(scope="module")
def soc():
    return load_problem(bundled_path("example_6_4")).problem


def test_nondegeneracy(soc):
    rep = check_nondegeneracy(soc)
    assert rep.holds and rep.rank == 3
    # g(y) = (y1, y1) into the orthant at the vertex: rank 1 < 2
    P = linear_problem(Orthant(2), [[1.0], [1.0]], [[1.0]], [[0.0]], [0.0], [0.0], [0.0])
    rep = check_nondegeneracy(P)
    assert not rep.holds and rep.rank == 1


def test_infeasible_reference():
    P = linear_problem(Orthant(1), [[1.0]], [[1.0]], [[0.0]], [0.0], [0.0], [-1.0])
    with pytest.raises(Infeasible):
        check_nondegeneracy(P)


def test_multiplier(soc):
    m = recover_multiplier(soc)
    assert np.allclose(m.lam, [1.0, 0.0, -1.0]) and m.unique
    # interior point with f != 0: the only solution of the linear system is not normal
    P = linear_problem(Orthant(1), [[1.0]], [[1.0]], [[0.0]], [0.0], [1.0], [1.0])
    with pytest.raises(NormalityViolation):
        recover_multiplier(P)
    # -f outside the range of grad g'
    P = linear_problem(Orthant(1), [[1.0, 0.0]], np.eye(2), np.zeros((2, 2)), [0.0, 1.0], [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(NoMultiplier):
        recover_multiplier(P)


def test_project_gamma_against_optimizer(soc):
    # oracle: constrained least squares with SLSQP
    rng = np.random.default_rng(0)
    for _ in range(10):
        u = rng.standard_normal(3) * 0.15
        y, nu = project_gamma(soc, u)
        res = minimize(lambda z: np.sum((z - u) ** 2), soc.ybar, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda z: soc.g(z)[2] - np.hypot(*soc.g(z)[:2])}],
                       options={"ftol": 1e-14, "maxiter": 200})
        assert np.linalg.norm(y - u) <= np.linalg.norm(res.x - u) + 1e-7
        assert soc.in_gamma(y, 1e-9)
        assert np.allclose(u, y + soc.g.jacobian(y).T @ nu, atol=1e-9)


def test_project_gamma_known_point(soc):
    y, nu = project_gamma(soc, [0.0, 0.0, -0.1])
    assert np.allclose(y, 0.0, atol=1e-10) and np.allclose(nu, [0.0, 0.0, -0.1], atol=1e-10)
    with pytest.raises(OutsideTrustRegion):
        project_gamma(soc, [5.0, 0.0, 0.0])


def test_gamma_derivative_matches_fd(soc):
    rng = np.random.default_rng(1)
    for _ in range(10):
        u = rng.standard_normal(3) * 0.1
        h = rng.standard_normal(3)
        d = directional_derivative_projection_gamma(soc, u, h).value
        fd = forward_difference(lambda w: project_gamma(soc, w)[0], u, h)
        assert np.allclose(d, fd, atol=1e-4)


def test_semismooth_newton_on_orthant_complementarity():
    # projection of a onto the orthant: y - a + nu = 0, y = P(y + nu)
    a = np.array([1.0, -2.0])
    g = PolynomialMap(2, 2, [[(1, [1, 0])], [(1, [0, 1])]])
    res = semismooth_newton(lambda y, nu: y - a + nu, lambda y, nu: (np.eye(2), np.eye(2)),
                            g, Orthant(2), np.zeros(2), np.zeros(2))
    assert res.converged
    assert np.allclose(res.y, np.maximum(a, 0.0), atol=1e-9)


def test_convexity_probe(soc):
    # the curved constraint bends the wrong way for some polar directions
    probe = theta_convexity_probe(soc)
    assert probe.status == "fails" and probe.witness["value"] < 0
    lin = linear_problem(Lorentz(2), np.eye(2), np.eye(2), np.zeros((2, 2)), [0.0, 0.0], [0.0, 0.0], [1.0, 0.0])
    assert theta_convexity_probe(lin).status == "sampled-ok"
