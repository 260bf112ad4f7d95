import numpy as np
import pytest

from conicstab.config import Tolerances
from conicstab.numdiff import directional_error, fd_jacobian, forward_difference, parabolic_quotient


def test_forward_difference_is_one_sided():
    # |x| at 0: one-sided quotient recovers |h|, a central one would give 0
    assert np.allclose(forward_difference(np.abs, np.zeros(2), np.array([1.0, -2.0])), [1.0, 2.0])


def test_fd_jacobian():
    f = lambda x: np.array([x[0] * x[1], np.sin(x[0])])
    x = np.array([0.3, -1.2])
    assert np.allclose(fd_jacobian(f, x), [[x[1], x[0]], [np.cos(x[0]), 0.0]], atol=1e-8)


def test_parabolic_quotient_of_quadratic():
    phi = lambda z: z @ z
    grad = lambda z: 2 * z
    z, h, w = np.ones(2), np.array([1.0, 0.0]), np.array([0.0, 1.0])
    # exact value: grad.w + 2 h.h = 2 + 2
    assert np.isclose(parabolic_quotient(phi, grad, z, h, w, 1e-3), 4.0, atol=1e-6)


def test_directional_error():
    assert directional_error(lambda x: 2 * x, lambda h: 2 * h, np.ones(2), np.ones(2)) < 1e-8


def test_tolerances():
    t = Tolerances().updated(kkt=1e-8)
    assert t.kkt == 1e-8 and t.mem == Tolerances().mem
    with pytest.raises(KeyError):
        Tolerances().updated(bogus=1.0)
