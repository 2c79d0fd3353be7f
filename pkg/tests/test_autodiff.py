"""Unit tests for the forward-mode dual-number engine."""

import numpy as np
import pytest

from cpcopt.autodiff import Dual, constant, seed


def _scalar_seed(val, order=2):
    return seed(np.asarray([val], dtype=float), 0, 1, order)


def _fd(fun, x, h=1e-6):
    return (fun(x + h) - fun(x - h)) / (2 * h)


class TestFirstOrder:
    @pytest.mark.parametrize(
        "fun",
        [
            lambda x: x * x * x + 2.0 * x - 5.0,
            lambda x: (x + 1.0) / (x * x + 3.0),
            lambda x: (x * x + 1.0).sqrt() if isinstance(x, Dual) else np.sqrt(x * x + 1.0),
            lambda x: x**4 - x**2,
            lambda x: 3.0 - x,
            lambda x: 2.0 / x,
        ],
    )
    @pytest.mark.parametrize("x0", [0.7, -1.3, 2.5])
    def test_derivative_matches_finite_difference(self, fun, x0):
        d = fun(_scalar_seed(x0, order=1))
        assert d.val[0] == pytest.approx(fun(x0))
        assert d.dot[0, 0] == pytest.approx(_fd(fun, x0), rel=1e-7)

    def test_multiple_seed_directions(self):
        # f(x, y) = x^2 y: grad = (2xy, x^2)
        x = seed(np.asarray([3.0]), 0, 2)
        y = seed(np.asarray([5.0]), 1, 2)
        f = x * x * y
        np.testing.assert_allclose(f.dot[0], [30.0, 9.0])

    def test_constant_has_zero_derivative(self):
        c = constant(np.asarray([4.0]), 1)
        f = c * c + c
        assert f.dot[0, 0] == 0.0

    def test_vectorized_values(self):
        vals = np.linspace(0.5, 2.0, 7)
        d = seed(vals, 0, 1)
        f = d * d
        np.testing.assert_allclose(f.val, vals**2)
        np.testing.assert_allclose(f.dot[:, 0], 2 * vals)


class TestSecondOrder:
    def test_cubic_curvature(self):
        # f(x) = x^3: f'' = 6x
        d = _scalar_seed(2.0)
        f = d * d * d
        assert f.ddot[0, 0, 0] == pytest.approx(12.0)

    def test_reciprocal_curvature(self):
        # f(x) = 1/x: f'' = 2/x^3
        d = _scalar_seed(2.0)
        f = 1.0 / d
        assert f.ddot[0, 0, 0] == pytest.approx(2.0 / 8.0)

    def test_sqrt_curvature(self):
        # f(x) = sqrt(x): f'' = -1/(4 x^{3/2})
        d = _scalar_seed(4.0)
        f = d.sqrt()
        assert f.ddot[0, 0, 0] == pytest.approx(-1.0 / 32.0)

    def test_cross_derivative(self):
        # f(x, y) = x^2 y: d2f/dxdy = 2x
        x = seed(np.asarray([3.0]), 0, 2, order=2)
        y = seed(np.asarray([5.0]), 1, 2, order=2)
        f = x * x * y
        assert f.ddot[0, 0, 1] == pytest.approx(6.0)
        assert f.ddot[0, 1, 0] == pytest.approx(6.0)
        assert f.ddot[0, 0, 0] == pytest.approx(10.0)
        assert f.ddot[0, 1, 1] == pytest.approx(0.0)

    def test_hessian_symmetry_random_expression(self, rng):
        x = seed(rng.uniform(0.5, 2.0, 5), 0, 2, order=2)
        y = seed(rng.uniform(0.5, 2.0, 5), 1, 2, order=2)
        f = (x * y + x * x * x) / (y + 2.0) + (x * x + y * y).sqrt()
        np.testing.assert_allclose(f.ddot[:, 0, 1], f.ddot[:, 1, 0], atol=1e-12)
