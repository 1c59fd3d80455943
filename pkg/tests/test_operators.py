import numpy as np
import pytest

from app.errors import DomainError
from app.first_order import SimplexPoint
from app.operators import bernstein, bernstein_derivative, lift, sup_distance


def random_simplex_points(rng, n, k):
    return rng.dirichlet(np.ones(k), size=n)[:, 1:]


def random_step_cdf(rng, pieces=6):
    """Nondecreasing piecewise-linear map of [0, 1] onto [0, 1]"""
    knots = np.concatenate([[0.0], np.sort(rng.random(pieces - 1)), [1.0]])
    values = np.concatenate([[0.0], np.sort(rng.random(pieces - 1)), [1.0]])
    return lambda u: np.interp(u, knots, values)


def random_increasing_cdf(rng, pieces=6):
    """Strictly increasing piecewise-linear bijection of [0, 1] and its inverse"""
    knots = np.concatenate([[0.0], np.sort(rng.random(pieces - 1)), [1.0]])
    values = np.concatenate([[0.0], np.sort(rng.random(pieces - 1)), [1.0]])
    return (lambda u: np.interp(u, knots, values)), (lambda v: np.interp(v, values, knots))


class TestLift:

    def test_identity(self):
        theta = np.array([0.1, 0.25, 0.4])
        np.testing.assert_allclose(lift(lambda u: u, theta), theta, atol=1e-15)

    def test_square(self):
        np.testing.assert_allclose(lift(lambda u: u ** 2, SimplexPoint([0.2, 0.3])), [0.04, 0.21])

    def test_first_coordinate_has_no_subtrahend(self):
        assert lift(lambda u: u + 1.0, [0.3])[0] == pytest.approx(1.3)

    def test_stack_of_points(self):
        points = np.array([[0.2, 0.3], [0.5, 0.1]])
        stacked = lift(lambda u: u ** 2, points)
        assert stacked.shape == (2, 2)
        np.testing.assert_allclose(stacked[1], lift(lambda u: u ** 2, points[1]))


class TestLiftProperties:
    """Algebraic properties of the lifting operator at random points and functions"""

    N = 1000

    @pytest.fixture
    def rng(self):
        return np.random.default_rng(2024)

    def test_linearity(self, rng):
        for _ in range(self.N):
            k = int(rng.integers(2, 6))
            theta = random_simplex_points(rng, 1, k)[0]
            g, h = random_step_cdf(rng), random_step_cdf(rng)
            a = rng.normal()
            combined = lift(lambda u: a * g(u) + h(u), theta)
            np.testing.assert_allclose(combined, a * lift(g, theta) + lift(h, theta), atol=1e-12)

    def test_composition(self, rng):
        for _ in range(self.N):
            k = int(rng.integers(2, 6))
            theta = random_simplex_points(rng, 1, k)[0]
            g, h = random_step_cdf(rng), random_step_cdf(rng)
            np.testing.assert_allclose(lift(lambda u: g(h(u)), theta), lift(g, lift(h, theta)), atol=1e-10)

    def test_identity(self, rng):
        thetas = random_simplex_points(rng, self.N, 4)
        np.testing.assert_allclose(lift(lambda u: u, thetas), thetas, atol=1e-12)

    def test_simplex_preservation(self, rng):
        for _ in range(self.N):
            k = int(rng.integers(2, 6))
            theta = random_simplex_points(rng, 1, k)[0]
            lifted = lift(random_step_cdf(rng), theta)
            assert lifted.min() >= -1e-12
            assert lifted.sum() <= 1 + 1e-12

    def test_inverse(self, rng):
        for _ in range(self.N):
            k = int(rng.integers(2, 6))
            theta = random_simplex_points(rng, 1, k)[0]
            forward, inverse = random_increasing_cdf(rng)
            np.testing.assert_allclose(lift(inverse, lift(forward, theta)), theta, atol=1e-10)
            np.testing.assert_allclose(lift(forward, lift(inverse, theta)), theta, atol=1e-10)


class TestBernstein:

    @pytest.mark.parametrize("s", [1, 2, 5, 40, 300])
    def test_reproduces_linear(self, s):
        grid = np.linspace(0, 1, 101)
        np.testing.assert_allclose(bernstein(lambda u: 0.3 - 2.0 * u, s, grid), 0.3 - 2.0 * grid, atol=1e-12)

    def test_degree_one(self):
        h = lambda u: np.cos(3 * u)  # noqa: E731
        u = 0.37
        assert bernstein(h, 1, u) == pytest.approx(h(0.0) * (1 - u) + h(1.0) * u)

    def test_square_at_half(self):
        assert bernstein(lambda u: u ** 2, 2, 0.5) == pytest.approx(0.375)

    def test_scalar_in_scalar_out(self):
        assert isinstance(bernstein(lambda u: u, 3, 0.2), float)

    def test_large_degree_is_finite(self):
        values = bernstein(lambda u: u ** 2, 2000, np.linspace(0, 1, 11))
        assert np.all(np.isfinite(values))

    def test_degree_below_one(self):
        with pytest.raises(DomainError):
            bernstein(lambda u: u, 0, 0.5)

    def test_argument_outside_unit_interval(self):
        with pytest.raises(DomainError):
            bernstein(lambda u: u, 3, 1.2)

    @pytest.mark.parametrize("h", [lambda u: u ** 2, lambda u: np.abs(u - 0.5)])
    def test_sup_distance_shrinks(self, h):
        distances = [sup_distance(h, s) for s in (4, 16, 64, 256)]
        assert all(a >= b for a, b in zip(distances, distances[1:]))
        assert distances[-1] < 0.05

    def test_derivative_of_increasing_step_mixture(self):
        steps = np.array([0.2, 0.45, 0.7])
        weights = np.array([0.5, 0.3, 0.2])
        h = lambda u: (weights * (np.asarray(u)[..., None] >= steps)).sum(axis=-1)  # noqa: E731
        grid = np.linspace(0, 1, 1002)[1:-1]
        for s in (4, 16, 64):
            assert np.all(bernstein_derivative(h, s, grid) > 0)

    def test_derivative_of_square(self):
        # B_2(u^2) = u/2 + u^2/2
        grid = np.linspace(0, 1, 11)
        np.testing.assert_allclose(bernstein_derivative(lambda u: u ** 2, 2, grid), 0.5 + grid, atol=1e-12)
