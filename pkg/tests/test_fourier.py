import numpy as np
import pytest
from hypothesis import given, strategies as st

from ntcircle import (
    GOLDEN_MEAN,
    PeriodicScalar,
    SmallDivisorError,
    analyze,
    average,
    dealias,
    derivative,
    grid,
    resample,
    shift,
    solve_contractive,
    solve_small_divisor,
    synthesize,
    tail_fraction,
)

TWO_PI = 2.0 * np.pi


def trig(n, terms):
    """Real trig polynomial sum a*cos(2 pi k x) + b*sin(2 pi k x)."""
    x = grid(n)
    v = np.zeros(n)
    for k, a, b in terms:
        v += a * np.cos(TWO_PI * k * x) + b * np.sin(TWO_PI * k * x)
    return PeriodicScalar(v)


def rand_scalar(n, kmax, seed):
    rng = np.random.default_rng(seed)
    terms = [(k, rng.normal(), rng.normal()) for k in range(kmax + 1)]
    return trig(n, terms)


class TestPeriodicScalar:
    def test_rejects_odd_sizes(self):
        with pytest.raises(ValueError):
            PeriodicScalar(np.zeros(7))

    def test_rejects_non_finite(self):
        v = np.zeros(8)
        v[3] = np.nan
        with pytest.raises(ValueError):
            PeriodicScalar(v)

    def test_immutable(self):
        u = PeriodicScalar(np.zeros(8))
        with pytest.raises(AttributeError):
            u.values = np.ones(8)
        with pytest.raises(ValueError):
            u.values[0] = 1.0

    def test_grid_mismatch_raises(self):
        with pytest.raises(ValueError):
            PeriodicScalar(np.zeros(8)) + PeriodicScalar(np.zeros(16))

    def test_arithmetic_pointwise(self):
        u = rand_scalar(32, 5, 1)
        v = rand_scalar(32, 5, 2)
        np.testing.assert_allclose((u * v - 2.0).values,
                                   u.values * v.values - 2.0)


class TestAnalysisRoundtrip:
    @given(st.integers(0, 6), st.integers(3, 6))
    def test_roundtrip_exact(self, kmax, logn):
        n = 2 ** logn
        u = rand_scalar(n, min(kmax, n // 2), seed=kmax + 10 * logn)
        back = synthesize(analyze(u))
        np.testing.assert_allclose(back.values, u.values, atol=1e-13)

    def test_average_is_mode_zero(self):
        u = trig(64, [(0, 1.7, 0.0), (3, 0.5, 0.2)])
        assert average(u) == pytest.approx(1.7, abs=1e-14)

    def test_nyquist_mode_roundtrip(self):
        # cos(pi n x) sampled on n points alternates +-1; the rfft holds
        # it as a single real amplitude that must survive the roundtrip
        n = 16
        u = trig(n, [(n // 2, 0.9, 0.0)])
        back = synthesize(analyze(u))
        np.testing.assert_allclose(back.values, u.values, atol=1e-13)


class TestDerivativeShift:
    def test_derivative_exact_on_modes(self):
        n = 64
        x = grid(n)
        u = trig(n, [(3, 0.0, 1.0)])     # sin(6 pi x)
        du = derivative(u)
        np.testing.assert_allclose(
            du.values, 3.0 * TWO_PI * np.cos(TWO_PI * 3 * x), atol=1e-11)

    def test_shift_exact_on_modes(self):
        n = 64
        x = grid(n)
        delta = 0.1234
        u = trig(n, [(2, 1.0, -0.4)])
        s = shift(u, delta)
        expect = (np.cos(TWO_PI * 2 * (x + delta))
                  - 0.4 * np.sin(TWO_PI * 2 * (x + delta)))
        np.testing.assert_allclose(s.values, expect, atol=1e-12)

    @given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
    def test_shift_composes(self, d1, d2):
        u = rand_scalar(32, 6, 3)
        a = shift(shift(u, d1), d2)
        b = shift(u, d1 + d2)
        np.testing.assert_allclose(a.values, b.values, atol=1e-11)

    def test_shift_commutes_with_derivative(self):
        u = rand_scalar(64, 10, 4)
        a = shift(derivative(u), GOLDEN_MEAN)
        b = derivative(shift(u, GOLDEN_MEAN))
        np.testing.assert_allclose(a.values, b.values, atol=1e-9)


class TestResampleDealias:
    def test_refine_preserves_samples(self):
        u = rand_scalar(32, 10, 5)
        fine = resample(u, 128)
        np.testing.assert_allclose(fine.values[::4], u.values, atol=1e-12)

    def test_refine_then_coarsen_identity(self):
        u = rand_scalar(32, 16, 6)    # includes the Nyquist mode
        back = resample(resample(u, 128), 32)
        np.testing.assert_allclose(back.values, u.values, atol=1e-12)

    def test_dealias_zeroes_top_third(self):
        n = 128
        u = trig(n, [(5, 1.0, 0.0), (50, 1.0, 0.0)])   # 50 > 128/3
        clean = dealias(u)
        x = grid(n)
        np.testing.assert_allclose(
            clean.values, np.cos(TWO_PI * 5 * x), atol=1e-12)

    def test_tail_fraction_detects_band_edge(self):
        n = 64
        low = trig(n, [(2, 1.0, 0.0)])
        high = trig(n, [(30, 1.0, 0.0)])
        assert tail_fraction(low, 0.2) <= 1e-14
        assert tail_fraction(high, 0.2) == pytest.approx(1.0)


class TestCohomologicalSolvers:
    """Randomized residual checks of the two linear solvers."""

    @pytest.mark.parametrize("seed", range(5))
    def test_contractive_residual(self, seed):
        # sigma*xi - xi(. + omega) = eta
        sigma, omega = 0.8, GOLDEN_MEAN
        eta = rand_scalar(128, 30, seed)
        xi = solve_contractive(eta, sigma, omega)
        res = sigma * xi - shift(xi, omega) - eta
        assert res.sup() <= 1e-10 * max(1.0, eta.sup())

    @pytest.mark.parametrize("seed", range(5))
    def test_small_divisor_residual(self, seed):
        # xi - xi(. + omega) = eta - <eta>, solution has zero average
        omega = GOLDEN_MEAN
        eta = rand_scalar(128, 30, seed + 50)
        xi, mean = solve_small_divisor(eta, omega)
        res = xi - shift(xi, omega) - (eta - mean)
        assert res.sup() <= 1e-10 * max(1.0, eta.sup())
        assert abs(average(xi)) <= 1e-12
        assert mean == pytest.approx(average(eta), abs=1e-13)

    def test_small_divisor_rejects_resonant_rotation(self):
        eta = rand_scalar(64, 20, 9)
        with pytest.raises(SmallDivisorError):
            solve_small_divisor(eta, 0.25)   # k=4 divisor is exactly zero

    def test_contractive_rejects_expanding_factor(self):
        with pytest.raises(ValueError):
            solve_contractive(rand_scalar(32, 5, 1), 1.0, GOLDEN_MEAN)
