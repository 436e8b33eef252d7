import numpy as np
import pytest

from ntcircle import Forcing, ParamPoint, StandardNonTwistMap, check_symmetry

PAR = ParamPoint(a=0.07, mu=0.55, eps=1.3)


def families():
    return [StandardNonTwistMap(0.8, v) for v in ("symmetric", "nonsymmetric")]


def rand_points(m, seed):
    rng = np.random.default_rng(seed)
    return rng.random(m), rng.uniform(-2.0, 2.0, m)


class TestForcing:
    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            Forcing("triangle")

    def test_symmetric_is_odd_about_half(self):
        p = Forcing("symmetric")
        x = np.linspace(0, 1, 101)
        np.testing.assert_allclose(p(x - 0.5), -p(x), atol=1e-15)
        assert p.odd_symmetric

    def test_nonsymmetric_breaks_oddness(self):
        p = Forcing("nonsymmetric")
        x = np.linspace(0, 1, 101)
        assert np.max(np.abs(p(x - 0.5) + p(x))) > 0.1
        assert not p.odd_symmetric

    @pytest.mark.parametrize("variant", ["symmetric", "nonsymmetric"])
    def test_deriv_matches_finite_difference(self, variant):
        p = Forcing(variant)
        x = np.linspace(0, 1, 37)
        h = 1e-6
        fd = (p(x + h) - p(x - h)) / (2 * h)
        np.testing.assert_allclose(p.deriv(x), fd, atol=1e-8)


class TestStandardNonTwistMap:
    def test_sigma_range_enforced(self):
        with pytest.raises(ValueError):
            StandardNonTwistMap(1.0)
        with pytest.raises(ValueError):
            StandardNonTwistMap(0.0)

    @pytest.mark.parametrize("fam", families(), ids=lambda f: f.name)
    def test_jacobian_det_is_sigma(self, fam):
        x, y = rand_points(200, 11)
        j = fam.jacobian(x, y, PAR)
        det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
        np.testing.assert_allclose(det, fam.sigma, atol=1e-12)

    @pytest.mark.parametrize("fam", families(), ids=lambda f: f.name)
    def test_jacobian_matches_finite_difference(self, fam):
        x, y = rand_points(40, 12)
        h = 1e-6
        j = fam.jacobian(x, y, PAR)
        for (i, wrt) in ((0, "x"), (1, "y")):
            dx, dy = (h, 0.0) if wrt == "x" else (0.0, h)
            fp = fam.eval_lift(x + dx, y + dy, PAR)
            fm = fam.eval_lift(x - dx, y - dy, PAR)
            np.testing.assert_allclose(j[0, i], (fp[0] - fm[0]) / (2 * h),
                                       atol=1e-6)
            np.testing.assert_allclose(j[1, i], (fp[1] - fm[1]) / (2 * h),
                                       atol=1e-6)

    @pytest.mark.parametrize("fam", families(), ids=lambda f: f.name)
    @pytest.mark.parametrize("which", ["a", "mu", "eps"])
    def test_parameter_derivatives_match_finite_difference(self, fam, which):
        x, y = rand_points(40, 13)
        h = 1e-6
        der = getattr(fam, "d_" + which)(x, y, PAR)
        pp = PAR.replace(**{which: getattr(PAR, which) + h})
        pm = PAR.replace(**{which: getattr(PAR, which) - h})
        fp = fam.eval_lift(x, y, pp)
        fm = fam.eval_lift(x, y, pm)
        np.testing.assert_allclose(der[0], (fp[0] - fm[0]) / (2 * h),
                                   atol=1e-6)
        np.testing.assert_allclose(der[1], (fp[1] - fm[1]) / (2 * h),
                                   atol=1e-6)

    def test_eval_wraps_x(self):
        fam = StandardNonTwistMap(0.8)
        x, y = fam.eval(np.array([0.9]), np.array([1.5]), PAR)
        assert 0.0 <= x[0] < 1.0

    def test_symmetric_family_conjugacy(self):
        # S F_a S = F_{-a} with S(x, y) = (x - 1/2, -y)
        fam = StandardNonTwistMap(0.8, "symmetric")
        assert check_symmetry(fam, PAR) <= 1e-12

    def test_nonsymmetric_family_has_no_conjugacy(self):
        fam = StandardNonTwistMap(0.8, "nonsymmetric")
        assert check_symmetry(fam, PAR) > 1e-3
