import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from latentdp import mechanisms as m
from latentdp.mechanisms import GAUSSIAN, LAPLACE, NoiseSpec, PrivacyParams, Sensitivity


def corner_distances(c, n):
    """Brute force: max l1 and l2 distance over all pairs of corners of [-c, c]^n."""
    corners = np.array(list(itertools.product([-c, c], repeat=n)))
    diff = corners[:, None, :] - corners[None, :, :]
    return np.abs(diff).sum(-1).max(), np.sqrt((diff**2).sum(-1)).max()


class TestSensitivity:
    def test_l1_values(self):
        assert m.l1_sensitivity_clv(1, 1) == 2
        assert m.l1_sensitivity_clv(0.1, 640) == pytest.approx(128, abs=1e-12)

    def test_l1_matches_box_corners(self):
        l1, _ = corner_distances(0.5, 3)
        assert l1 == pytest.approx(3.0)
        assert m.l1_sensitivity_clv(0.5, 3) == l1

    def test_l2_values(self):
        assert m.l2_sensitivity_clv(0.1, 15360) == pytest.approx(24.79, abs=0.005)
        assert m.l2_sensitivity_clv(0.1, 3640) == pytest.approx(12.07, abs=0.005)
        assert m.l2_sensitivity_clv(1, 1) == 2

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    @pytest.mark.parametrize("c", [0.1, 0.5, 1.0])
    def test_brute_force_equivalence(self, c, n):
        l1, l2 = corner_distances(c, n)
        assert m.l1_sensitivity_clv(c, n) == pytest.approx(l1, rel=1e-15)
        assert m.l2_sensitivity_clv(c, n) == pytest.approx(l2, rel=1e-15)

    def test_norm_clip_values(self):
        assert m.l1_sensitivity_norm_clip(1, 4) == 4
        assert m.l1_sensitivity_norm_clip(0.1, 1024) == pytest.approx(6.4)

    def test_norm_clip_sampling_oracle(self):
        rng = np.random.default_rng(3)
        c, n = 1.0, 3
        a = rng.normal(size=(1_000_000, n))
        b = rng.normal(size=(1_000_000, n))
        a *= np.minimum(1, c / np.linalg.norm(a, axis=1))[:, None]
        b *= np.minimum(1, c / np.linalg.norm(b, axis=1))[:, None]
        sampled = np.abs(a - b).sum(1).max()
        bound = m.l1_sensitivity_norm_clip(c, n)
        assert sampled <= bound + 1e-12
        diag = np.full(n, c / math.sqrt(n))
        assert np.abs(diag - (-diag)).sum() == pytest.approx(bound)
        assert sampled > 0.9 * bound

    @pytest.mark.parametrize("bad", [(0, 3), (-1, 3), (1, 0), (1, -2), (1, 2.5)])
    def test_invalid_arguments(self, bad):
        for f in (m.l1_sensitivity_clv, m.l2_sensitivity_clv, m.l1_sensitivity_norm_clip):
            with pytest.raises(ValueError):
                f(*bad)

    @given(st.floats(1e-3, 10), st.integers(1, 10_000))
    def test_closed_forms(self, c, n):
        s = Sensitivity.for_clipping(c, n)
        assert s.l1 == 2 * c * n
        assert s.l2 == 2 * c * math.sqrt(n)
        assert s.l2 <= s.l1 + 1e-12


class TestCalibration:
    def test_gaussian_sigma_unpruned(self):
        p = PrivacyParams(500, 1e-5, GAUSSIAN)
        assert m.gaussian_sigma(24.787, p) == pytest.approx(0.2402, abs=1e-4)

    def test_gaussian_sigma_pruned(self):
        p = PrivacyParams(500, 1e-5, GAUSSIAN)
        assert m.gaussian_sigma(12.066, p) == pytest.approx(0.1169, abs=1e-4)

    def test_gaussian_scaling_law(self):
        a = m.gaussian_sigma(3.0, PrivacyParams(2.0, 1e-6, GAUSSIAN))
        b = m.gaussian_sigma(3.0, PrivacyParams(4.0, 1e-6, GAUSSIAN))
        assert b == pytest.approx(a / 2, rel=1e-15)

    @given(st.floats(0.1, 100), st.floats(0.1, 1000), st.floats(1e-9, 0.5))
    def test_gaussian_monotone(self, d2, eps, delta):
        base = m.gaussian_sigma(d2, PrivacyParams(eps, delta, GAUSSIAN))
        assert m.gaussian_sigma(d2, PrivacyParams(eps * 1.5, delta, GAUSSIAN)) < base
        assert m.gaussian_sigma(d2 * 1.5, PrivacyParams(eps, delta, GAUSSIAN)) > base
        assert m.gaussian_sigma(d2, PrivacyParams(eps, delta / 2, GAUSSIAN)) > base

    def test_gaussian_needs_delta(self):
        with pytest.raises(ValueError):
            PrivacyParams(1.0, 0.0, GAUSSIAN)

    def test_laplace_rejects_delta(self):
        with pytest.raises(ValueError):
            PrivacyParams(1.0, 1e-5, LAPLACE)

    def test_laplace_scale(self):
        assert m.laplace_scale(2, PrivacyParams(2)) == 1
        assert m.laplace_scale(m.l1_sensitivity_clv(0.1, 640), PrivacyParams(100)) == pytest.approx(1.28)

    def test_laplace_scale_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            m.laplace_scale(0, PrivacyParams(1))
        with pytest.raises(ValueError):
            PrivacyParams(0)

    def test_infinite_epsilon_is_not_a_float(self):
        p = PrivacyParams.non_private()
        assert not p.is_private
        assert m.noise_spec(Sensitivity.for_clipping(0.1, 10), p) is None
        assert m.parse_epsilon("inf") is None
        assert m.parse_epsilon(float("inf")) is None
        assert m.parse_epsilon("2.5") == 2.5

    def test_calibration_report_has_sigma_and_variance(self):
        rep = m.calibration_report(Sensitivity.for_clipping(0.1, 15360), PrivacyParams(500, 1e-5, GAUSSIAN))
        assert rep["sigma"] == pytest.approx(0.2402, abs=1e-4)
        assert rep["sigma_squared"] == pytest.approx(0.2402**2, abs=1e-4)
        assert rep["sensitivity_l2"] == pytest.approx(24.787, abs=1e-3)


class TestSampling:
    def test_deterministic(self):
        spec = NoiseSpec(LAPLACE, 1.0, 50)
        a = m.sample_noise(spec, np.random.default_rng(7))
        b = m.sample_noise(spec, np.random.default_rng(7))
        assert a.tobytes() == b.tobytes()

    def test_laplace_moments(self):
        b = 1.7
        x = m.sample_noise(NoiseSpec(LAPLACE, b, 1_000_000), np.random.default_rng(0))
        assert abs(x.mean()) <= 5 * math.sqrt(2) * b / 1e3
        assert x.var() == pytest.approx(2 * b * b, rel=0.02)

    def test_gaussian_moments(self):
        s = 0.3
        x = m.sample_noise(NoiseSpec(GAUSSIAN, s, 1_000_000), np.random.default_rng(1))
        assert abs(x.mean()) <= 5 * s / 1e3
        assert x.var() == pytest.approx(s * s, rel=0.02)

    def test_invalid_spec(self):
        for scale in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(ValueError):
                NoiseSpec(LAPLACE, scale, 3)


class TestPrivatize:
    def test_identity_without_privacy(self):
        z = np.random.default_rng(0).uniform(-0.1, 0.1, 20)
        out = m.privatize_latent(z, Sensitivity.for_clipping(0.1, 20), PrivacyParams.non_private(), np.random.default_rng(1))
        np.testing.assert_array_equal(out, z)

    def test_laplace_distribution_ks(self):
        rng = np.random.default_rng(11)
        sens = Sensitivity(l1=1.0, l2=1.0, clip_constant=0.5, dimension=1)
        draws = np.array([m.privatize_latent(np.zeros(1), sens, PrivacyParams(1.0), rng)[0] for _ in range(100_000)])
        assert stats.kstest(draws, stats.laplace(0, 1).cdf).pvalue > 0.01

    def test_pruned_coordinates_stay_zero(self):
        keep = np.ones((4, 3), dtype=bool)
        keep[:, 1] = False
        z = np.random.default_rng(0).uniform(-0.1, 0.1, (4, 3))
        sens = Sensitivity.for_clipping(0.1, 8)
        out = m.privatize_latent(z, sens, PrivacyParams(1.0), np.random.default_rng(2), keep)
        assert np.all(out[:, 1] == 0.0)
        assert np.all(out[:, [0, 2]] != z[:, [0, 2]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            m.privatize_latent(np.zeros(5), Sensitivity.for_clipping(0.1, 4), PrivacyParams(1.0), np.random.default_rng(0))


class TestBudget:
    def test_compose(self):
        assert m.compose_budget(2, 3) == 6
        assert m.compose_budget(500, 1) == 500
        assert m.compose_budget(m.compose_budget(0.7, 2), 2) == m.compose_budget(0.7, 4)

    @pytest.mark.parametrize("n,expected", [(25000, 1e-5), (161297, 1e-6), (1904197, 1e-7)])
    def test_delta_guideline(self, n, expected):
        assert m.delta_guideline(n) == pytest.approx(expected, rel=1e-12)

    @given(st.integers(1, 10**9))
    def test_delta_guideline_is_largest_power_below(self, n):
        d = m.delta_guideline(n)
        assert d < 1 / n
        assert d * 10 >= 1 / n * (1 - 1e-12)


class TestEmpiricalRatio:
    def test_same_input_ratio_near_one(self):
        mech = m.clipped_laplace_mechanism(1.0, 1.0)
        r = m.empirical_privacy_ratio(mech, 0.3, 0.3, 50, 400_000, np.random.default_rng(0))
        assert 1.0 <= r < 1.1

    def test_bound_holds(self):
        mech = m.clipped_laplace_mechanism(1.0, 1.0)
        r = m.empirical_privacy_ratio(mech, -1.0, 1.0, 50, 1_000_000, np.random.default_rng(1))
        assert r <= math.e * 1.1

    def test_halved_noise_violates(self):
        spec = NoiseSpec(LAPLACE, 1.0, 1)

        def weak(value, size, rng):
            return float(np.clip(value, -1, 1)) + m.sample_noise(spec, rng, size)

        r = m.empirical_privacy_ratio(weak, -1.0, 1.0, 50, 1_000_000, np.random.default_rng(2))
        assert r > math.e

    def test_empty_overlap(self):
        def far(value, size, rng):
            return np.full(size, value * 1e6)

        with pytest.raises(m.EmptyOverlapError):
            m.empirical_privacy_ratio(far, -1.0, 1.0, 10, 5000, np.random.default_rng(0))


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_noise_reproducible_for_any_seed(seed):
    spec = NoiseSpec(GAUSSIAN, 0.5, 16)
    assert np.array_equal(m.sample_noise(spec, np.random.default_rng(seed)), m.sample_noise(spec, np.random.default_rng(seed)))
