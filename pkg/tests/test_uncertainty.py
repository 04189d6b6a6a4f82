import numpy as np
import pytest

from slcq import uncertainty as unc


class TestGridSamples:
    def test_seven_point_grid(self):
        spec = unc.UncertaintyChannelSpec.grid(0.21, 7)
        values = spec.grid_values()
        assert np.allclose(values, [0.82, 0.88, 0.94, 1.00, 1.06, 1.12, 1.18], atol=1e-12)

    def test_zero_uncertainty(self):
        spec = unc.UncertaintyChannelSpec.grid(0.0, 1)
        assert np.allclose(spec.grid_values(), [1.0])

    def test_two_channel_product(self):
        specs = [unc.UncertaintyChannelSpec.grid(0.21, 7)] * 2
        samples = unc.grid_samples(specs)
        assert len(samples) == 49
        arr = samples.as_array()
        assert arr.shape == (49, 2)

    def test_centered_grid(self):
        spec = unc.UncertaintyChannelSpec.grid(0.21, 7, center=0.0)
        assert np.allclose(spec.grid_values(),
                           [-0.18, -0.12, -0.06, 0.0, 0.06, 0.12, 0.18], atol=1e-12)

    def test_symmetric_about_center(self):
        for center in (1.0, 0.0):
            values = unc.UncertaintyChannelSpec.grid(0.3, 9, center=center).grid_values()
            assert np.allclose(np.sort(values), np.sort(2 * center - values), atol=1e-12)

    def test_size_is_product_of_counts(self):
        specs = [unc.UncertaintyChannelSpec.grid(0.2, n) for n in (3, 5, 7)]
        assert len(unc.grid_samples(specs)) == 3 * 5 * 7


class TestUniformSamples:
    def test_zero_width_collapses(self):
        specs = [unc.UncertaintyChannelSpec.uniform(0.0)]
        samples = unc.random_uniform_samples(specs, 50, seed=3)
        assert np.all(samples.as_array() == 1.0)

    def test_deterministic_given_seed(self):
        specs = [unc.UncertaintyChannelSpec.uniform(0.21)]
        a = unc.random_uniform_samples(specs, 100, seed=11)
        b = unc.random_uniform_samples(specs, 100, seed=11)
        assert np.array_equal(a.as_array(), b.as_array())

    def test_support(self):
        specs = [unc.UncertaintyChannelSpec.uniform(0.21)]
        arr = unc.random_uniform_samples(specs, 200, seed=5).as_array()
        assert arr.min() >= 0.79 and arr.max() <= 1.21

    def test_kolmogorov_smirnov(self):
        # seeded, so this is a deterministic check of uniformity
        specs = [unc.UncertaintyChannelSpec.uniform(0.5)]
        arr = np.sort(unc.random_uniform_samples(specs, 10_000, seed=77).as_array()[:, 0])
        cdf = (arr - 0.5) / 1.0
        n = arr.size
        empirical_hi = np.arange(1, n + 1) / n
        empirical_lo = np.arange(0, n) / n
        ks = max(np.abs(empirical_hi - cdf).max(), np.abs(cdf - empirical_lo).max())
        assert ks < 1.63 / np.sqrt(n)  # 1% critical value


class TestTruncatedGaussian:
    def test_support_is_three_sigma(self):
        specs = [unc.UncertaintyChannelSpec.truncated_gaussian(0.07)]
        arr = unc.truncated_gaussian_samples(specs, 2000, seed=9).as_array()
        assert arr.min() >= 1 - 0.21 and arr.max() <= 1 + 0.21

    def test_sample_mean_matches_quadrature(self):
        spec = unc.UncertaintyChannelSpec.truncated_gaussian(0.07)
        arr = unc.truncated_gaussian_samples([spec], 2000, seed=13).as_array()
        expected = unc.truncated_gaussian_mean(spec)
        assert abs(expected - 1.0) < 1e-12  # symmetric about the mean
        assert abs(arr.mean() - expected) < 0.01

    def test_degenerate_width(self):
        specs = [unc.UncertaintyChannelSpec.truncated_gaussian(1e-6)]
        arr = unc.truncated_gaussian_samples(specs, 100, seed=1).as_array()
        assert np.abs(arr - 1.0).max() < 1e-5

    def test_determinism(self):
        specs = [unc.UncertaintyChannelSpec.truncated_gaussian(0.07)] * 3
        a = unc.truncated_gaussian_samples(specs, 500, seed=42)
        b = unc.truncated_gaussian_samples(specs, 500, seed=42)
        assert np.array_equal(a.as_array(), b.as_array())

    def test_rejects_wrong_kind(self):
        with pytest.raises(ValueError):
            unc.truncated_gaussian_samples([unc.UncertaintyChannelSpec.uniform(0.1)], 10, seed=0)


class TestSpecValidation:
    def test_halfwidth_range(self):
        with pytest.raises(ValueError):
            unc.UncertaintyChannelSpec.grid(1.5, 3)

    def test_grid_needs_points(self):
        with pytest.raises(ValueError):
            unc.UncertaintyChannelSpec.grid(0.2, 0)

    def test_gaussian_needs_width(self):
        with pytest.raises(ValueError):
            unc.UncertaintyChannelSpec.truncated_gaussian(0.0)

    def test_nominal_sample(self):
        specs = [unc.UncertaintyChannelSpec.grid(0.2, 5), unc.UncertaintyChannelSpec.grid(0.2, 5, center=0.0)]
        s = unc.nominal_sample(specs)
        assert len(s) == 1 and s.samples[0].values == (1.0, 0.0)
