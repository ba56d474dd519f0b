import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from prefield.gridfield import (
    aggregate_features,
    convolve_oracle_1d,
    downweight,
    fast_erf,
    interpolate,
    load_pyramid,
    make_level,
    make_pyramid,
    normalized_weight_decay,
    save_pyramid,
)

from oracles import brute_force_interpolate, gaussian_convolve_1d_closed_form

# erf(1/sqrt(8)) to 16 digits (mpmath, 30-digit evaluation).
ERF_1_OVER_SQRT8 = 0.3829249225480262


class TestFastErf:
    def test_zero(self):
        assert fast_erf(0.0) == 0.0

    def test_saturates(self):
        assert fast_erf(np.inf) == 1.0
        assert fast_erf(-np.inf) == -1.0
        assert fast_erf(40.0) == pytest.approx(1.0, abs=1e-12)

    def test_max_error_below_one_percent(self):
        x = np.linspace(-4.0, 4.0, 100_001)
        err = np.abs(fast_erf(x) - erf(x)).max()
        print(f"fast_erf max |error| on [-4, 4]: {err:.6f}")
        assert err <= 0.01

    def test_odd_symmetry(self):
        x = np.linspace(0, 4, 1000)
        np.testing.assert_array_equal(fast_erf(-x), -fast_erf(x))


class TestDownweight:
    def test_zero_sigma_is_one(self):
        assert downweight(0.0, 1024) == 1.0

    def test_unit_sigma_n_product(self):
        assert downweight(1.0, 1) == pytest.approx(ERF_1_OVER_SQRT8, abs=1e-15)
        assert downweight(0.5, 2) == pytest.approx(ERF_1_OVER_SQRT8, abs=1e-15)

    def test_monotone_decreasing(self):
        sigmas = np.linspace(0.0, 2.0, 200)
        w = downweight(sigmas, 64)
        assert np.all(np.diff(w) <= 0)

    @given(st.floats(0, 1e3), st.integers(1, 8192))
    @settings(max_examples=200, deadline=None)
    def test_in_unit_interval(self, sigma, n):
        w = downweight(sigma, n)
        assert 0.0 <= w <= 1.0

    def test_fast_variant_close_to_exact(self):
        sigmas = np.linspace(0.0, 1.0, 100)
        gap = np.abs(downweight(sigmas, 16, use_fast_erf=True) - downweight(sigmas, 16))
        assert gap.max() <= 0.01


class TestInterpolate:
    def test_vertex_identity(self):
        rng = np.random.default_rng(0)
        level = make_level(4, 3, dim=2, rng=rng, g_init=1.0)
        for i in range(5):
            for j in range(5):
                x = np.array([i / 4, j / 4])
                row = i + 5 * j
                np.testing.assert_allclose(
                    interpolate(level, x), level.values[row].astype(float), atol=1e-15
                )

    def test_linear_midpoint(self):
        level = make_level(1, 1, dim=1)
        level.values = np.array([[0.0], [1.0]], dtype=np.float32)
        assert interpolate(level, np.array([0.5]))[0] == 0.5
        assert interpolate(level, np.array([0.25]))[0] == 0.25

    def test_clamps_out_of_domain(self):
        level = make_level(2, 1, dim=1, rng=np.random.default_rng(1), g_init=1.0)
        np.testing.assert_array_equal(
            interpolate(level, np.array([-3.0])), interpolate(level, np.array([0.0]))
        )
        np.testing.assert_array_equal(
            interpolate(level, np.array([7.0])), interpolate(level, np.array([1.0]))
        )

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_matches_brute_force(self, dim):
        rng = np.random.default_rng(2 + dim)
        level = make_level(5, 2, dim=dim, rng=rng, g_init=1.0)
        for _ in range(50):
            x = rng.uniform(-0.1, 1.1, size=dim)
            got = interpolate(level, x)
            want = brute_force_interpolate(
                level.values.astype(float), 5, dim, 2, x
            )
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(9)
        level = make_level(8, 2, dim=3, rng=rng, g_init=1.0)
        xs = rng.uniform(0, 1, size=(10, 3))
        batch = interpolate(level, xs)
        for i, x in enumerate(xs):
            np.testing.assert_array_equal(batch[i], interpolate(level, x))


class TestStorageModes:
    def test_forced_hash_matches_dense_bit_exact(self):
        rng = np.random.default_rng(3)
        dense = make_level(6, 2, dim=3, kind="dense", rng=rng, g_init=1.0)
        hashed = make_level(6, 2, dim=3, kind="hashed", table_size=128**3)
        hashed.values = dense.values.copy()
        xs = np.random.default_rng(4).uniform(0, 1, size=(100, 3))
        np.testing.assert_array_equal(interpolate(dense, xs), interpolate(hashed, xs))

    def test_auto_mode_hashes_only_above_table_size(self):
        small = make_level(128, 1, dim=3)
        big = make_level(256, 1, dim=3)
        assert small.kind == "dense"
        assert big.kind == "hashed"
        assert big.values.shape[0] == 128**3

    def test_hash_wraps_into_table(self):
        level = make_level(256, 1, dim=3, kind="hashed", table_size=1024)
        xs = np.random.default_rng(5).uniform(0, 1, size=(50, 3))
        out = interpolate(level, xs)
        assert out.shape == (50, 1) and np.all(np.isfinite(out))


class TestAggregateFeatures:
    def _pyramid(self, seed=0):
        return make_pyramid([2, 4, 8], channels=2, dim=1, seed=seed, g_init=1e-4)

    def test_zero_sigma_is_plain_mean(self):
        pyr = self._pyramid()
        xs = np.array([[0.2], [0.5], [0.9]])
        out = aggregate_features(pyr, (xs, np.zeros(3)))
        feats = []
        for level in pyr.levels:
            feats.append(interpolate(level, xs).mean(axis=0))
        want_feats = np.concatenate(feats)
        np.testing.assert_allclose(out[:6], want_feats, atol=1e-15)
        # Scale features sit after all feature channels, one per level, at
        # their positive bound when nothing is downweighted.
        for i, level in enumerate(pyr.levels):
            bound = np.sqrt(pyr.g_init**2 + np.mean(level.values.astype(float) ** 2))
            assert out[6 + i] == pytest.approx(bound, rel=1e-12)

    def test_huge_sigma_suppresses_features(self):
        pyr = self._pyramid()
        xs = np.array([[0.3], [0.6]])
        out = aggregate_features(pyr, (xs, np.full(2, 1e12)))
        np.testing.assert_allclose(out[:6], 0.0, atol=1e-12)
        assert np.all(out[6:] < 0)  # omega ~ 0 pushes 2*mean(omega)-1 to -1

    def test_zero_pyramid_scale_feature_is_g_init(self):
        pyr = make_pyramid([2, 4], channels=1, dim=1, seed=None, g_init=1e-4)
        for level in pyr.levels:
            level.values[:] = 0.0
        out = aggregate_features(pyr, (np.array([[0.4]]), np.zeros(1)))
        assert out[2] == 1e-4 and out[3] == 1e-4

    def test_order_invariance(self):
        pyr = self._pyramid(7)
        rng = np.random.default_rng(8)
        xs = rng.uniform(0, 1, size=(6, 1))
        sig = rng.uniform(0, 0.3, size=6)
        a = aggregate_features(pyr, (xs, sig))
        perm = rng.permutation(6)
        b = aggregate_features(pyr, (xs[perm], sig[perm]))
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_scale_feature_bounded(self):
        pyr = self._pyramid(11)
        rng = np.random.default_rng(12)
        for _ in range(20):
            xs = rng.uniform(0, 1, size=(6, 1))
            sig = rng.uniform(0, 2.0, size=6)
            out = aggregate_features(pyr, (xs, sig))
            for i, level in enumerate(pyr.levels):
                bound = np.sqrt(pyr.g_init**2 + np.mean(level.values.astype(float) ** 2))
                assert abs(out[6 + i]) <= bound + 1e-15

    def test_empty_sample_set_rejected(self):
        with pytest.raises(ValueError):
            aggregate_features(self._pyramid(), (np.empty((0, 1)), np.empty(0)))

    def test_feature_vector_length(self):
        pyr = make_pyramid([4, 8, 16], channels=[1, 2, 3], dim=1, seed=1)
        out = aggregate_features(pyr, (np.array([[0.5]]), np.zeros(1)))
        assert out.shape == (1 + 2 + 3 + 3,)


class TestNormalizedWeightDecay:
    def test_constant_pyramid_closed_form(self):
        pyr = make_pyramid([2, 4, 8, 16], channels=1, dim=1, seed=None)
        for level in pyr.levels:
            level.values[:] = 0.5
        assert normalized_weight_decay(pyr) == 4 * 0.5**2

    def test_zero_pyramid(self):
        pyr = make_pyramid([2, 4], channels=2, dim=2, seed=None)
        assert normalized_weight_decay(pyr) == 0.0

    def test_matches_elementwise_recompute(self):
        pyr = make_pyramid([2, 4, 8], channels=3, dim=2, seed=3, g_init=0.5)
        want = 0.0
        for level in pyr.levels:
            v = level.values.astype(np.float64)
            want += np.sum(v * v) / v.size
        assert normalized_weight_decay(pyr) == pytest.approx(want, abs=1e-12)


class TestConvolveOracle1D:
    def _level(self, n=16, seed=5):
        return make_level(n, 1, dim=1, rng=np.random.default_rng(seed), g_init=1.0)

    def test_requires_1d(self):
        level = make_level(4, 1, dim=2)
        with pytest.raises(ValueError):
            convolve_oracle_1d(level, 0.5, 0.1)

    def test_small_sigma_converges_to_interpolation(self):
        level = self._level()
        got = convolve_oracle_1d(level, 0.37, 1e-7)
        want = interpolate(level, np.array([0.37]))
        np.testing.assert_allclose(got, want, atol=1e-9)

    def test_constant_level_invariant(self):
        level = make_level(8, 1, dim=1)
        level.values[:] = 0.75
        for sigma in (0.01, 0.1, 1.0):
            assert convolve_oracle_1d(level, 0.5, sigma)[0] == pytest.approx(0.75, abs=1e-12)

    def test_stable_under_resolution_doubling(self):
        level = self._level(n=64, seed=6)
        for sigma in (0.003, 0.05, 0.3):
            a = convolve_oracle_1d(level, 0.45, sigma, min_points=1024)
            b = convolve_oracle_1d(level, 0.45, sigma, min_points=2048)
            assert abs(a[0] - b[0]) <= 1e-6

    def test_matches_closed_form_gaussian_integral(self):
        level = self._level(n=32, seed=7)
        knots = np.arange(33) / 32
        values = level.values[:, 0].astype(float)
        for mean, sigma in [(0.5, 0.02), (0.1, 0.05), (0.9, 0.01)]:
            got = convolve_oracle_1d(level, mean, sigma)[0]
            want = gaussian_convolve_1d_closed_form(knots, values, mean, sigma)
            # The quadrature windows at +-5 sigma; the closed form does not.
            assert got == pytest.approx(want, abs=2e-6)


class TestPyramidIO:
    def test_round_trip(self, tmp_path):
        pyr = make_pyramid([4, 8, 16], channels=[1, 2, 1], dim=2, seed=13, g_init=2e-3)
        path = tmp_path / "pyr.bin"
        save_pyramid(pyr, path)
        back = load_pyramid(path, domain=(pyr.lo, pyr.hi))
        assert back.dim == 2 and back.g_init == 2e-3
        assert back.resolutions == [4, 8, 16]
        for a, b in zip(pyr.levels, back.levels):
            assert (a.kind, a.table_size, a.channels) == (b.kind, b.table_size, b.channels)
            np.testing.assert_array_equal(a.values, b.values)

    def test_header_layout(self, tmp_path):
        pyr = make_pyramid([2], channels=1, dim=1, seed=None, g_init=1e-4)
        path = tmp_path / "tiny.bin"
        save_pyramid(pyr, path)
        raw = path.read_bytes()
        header = np.frombuffer(raw[:24], dtype="<i4")
        np.testing.assert_array_equal(header, [1, 1, 2, 1, 0, 128**3])
        g_init = np.frombuffer(raw[24:32], dtype="<f8")[0]
        assert g_init == 1e-4
        assert len(raw) == 32 + 4 * 3  # three float32 vertices

    def test_save_load_save_identical_bytes(self, tmp_path):
        pyr = make_pyramid([4, 8], channels=2, dim=3, seed=21)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_pyramid(pyr, p1)
        save_pyramid(load_pyramid(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestPyramidConstruction:
    def test_default_configuration(self):
        from prefield.gridfield import default_pyramid

        pyr = default_pyramid()
        assert pyr.resolutions == [16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192]
        assert all(lvl.channels == 4 for lvl in pyr.levels)
        assert [lvl.kind for lvl in pyr.levels] == ["dense"] * 4 + ["hashed"] * 6
        assert (pyr.lo, pyr.hi) == (-2.0, 2.0)

    def test_resolutions_must_increase(self):
        with pytest.raises(ValueError):
            make_pyramid([4, 4, 8], dim=1)
        with pytest.raises(ValueError):
            make_pyramid([8, 4], dim=1)
