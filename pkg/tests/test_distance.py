import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefield.distance import (
    DistanceMap,
    PowerParams,
    power_transform,
    power_transform_inverse,
    to_metric,
    to_normalized,
)

LAMBDA_GRID = [-2.0, -1.5, -1.0, -0.25, 0.0, 0.5, 1.0, 2.0]


class TestPowerTransform:
    def test_identity_at_lambda_one(self):
        x = np.linspace(0, 1000, 101)
        np.testing.assert_array_equal(power_transform(x, 1.0), x)

    @pytest.mark.parametrize("lam", LAMBDA_GRID + [1e3, -1e3, np.inf, -np.inf])
    def test_zero_maps_to_zero(self, lam):
        assert power_transform(0.0, lam) == 0.0

    def test_hand_value_inverse_lambda(self):
        # |l-1|/l = -2, ((2/2 + 1)^-1 - 1) = -1/2, product = 1.
        assert power_transform(2.0, -1.0) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("lam", [-3.0, -1.5, -1.0, -0.25])
    def test_negative_lambda_bound(self, lam):
        x = np.linspace(0, 1e6, 1001)
        bound = (lam - 1.0) / lam
        assert np.all(power_transform(x, lam) < bound)

    def test_log_and_exp_branches(self):
        x = np.linspace(0, 5, 50)
        np.testing.assert_allclose(power_transform(x, 0.0), np.log1p(x), rtol=1e-15)
        np.testing.assert_allclose(power_transform(x, np.inf), np.expm1(x), rtol=1e-15)
        np.testing.assert_allclose(power_transform(x, -np.inf), -np.expm1(-x), rtol=1e-15)

    def test_continuity_at_removable_singularities(self):
        x = np.linspace(0, 100, 201)
        for lam0 in (0.0, 1.0):
            for eps in (1e-6, -1e-6):
                gap = np.abs(power_transform(x, lam0 + eps) - power_transform(x, lam0))
                assert gap.max() <= 1e-4

    def test_limit_consistency_at_1e3(self):
        x = np.linspace(0, 3, 31)[1:]
        hi = np.abs(power_transform(x, 1e3) / np.expm1(x) - 1)
        lo = np.abs(power_transform(x, -1e3) / (-np.expm1(-x)) - 1)
        assert hi.max() <= 1e-3
        assert lo.max() <= 1e-3

    @pytest.mark.parametrize("lam", LAMBDA_GRID + [1e3, -1e3])
    def test_unit_slope_at_origin(self, lam):
        h = 1e-6
        slope = power_transform(h, lam) / h
        assert slope == pytest.approx(1.0, rel=1e-3)

    @pytest.mark.parametrize("lam", [-2.0, -1.5, -0.25, 0.0, 0.5, 2.0, 3.0, 1e3, -1e3])
    def test_second_derivative_at_origin(self, lam):
        h = 1e-4
        second = (power_transform(2 * h, lam) - 2 * power_transform(h, lam)) / h**2
        expected = 1.0 if lam > 1 else -1.0
        assert second == pytest.approx(expected, abs=1e-3)

    def test_monotone_increasing(self):
        x = np.linspace(0, 50, 2001)
        for lam in LAMBDA_GRID:
            assert np.all(np.diff(power_transform(x, lam)) > 0)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            power_transform(-0.5, -1.5)
        with pytest.raises(ValueError):
            power_transform(np.nan, -1.5)
        with pytest.raises(ValueError):
            power_transform(1.0, np.nan)


class TestPowerTransformInverse:
    @pytest.mark.parametrize("lam", LAMBDA_GRID)
    def test_round_trip(self, lam):
        x = np.linspace(0, 1e3, 997)
        back = power_transform_inverse(power_transform(x, lam), lam)
        np.testing.assert_allclose(back, x, rtol=1e-9, atol=1e-9)

    def test_zero(self):
        for lam in LAMBDA_GRID:
            assert power_transform_inverse(0.0, lam) == 0.0

    def test_hand_inverse(self):
        assert power_transform_inverse(1.0, -1.0) == pytest.approx(2.0, rel=1e-12)

    def test_range_errors(self):
        bound = (-1.5 - 1.0) / -1.5  # 5/3
        with pytest.raises(ValueError):
            power_transform_inverse(bound, -1.5)
        with pytest.raises(ValueError):
            power_transform_inverse(1.0, -np.inf)
        with pytest.raises(ValueError):
            power_transform_inverse(-0.1, 0.5)

    @given(st.floats(0, 100), st.sampled_from(LAMBDA_GRID))
    @settings(max_examples=200, deadline=None)
    def test_round_trip_property(self, x, lam):
        assert power_transform_inverse(power_transform(x, lam), lam) == pytest.approx(
            x, rel=1e-9, abs=1e-9
        )


class TestDistanceMap:
    def test_endpoints(self):
        dmap = DistanceMap(t_near=0.0, t_far=10.0)
        assert to_normalized(dmap, 0.0) == (0.0, False)
        s, clamped = to_normalized(dmap, 10.0)
        assert s == pytest.approx(1.0, abs=1e-15) and not clamped
        assert to_metric(dmap, 0.0) == 0.0
        assert to_metric(dmap, 1.0) == pytest.approx(10.0, rel=1e-12)

    def test_monotone(self):
        dmap = DistanceMap(t_near=0.1, t_far=50.0)
        t = np.linspace(0.1, 50.0, 500)
        s, _ = to_normalized(dmap, t)
        assert np.all(np.diff(s) > 0)

    def test_clamp_flag(self):
        dmap = DistanceMap(t_near=1.0, t_far=2.0)
        s, clamped = to_normalized(dmap, 0.5)
        assert clamped and s == 0.0
        s, clamped = to_normalized(dmap, np.array([1.5, 3.0]))
        assert list(clamped) == [False, True]

    def test_round_trip(self):
        dmap = DistanceMap(t_near=0.0, t_far=100.0)
        rng = np.random.default_rng(7)
        s = rng.uniform(0, 1, 1000)
        s_back, _ = to_normalized(dmap, to_metric(dmap, s))
        np.testing.assert_allclose(s_back, s, atol=1e-9)

    def test_origin_slope_matches_curve_scale(self):
        # With t_near = 0 the map starts with slope input_scale / g(t_far).
        dmap = DistanceMap(t_near=0.0, t_far=20.0)
        g_far = dmap.params.curve(dmap.t_far)
        h = 1e-7
        s_h, _ = to_normalized(dmap, h)
        assert s_h / h == pytest.approx(dmap.params.input_scale / g_far, rel=1e-3)

    def test_identity_params_degenerate_to_affine(self):
        dmap = DistanceMap(params=PowerParams(lam=1.0, input_scale=1.0), t_near=2.0, t_far=6.0)
        t = np.linspace(2.0, 6.0, 9)
        s, _ = to_normalized(dmap, t)
        np.testing.assert_allclose(s, (t - 2.0) / 4.0, atol=1e-12)

    def test_out_of_range_s_errors(self):
        dmap = DistanceMap()
        with pytest.raises(ValueError):
            to_metric(dmap, 1.5)
        with pytest.raises(ValueError):
            to_metric(dmap, -0.1)

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            DistanceMap(t_near=2.0, t_far=1.0)
