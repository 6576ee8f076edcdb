import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisac.channel import (ChannelParams, ErrorBall, channel_gain, channel_vector,
                           dbm_to_watts, error_radius, from_db, los_probability,
                           matched_beamformer, predicted_channel,
                           robust_snr_lmi_feasible, snr, steering_vector, to_db,
                           worst_case_snr)
from bisac.errors import InvalidCovariance, InvalidInput
from bisac.model import TargetState, UavPose

PARAMS = ChannelParams(e1=25.0, e2=0.112, beta0=1e-6, kappa_nlos=1.0, alpha=3.5,
                       n_t=16, p_t=10.0, sigma2_c=1e-14)
# Variant exercising the LoS/NLoS mixture away from the flattened default.
MIXED = ChannelParams(e1=25.0, e2=0.112, beta0=1e-6, kappa_nlos=0.01, alpha=2.0,
                      n_t=16, p_t=10.0, sigma2_c=1e-14)


def scalar_channel_gain(theta_deg, d, p):
    """Independent scalar evaluation of the mixed-link power gain."""
    p_los = 1.0 / (1.0 + p.e1 * math.exp(-p.e2 * (theta_deg - p.e1)))
    return p.beta0 * (p_los + (1.0 - p_los) * p.kappa_nlos) * d ** (-p.alpha)


class TestLosProbability:
    def test_at_offset_angle(self):
        assert los_probability(25.0, MIXED) == pytest.approx(1.0 / 26.0, rel=1e-12)

    def test_near_zenith_closed_form(self):
        expected = 1.0 / (1.0 + 25.0 * math.exp(-0.112 * 65.0))
        assert los_probability(90.0, MIXED) == pytest.approx(expected, rel=1e-12)

    def test_flat_when_slope_zero(self):
        p = ChannelParams(e1=25.0, e2=0.0, beta0=1e-6, kappa_nlos=0.5, alpha=2.0,
                          n_t=4, p_t=1.0, sigma2_c=1e-12)
        vals = {los_probability(t, p) for t in (0.0, 30.0, 60.0, 90.0)}
        assert vals == {1.0 / 26.0}

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidInput):
            los_probability(-1.0, MIXED)
        with pytest.raises(InvalidInput):
            los_probability(90.5, MIXED)

    def test_strictly_increasing_on_grid(self):
        grid = np.arange(0.0, 90.0 + 1e-9, 0.1)
        vals = [los_probability(t, MIXED) for t in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert all(0.0 < v < 1.0 for v in vals)


class TestChannelGain:
    def test_pure_los_limit(self):
        # Steep LoS model saturates at probability one away from the knee.
        p = ChannelParams(e1=25.0, e2=1000.0, beta0=1e-6, kappa_nlos=0.01, alpha=2.0,
                          n_t=16, p_t=10.0, sigma2_c=1e-14)
        assert channel_gain(80.0, 100.0, p) == pytest.approx(1e-10, rel=1e-9)

    def test_unit_kappa_removes_angle_dependence(self):
        assert channel_gain(10.0, 120.0, PARAMS) == pytest.approx(
            channel_gain(80.0, 120.0, PARAMS), rel=1e-12)

    def test_monotone_decreasing_in_distance(self):
        gains = [channel_gain(40.0, d, MIXED) for d in np.linspace(50.0, 500.0, 40)]
        assert all(b < a for a, b in zip(gains, gains[1:]))

    def test_matches_scalar_oracle(self):
        for p in (PARAMS, MIXED):
            for theta, d in ((10.0, 60.0), (38.66, 64.03), (70.0, 200.0)):
                assert channel_gain(theta, d, p) == pytest.approx(
                    scalar_channel_gain(theta, d, p), rel=1e-12)


class TestSteeringVector:
    def test_broadside_all_equal(self):
        a = steering_vector(90.0, 16)
        assert np.allclose(a, np.full(16, 1.0 / 4.0), atol=1e-12)

    def test_endfire_two_elements(self):
        a = steering_vector(0.0, 2)
        assert np.allclose(a, np.array([1.0, -1.0]) / math.sqrt(2.0), atol=1e-12)

    @given(theta=st.floats(min_value=0.0, max_value=90.0),
           n=st.integers(min_value=1, max_value=64))
    @settings(max_examples=80)
    def test_unit_norm(self, theta, n):
        assert abs(np.linalg.norm(steering_vector(theta, n)) - 1.0) < 1e-12


class TestChannelVector:
    def test_norm_squared_equals_gain(self):
        uav = UavPose(140.0, 100.0, 50.0)
        tgt = TargetState(100.0, 100.0, 0.0, 0.0)
        for p in (PARAMS, MIXED):
            h = channel_vector(uav, tgt, p)
            d = math.sqrt(4100.0)
            theta = math.degrees(math.acos(50.0 / d))
            assert np.linalg.norm(h) ** 2 == pytest.approx(
                scalar_channel_gain(theta, d, p), rel=1e-12)

    def test_path_loss_scaling(self):
        g1 = channel_gain(50.0, 100.0, MIXED)
        g2 = channel_gain(50.0, 200.0, MIXED)
        assert g1 / g2 == pytest.approx(4.0, rel=1e-12)

    def test_predicted_channel_matches_at_same_state(self):
        uav = UavPose(140.0, 100.0, 50.0)
        tgt = TargetState(103.0, 99.0, 7.0, 7.0)
        assert np.array_equal(channel_vector(uav, tgt, PARAMS),
                              predicted_channel(uav, tgt, PARAMS))

    def test_prediction_perturbation_is_lipschitz(self):
        uav = UavPose(140.0, 100.0, 50.0)
        base = TargetState(100.0, 100.0, 0.0, 0.0)
        h0 = predicted_channel(uav, base, PARAMS)
        deltas = [2.0, 1.0, 0.5, 0.25]
        diffs = [np.linalg.norm(
            predicted_channel(uav, TargetState(100.0 + d, 100.0, 0.0, 0.0), PARAMS) - h0)
            for d in deltas]
        slope = diffs[0] / deltas[0]
        for d, diff in zip(deltas[1:], diffs[1:]):
            assert diff <= 1.5 * slope * d


class TestSnr:
    def test_matched_filter(self):
        h = channel_vector(UavPose(140.0, 100.0, 50.0),
                           TargetState(100.0, 100.0, 0.0, 0.0), PARAMS)
        expected = PARAMS.p_t * np.linalg.norm(h) ** 2 / PARAMS.sigma2_c
        assert snr(h, matched_beamformer(h), PARAMS) == pytest.approx(expected, rel=1e-12)

    def test_orthogonal_beamformer(self):
        h = np.zeros(4, dtype=complex)
        h[0] = 1e-6
        f = np.zeros(4, dtype=complex)
        f[1] = 1.0
        assert snr(h, f, PARAMS) == 0.0

    def test_overpowered_beamformer_rejected(self):
        h = np.ones(4, dtype=complex)
        with pytest.raises(InvalidInput):
            snr(h, 1.1 * np.ones(4) / 2.0, PARAMS)

    @given(seed=st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60)
    def test_cauchy_schwarz_bound(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        f = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        f = f / np.linalg.norm(f)
        bound = PARAMS.p_t * np.linalg.norm(h) ** 2 / PARAMS.sigma2_c
        assert snr(h, f, PARAMS) <= bound * (1.0 + 1e-12)


class TestDecibels:
    @given(x=st.floats(min_value=1e-20, max_value=1e20))
    @settings(max_examples=100)
    def test_round_trip(self, x):
        assert from_db(to_db(x)) == pytest.approx(x, rel=1e-12)

    def test_dbm_conversion(self):
        assert dbm_to_watts(40.0) == pytest.approx(10.0, rel=1e-12)
        assert dbm_to_watts(-110.0) == pytest.approx(1e-14, rel=1e-12)


class TestErrorRadius:
    def test_zero_psi(self):
        assert error_radius(np.eye(4), 0.0).epsilon == 0.0

    def test_identity_frobenius(self):
        assert error_radius(np.eye(4), 1.0).epsilon == pytest.approx(2.0, rel=1e-14)

    def test_diagonal_case(self):
        ball = error_radius(np.diag([1.0, 1.0, 0.5, 0.5]), 0.1)
        assert ball.epsilon == pytest.approx(0.1 * math.sqrt(2.5), rel=1e-12)

    def test_non_psd_rejected(self):
        with pytest.raises(InvalidCovariance):
            error_radius(np.diag([1.0, 1.0, -1.0, 1.0]), 1.0)

    def test_asymmetric_rejected(self):
        m = np.eye(4)
        m[0, 1] = 0.5
        with pytest.raises(InvalidCovariance):
            error_radius(m, 1.0)


class TestWorstCaseSnr:
    def test_zero_radius_is_matched(self):
        h = channel_vector(UavPose(120.0, 100.0, 50.0),
                           TargetState(100.0, 100.0, 0.0, 0.0), PARAMS)
        assert worst_case_snr(h, ErrorBall(0.0), PARAMS) == pytest.approx(
            snr(h, matched_beamformer(h), PARAMS), rel=1e-12)

    def test_ball_swallows_channel(self):
        h = np.ones(4, dtype=complex) * 1e-7
        assert worst_case_snr(h, ErrorBall(1.0), PARAMS) == 0.0

    def test_half_norm_radius(self):
        rng = np.random.default_rng(3)
        h = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) * 1e-6
        eps = float(np.linalg.norm(h)) / 2.0
        expected = PARAMS.p_t * eps ** 2 / PARAMS.sigma2_c
        assert worst_case_snr(h, ErrorBall(eps), PARAMS) == pytest.approx(expected, rel=1e-12)

    def test_sampled_errors_never_beat_worst_case(self):
        rng = np.random.default_rng(9)
        h = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) * 1e-6
        eps = 0.4 * float(np.linalg.norm(h))
        wc = worst_case_snr(h, ErrorBall(eps), PARAMS)
        f = matched_beamformer(h)
        seen = []
        for _ in range(2000):
            d = rng.standard_normal(16) + 1j * rng.standard_normal(16)
            d *= eps * rng.uniform() ** (1 / 32) / np.linalg.norm(d)
            seen.append(snr(h + d, f, PARAMS))
        assert min(seen) >= wc - 1e-9 * wc
        # The aligned shrinking error attains the bound.
        attained = snr(h - eps * h / np.linalg.norm(h), f, PARAMS)
        assert attained == pytest.approx(wc, rel=1e-9)

    @given(seed=st.integers(min_value=0, max_value=5000),
           frac=st.floats(min_value=0.0, max_value=3.0))
    @settings(max_examples=60)
    def test_never_exceeds_matched(self, seed, frac):
        rng = np.random.default_rng(seed)
        h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        ball = ErrorBall(frac * float(np.linalg.norm(h)))
        assert worst_case_snr(h, ball, PARAMS) <= snr(h, matched_beamformer(h), PARAMS) + 1e-12


class TestRobustLmi:
    def test_zero_radius_large_channel_feasible(self):
        h = np.ones(16, dtype=complex) * 1e-3
        assert robust_snr_lmi_feasible(h, ErrorBall(0.0), 100.0, PARAMS)

    def test_huge_threshold_infeasible(self):
        h = np.ones(16, dtype=complex) * 1e-6
        assert not robust_snr_lmi_feasible(h, ErrorBall(1e-7), 1e12, PARAMS)

    def test_nonpositive_threshold_rejected(self):
        with pytest.raises(InvalidInput):
            robust_snr_lmi_feasible(np.ones(4, dtype=complex), ErrorBall(0.1), 0.0, PARAMS)

    def test_agrees_with_closed_form_worst_case(self):
        rng = np.random.default_rng(5)
        checked = 0
        for _ in range(400):
            scale = 10.0 ** rng.uniform(-7, 0)
            h = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) * scale
            h_norm = float(np.linalg.norm(h))
            ball = ErrorBall(float(rng.uniform(1e-3, 2.0)) * h_norm)
            wc = worst_case_snr(h, ball, PARAMS)
            matched = snr(h, matched_beamformer(h), PARAMS)
            if wc > 0:
                gamma = wc * 10.0 ** rng.uniform(-2, 2)
            else:
                gamma = matched * 10.0 ** rng.uniform(-2, 1)
            if gamma <= 0 or abs(wc - gamma) <= 1e-9 * gamma:
                continue
            checked += 1
            assert robust_snr_lmi_feasible(h, ball, gamma, PARAMS) == (wc >= gamma)
        assert checked > 350
