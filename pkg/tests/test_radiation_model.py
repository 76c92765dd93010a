import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from calod.radiation_model import (Hypothesis, NodePosition, ScenarioParams,
                                   centralized_lod, clairvoyant_llr,
                                   clairvoyant_lrt, local_lod_statistic,
                                   sample_observation, sample_observations,
                                   source_rate)

P = ScenarioParams(lambda_b=0.5, sigma_w2=0.5, source_intensity=0.5, source_pos=(0.0, 0.0))


def test_source_rate_inverse_square():
    assert source_rate(NodePosition(1.0, 0.0), P) == pytest.approx(0.5, rel=1e-15)
    assert source_rate((2.0, 0.0), P) == pytest.approx(0.125, rel=1e-15)


def test_source_rate_clamps_at_source():
    assert source_rate((0.0, 0.0), P) == pytest.approx(5e5)


def test_source_rate_zero_intensity():
    p = P.with_source(intensity=0.0)
    assert source_rate((0.3, 2.0), p) == 0.0


def test_source_rate_vectorized_matches_scalar():
    pos = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 4.0]])
    rates = source_rate(pos, P)
    assert rates.shape == (3,)
    assert rates == pytest.approx([source_rate(tuple(r), P) for r in pos])


@pytest.mark.parametrize("kwargs", [
    dict(lambda_b=0.0), dict(sigma_w2=-1.0), dict(source_intensity=-0.1), dict(min_dist2=0.0),
    dict(source_pos=(0.0, float("nan"))),
])
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ValueError):
        ScenarioParams(**kwargs)


def test_h0_moments():
    rng = np.random.default_rng(1)
    z = sample_observations(Hypothesis.H0, np.zeros((10 ** 6, 2)), P, rng)
    assert abs(z.mean() - 0.5) < 0.003
    assert abs(z.var() - 1.0) < 0.01


def test_h1_moments_within_five_standard_errors():
    n = 10 ** 6
    pos = np.tile([[1.0, 0.0]], (n, 1))  # lambda_c = 0.5 at every node
    z = sample_observations(Hypothesis.H1, pos, P, np.random.default_rng(2))
    mean, var = 1.0, 1.5
    assert abs(z.mean() - mean) < 5 * math.sqrt(var / n)
    # var of the sample variance of a normal is 2 var^2 / (n - 1)
    assert abs(z.var(ddof=1) - var) < 5 * math.sqrt(2 * var ** 2 / (n - 1))


def test_h1_without_signal_is_h0():
    p = P.with_source(intensity=0.0)
    pos = np.random.default_rng(0).uniform(0, 3, (50, 2))
    z0 = sample_observations(Hypothesis.H0, pos, p, np.random.default_rng(5))
    z1 = sample_observations(Hypothesis.H1, pos, p, np.random.default_rng(5))
    assert np.array_equal(z0, z1)


def test_sampling_is_deterministic():
    pos = np.random.default_rng(0).uniform(0, 3, (10, 2))
    a = sample_observations(Hypothesis.H1, pos, P, np.random.default_rng(11))
    b = sample_observations(Hypothesis.H1, pos, P, np.random.default_rng(11))
    assert a.tobytes() == b.tobytes()
    o1 = sample_observation(Hypothesis.H1, NodePosition(1, 1), P, np.random.default_rng(3), node_id=4)
    o2 = sample_observation(Hypothesis.H1, NodePosition(1, 1), P, np.random.default_rng(3), node_id=4)
    assert o1 == o2 and o1.node_id == 4 and o1.hypothesis is Hypothesis.H1


@pytest.mark.parametrize("z, expected", [(0.5, 0.0), (1.5, 1.5), (-0.5, -0.5)])
def test_local_lod_statistic_values(z, expected):
    assert local_lod_statistic(z, P) == pytest.approx(expected, abs=1e-15)


@given(st.floats(-50, 50))
def test_local_lod_lower_bound(z):
    # parabola vertex at z = lambda_b - v
    assert local_lod_statistic(z, P) >= -P.h0_variance / 2 - 1e-12


@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(0.01, 0.99))
def test_local_lod_strictly_convex(a, b, t):
    if abs(a - b) < 1e-3:
        return
    mid = local_lod_statistic(t * a + (1 - t) * b, P)
    assert mid < t * local_lod_statistic(a, P) + (1 - t) * local_lod_statistic(b, P)


def test_centralized_lod():
    assert centralized_lod([0.5] * 7, P) == 0.0
    assert centralized_lod([1.5], P) == pytest.approx(local_lod_statistic(1.5, P))
    assert centralized_lod([1.5, -0.5], P) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        centralized_lod([], P)


def test_centralized_lod_is_n_times_mean():
    z = np.random.default_rng(4).normal(0.5, 1.0, 37)
    assert centralized_lod(z, P) == pytest.approx(37 * np.mean(local_lod_statistic(z, P)))


def test_llr_zero_rate():
    z = np.linspace(-3, 3, 11)
    assert np.all(clairvoyant_llr(z, 0.0, P) == 0.0)


def test_llr_hand_value():
    assert clairvoyant_llr(1.5, 1.0, P) == pytest.approx(0.5 - 0.5 * math.log(2), abs=1e-15)


def test_llr_matches_density_ratio_oracle():
    rng = np.random.default_rng(8)
    for _ in range(100):
        z = rng.normal(0.5, 2.0)
        lam = rng.uniform(0, 3)
        oracle = (norm.logpdf(z, P.lambda_b + lam, math.sqrt(P.h0_variance + lam))
                  - norm.logpdf(z, P.lambda_b, math.sqrt(P.h0_variance)))
        assert clairvoyant_llr(z, lam, P) == pytest.approx(oracle, abs=1e-12)


def test_llr_rejects_negative_rate():
    with pytest.raises(ValueError):
        clairvoyant_llr(1.0, -0.1, P)


@pytest.mark.parametrize("z", [-2.0, -0.7, 1.3, 2.5, 4.0])
def test_llr_linearization_is_lod(z):
    r6 = clairvoyant_llr(z, 1e-6, P) / 1e-6
    r7 = clairvoyant_llr(z, 1e-7, P) / 1e-7
    assert r6 == pytest.approx(r7, rel=1e-4)
    slope = (local_lod_statistic(z, P) - 0.5) / P.h0_variance
    assert r7 == pytest.approx(slope, rel=1e-4)


def test_clairvoyant_lrt_sums_nodes():
    pos = np.array([[1.0, 0.0], [0.0, 2.0]])
    z = np.array([1.2, 0.1])
    expected = clairvoyant_llr(1.2, 0.5, P) + clairvoyant_llr(0.1, 0.125, P)
    assert clairvoyant_lrt(z, pos, P) == pytest.approx(expected)


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_observation_vector_reproducible(seed):
    pos = np.random.default_rng(0).uniform(0, 3, (10, 2))
    a = sample_observations(1, pos, P, np.random.default_rng(seed))
    b = sample_observations(1, pos, P, np.random.default_rng(seed))
    assert a.tobytes() == b.tobytes()
