import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcair.sources import (IndependentSource, MarkovSource, binary_entropy, entropy_rate,
                           entropy_rate_markov, log_sequence_probability, sample_sequence,
                           sequence_probability, stationary_distribution)

import oracles

prob = st.floats(0.0, 1.0)
interior = st.floats(0.001, 0.999)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(oracles.H2_011, abs=1e-15)
    assert abs(binary_entropy(0.11) - 0.499916) < 1e-5
    for bad in (-0.1, 1.1, math.nan):
        with pytest.raises(ValueError):
            binary_entropy(bad)


def test_stationary_distribution():
    sd = stationary_distribution(MarkovSource(0.3, 0.3))
    assert (sd.pi0, sd.pi1) == pytest.approx((0.5, 0.5))
    sd = stationary_distribution(MarkovSource(0.60, 0.62))
    assert sd.pi0 == 0.62 / 1.22 and sd.pi0 + sd.pi1 == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        stationary_distribution(MarkovSource(0.0, 0.0))


@given(interior, interior)
def test_stationarity_fixed_point(p, q):
    src = MarkovSource(p, q)
    sd = stationary_distribution(src)
    pi = np.array([sd.pi0, sd.pi1])
    np.testing.assert_allclose(pi @ src.matrix, pi, atol=1e-12)


def test_entropy_rate_values():
    assert entropy_rate_markov(MarkovSource(0.5, 0.5)) == 1.0
    assert entropy_rate_markov(MarkovSource(1.0, 1.0)) == 0.0
    assert entropy_rate_markov(MarkovSource(0.35, 0.75)) == pytest.approx(oracles.RATE_035_075,
                                                                          abs=1e-15)


@given(prob)
def test_entropy_rate_embedding(lam0):
    ind = IndependentSource(lam0)
    if lam0 in (0.0, 1.0):
        # the embedded chain is absorbing at one end but still rate 0
        assert entropy_rate(ind) == 0.0
        return
    assert entropy_rate_markov(ind.as_markov()) == pytest.approx(binary_entropy(lam0), abs=1e-12)


@given(prob, prob)
def test_entropy_rate_bounded(p, q):
    if p + q == 0:
        return
    assert 0.0 <= entropy_rate_markov(MarkovSource(p, q)) <= 1.0


def test_sequence_base_cases():
    src = MarkovSource(0.2, 0.7)
    assert sequence_probability(src, [0]) == pytest.approx(stationary_distribution(src).pi0)
    assert sequence_probability(IndependentSource(0.3), [1, 1, 0]) == pytest.approx(0.7 * 0.7 * 0.3)
    with pytest.raises(ValueError):
        sequence_probability(src, [])


@pytest.mark.parametrize("src", [MarkovSource(0.6, 0.62), MarkovSource(0.05, 0.9),
                                 IndependentSource(0.52), IndependentSource(1.0)])
def test_sequences_sum_to_one(src):
    for n in (1, 5, 12):
        total = math.fsum(sequence_probability(src, s) for s in itertools.product((0, 1), repeat=n))
        assert total == pytest.approx(1.0, abs=1e-12)


@given(interior, st.lists(st.integers(0, 1), min_size=1, max_size=20))
def test_markov_embedding_matches_independent(lam0, seq):
    ind = IndependentSource(lam0)
    a = log_sequence_probability(ind, seq)
    b = log_sequence_probability(ind.as_markov(), seq)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_long_sequence_log_domain():
    seq = [1, 0] * 2000
    lp = log_sequence_probability(MarkovSource(0.01, 0.01), seq)
    assert math.isfinite(lp) and lp < -10_000


def test_sample_frequencies():
    rng = np.random.default_rng(7)
    n = 10**6
    src = MarkovSource(0.3, 0.6)
    x = sample_sequence(src, n, rng)
    pi1 = stationary_distribution(src).pi1
    assert abs(x.mean() - pi1) < 4 / math.sqrt(n)
    prev, nxt = x[:-1], x[1:]
    n0, n1 = (prev == 0).sum(), (prev == 1).sum()
    p_hat = (nxt[prev == 0] == 1).mean()
    q_hat = (nxt[prev == 1] == 0).mean()
    assert abs(p_hat - 0.3) < 4 * math.sqrt(0.3 * 0.7 / n0)
    assert abs(q_hat - 0.6) < 4 * math.sqrt(0.6 * 0.4 / n1)
    y = sample_sequence(IndependentSource(0.25), n, rng)
    assert abs(y.mean() - 0.75) < 4 / math.sqrt(n)


def test_sample_alternating_and_deterministic():
    x = sample_sequence(MarkovSource(1.0, 1.0), 101, np.random.default_rng(1))
    assert np.all(x[1:] != x[:-1])
    a = sample_sequence(MarkovSource(0.4, 0.2), 1000, np.random.default_rng(3))
    b = sample_sequence(MarkovSource(0.4, 0.2), 1000, np.random.default_rng(3))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        sample_sequence(MarkovSource(0.4, 0.2), 0, np.random.default_rng(3))
