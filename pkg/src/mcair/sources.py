"""Binary sources: first-order Markov chain and i.i.d. Bernoulli."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def binary_entropy(x: float) -> float:
    """H2(x) in bits, with 0 log 0 = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy argument {x!r} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _check_prob(name, v):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name}={v!r} is not a probability")


@dataclass(frozen=True)
class StationaryDist:
    pi0: float
    pi1: float


@dataclass(frozen=True)
class MarkovSource:
    """p = P(1 | previous 0), q = P(0 | previous 1)."""

    p: float
    q: float

    def __post_init__(self):
        _check_prob("p", self.p)
        _check_prob("q", self.q)

    @property
    def matrix(self) -> np.ndarray:
        """Row-stochastic transition matrix T[prev, next]."""
        return np.array([[1 - self.p, self.p], [self.q, 1 - self.q]])

    def prob_one_after(self, prev: int) -> float:
        return self.p if prev == 0 else 1.0 - self.q


@dataclass(frozen=True)
class IndependentSource:
    lambda0: float

    def __post_init__(self):
        _check_prob("lambda0", self.lambda0)

    @property
    def lambda1(self) -> float:
        return 1.0 - self.lambda0

    def as_markov(self) -> MarkovSource:
        return MarkovSource(p=self.lambda1, q=self.lambda0)

    def prob_one_after(self, prev: int) -> float:
        return self.lambda1


def stationary_distribution(src: MarkovSource) -> StationaryDist:
    if src.p + src.q <= 0:
        raise ValueError("p = q = 0 has no unique stationary distribution")
    s = src.p + src.q
    return StationaryDist(pi0=src.q / s, pi1=src.p / s)


def entropy_rate_markov(src: MarkovSource) -> float:
    st = stationary_distribution(src)
    return st.pi0 * binary_entropy(src.p) + st.pi1 * binary_entropy(src.q)


def entropy_rate(src) -> float:
    if isinstance(src, IndependentSource):
        return binary_entropy(src.lambda0)
    return entropy_rate_markov(src)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def log_sequence_probability(src, seq) -> float:
    """Natural log of the probability of ``seq`` (oldest symbol first)."""
    seq = [int(b) for b in seq]
    if not seq:
        raise ValueError("empty sequence")
    if isinstance(src, IndependentSource):
        w = sum(seq)
        n = len(seq)
        # 0 * log 0 terms vanish
        lp = (n - w) * _log(src.lambda0) if n - w else 0.0
        return lp + (w * _log(src.lambda1) if w else 0.0)
    st = stationary_distribution(src)
    t = src.matrix
    lp = _log(st.pi1 if seq[0] else st.pi0)
    for a, b in zip(seq, seq[1:]):
        lp += _log(t[a, b])
    return lp


def sequence_probability(src, seq) -> float:
    return math.exp(log_sequence_probability(src, seq))


def sample_sequence(src, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` symbols; the first from the stationary law."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = rng.random(n)
    if isinstance(src, IndependentSource):
        return (u < src.lambda1).astype(np.int8)
    st = stationary_distribution(src)
    out = np.empty(n, dtype=np.int8)
    prev = int(u[0] < st.pi1)
    out[0] = prev
    # two-state chain: flip with prob p (from 0) or q (from 1)
    flip0, flip1 = src.p, src.q
    for i in range(1, n):
        if prev == 0:
            prev = 1 if u[i] < flip0 else 0
        else:
            prev = 0 if u[i] < flip1 else 1
        out[i] = prev
    return out
