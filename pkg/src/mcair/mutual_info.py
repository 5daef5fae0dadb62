"""Closed-form per-symbol mutual information of the memoryless detector.

Four cases: Markov or independent source, and a receiver that either knows
the M-1 previous symbols (ISI-aware) or not (ISI-unaware). Each is the
source entropy rate minus the equivocation of the current symbol, clipped
at zero.

A Markov-source, ISI-aware receiver always conditions on the previous
symbol, so a one-tap channel is evaluated with a one-bit history carrying
a zero tap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .channel import ChannelImpulseResponse, SystemParams
from .detection import Detector, HistoryMoments, TransitionTable, history_moments
from .sources import IndependentSource, MarkovSource, entropy_rate, stationary_distribution

SCENARIOS = ("crr-isia", "crr-isiu", "ind-isia", "ind-isiu")


@dataclass(frozen=True)
class Scenario:
    source_kind: str  # "markov" | "independent"
    isi_knowledge: str  # "aware" | "unaware"

    def __post_init__(self):
        if self.source_kind not in ("markov", "independent"):
            raise ValueError(f"unknown source kind {self.source_kind!r}")
        if self.isi_knowledge not in ("aware", "unaware"):
            raise ValueError(f"unknown ISI knowledge {self.isi_knowledge!r}")

    @classmethod
    def parse(cls, name: str) -> "Scenario":
        try:
            src, know = name.lower().split("-")
            return cls({"crr": "markov", "ind": "independent"}[src],
                       {"isia": "aware", "isiu": "unaware"}[know])
        except (ValueError, KeyError):
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {name!r}") from None

    @property
    def name(self) -> str:
        src = "crr" if self.source_kind == "markov" else "ind"
        return f"{src}-isi{'a' if self.aware else 'u'}"

    @property
    def aware(self) -> bool:
        return self.isi_knowledge == "aware"

    @property
    def markov(self) -> bool:
        return self.source_kind == "markov"


@dataclass(frozen=True)
class MIResult:
    mi: float
    clipped: bool
    raw: float  # value before clipping at zero


def history_width(memory: int) -> int:
    return max(memory - 1, 1)


@lru_cache(maxsize=32)
def history_structure(width: int):
    """Per-history sufficient statistics for source weights.

    Columns: first bit, last bit, Hamming weight, and transition counts
    n00, n01, n10, n11 along the oldest-to-newest order.
    """
    hist = np.arange(1 << width)
    bits = (hist[:, None] >> np.arange(width)) & 1
    first = bits[:, 0]
    last = bits[:, -1]
    weight = bits.sum(axis=1)
    a, b = bits[:, :-1], bits[:, 1:]
    n = [((a == x) & (b == y)).sum(axis=1) for x in (0, 1) for y in (0, 1)]
    out = np.column_stack([first, last, weight] + n).astype(np.int64)
    out.setflags(write=False)
    return out


def _xlog(count, logp):
    # count * log p with 0 * log 0 = 0
    return np.where(count > 0, count * logp, 0.0)


def _safe_log(x):
    return math.log(x) if x > 0 else -math.inf


def log_history_weights(src, width: int) -> np.ndarray:
    """Log probability of each width-bit history under the source law."""
    st = history_structure(width)
    if isinstance(src, IndependentSource):
        ones = st[:, 2]
        with np.errstate(invalid="ignore"):
            return _xlog(width - ones, _safe_log(src.lambda0)) + _xlog(ones, _safe_log(src.lambda1))
    sd = stationary_distribution(src)
    first = np.where(st[:, 0] == 1, _safe_log(sd.pi1), _safe_log(sd.pi0))
    logs = (_safe_log(1 - src.p), _safe_log(src.p), _safe_log(src.q), _safe_log(1 - src.q))
    with np.errstate(invalid="ignore"):
        return first + sum(_xlog(st[:, 3 + k], logs[k]) for k in range(4))


def history_weights(src, width: int):
    """(w, r): history probabilities and P(s = 1 | history)."""
    st = history_structure(width)
    w = np.exp(log_history_weights(src, width))
    if isinstance(src, IndependentSource):
        r = np.full(w.shape, src.lambda1)
    else:
        r = np.where(st[:, 1] == 1, 1.0 - src.q, src.p)
    return w, r


def _check_source(scenario: Scenario, src):
    if scenario.markov and not isinstance(src, MarkovSource):
        raise TypeError("Markov scenario needs a MarkovSource")
    if not scenario.markov and not isinstance(src, IndependentSource):
        raise TypeError("independent scenario needs an IndependentSource")


def moments_for(cir: ChannelImpulseResponse, params: SystemParams) -> HistoryMoments:
    return history_moments(cir, params, width=history_width(cir.memory))


def equivocation(scenario: Scenario, moments: HistoryMoments, src, taus) -> np.ndarray:
    """Equivocation (bits) for each threshold in ``taus``."""
    w, r = history_weights(src, moments.width)
    return kernels.equivocation(moments.mean0, moments.std0, moments.mean1, moments.std1,
                                w, r, np.atleast_1d(np.asarray(taus, float)), scenario.aware)


def mi_from_equivocation(rate: float, equiv: float) -> MIResult:
    raw = rate - equiv
    return MIResult(mi=max(raw, 0.0), clipped=raw < 0, raw=raw)


def mutual_information(
    scenario: Scenario, cir: ChannelImpulseResponse, params: SystemParams, det: Detector, src
) -> MIResult:
    _check_source(scenario, src)
    eq = equivocation(scenario, moments_for(cir, params), src, [det.threshold])[0]
    return mi_from_equivocation(entropy_rate(src), float(eq))


def mi_isia_markov(cir, params, det, src: MarkovSource) -> MIResult:
    return mutual_information(Scenario("markov", "aware"), cir, params, det, src)


def mi_isiu_markov(cir, params, det, src: MarkovSource) -> MIResult:
    return mutual_information(Scenario("markov", "unaware"), cir, params, det, src)


def mi_isia_independent(cir, params, det, src: IndependentSource) -> MIResult:
    return mutual_information(Scenario("independent", "aware"), cir, params, det, src)


def mi_isiu_independent(cir, params, det, src: IndependentSource) -> MIResult:
    return mutual_information(Scenario("independent", "unaware"), cir, params, det, src)


def posterior_given_history(table: TransitionTable, src, history: int, s_hat: int, s: int) -> float:
    """P(s | history, s_hat) by Bayes inversion over the current symbol.

    The prior on s uses the most recent history bit; with an empty history a
    Markov source falls back to its stationary law. Returns NaN when the
    conditioning event has probability zero.
    """
    width = table.memory - 1
    if width:
        r1 = src.prob_one_after((history >> (width - 1)) & 1)
    elif isinstance(src, MarkovSource):
        r1 = stationary_distribution(src).pi1
    else:
        r1 = src.lambda1
    prior = (1.0 - r1, r1)
    num = [table.prob(history, x, s_hat) * prior[x] for x in (0, 1)]
    den = num[0] + num[1]
    if den <= 0:
        return math.nan
    return num[s] / den
