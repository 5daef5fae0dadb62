"""Gaussian statistics of the received count and the threshold detector.

Histories are encoded as integers of width M-1: bit 0 is the oldest past
symbol s_{i-M+1}, bit M-2 the most recent s_{i-1}. Bit k therefore weights
tap h_{M-k}.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .channel import DEFAULT_MEMORY_CAP, ChannelImpulseResponse, MemoryOverflowError, SystemParams

SQRT2 = math.sqrt(2.0)


def q_function(z):
    """Gaussian tail probability Q(z) = erfc(z / sqrt 2) / 2."""
    out = 0.5 * erfc(np.asarray(z, dtype=float) / SQRT2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ConditionalGaussian:
    mean: float
    variance: float


@dataclass(frozen=True)
class Detector:
    threshold: float

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")


def history_bits(history: int, width: int) -> np.ndarray:
    """Bits of ``history`` oldest first."""
    if width < 0 or not 0 <= history < (1 << width):
        raise ValueError(f"history {history!r} does not fit in {width} bits")
    return (history >> np.arange(width)) & 1


def history_string(history: int, width: int) -> str:
    return "".join(str(b) for b in history_bits(history, width))


def _check_width(cir: ChannelImpulseResponse, history) -> np.ndarray:
    width = cir.memory - 1
    if isinstance(history, (int, np.integer)):
        return history_bits(int(history), width)
    bits = np.asarray(history, dtype=int)
    if bits.shape != (width,):
        raise ValueError(f"history must have {width} bits, got {bits.shape}")
    return bits


def conditional_moments(
    cir: ChannelImpulseResponse, params: SystemParams, history, s: int
) -> ConditionalGaussian:
    """Mean and variance of the count given the past symbols and the current one.

    ``history`` is either the integer encoding or a 0/1 sequence oldest first.
    """
    bits = _check_width(cir, history)
    h = cir.h
    taps = h[1:][::-1]  # aligned with bits: oldest symbol -> h_M
    active = np.concatenate([[s], bits]).astype(bool)
    all_taps = np.concatenate([[h[0]], taps])
    nt = params.n_released
    mean = params.noise_mean + nt * all_taps[active].sum()
    var = params.noise_std**2 + nt * (all_taps[active] * (1 - all_taps[active])).sum()
    return ConditionalGaussian(mean=float(mean), variance=float(var))


def transition_probability(
    cir: ChannelImpulseResponse, params: SystemParams, det: Detector, history, s: int, s_hat: int
) -> float:
    g = conditional_moments(cir, params, history, s)
    p1 = min(max(q_function((det.threshold - g.mean) / math.sqrt(g.variance)), 0.0), 1.0)
    return p1 if s_hat == 1 else 1.0 - p1


@dataclass(frozen=True)
class HistoryMoments:
    """Conditional means and standard deviations for every history, both symbols."""

    mean0: np.ndarray
    std0: np.ndarray
    mean1: np.ndarray
    std1: np.ndarray

    @property
    def width(self) -> int:
        return int(self.mean0.size).bit_length() - 1


def history_moments(
    cir: ChannelImpulseResponse, params: SystemParams, width: int | None = None
) -> HistoryMoments:
    """Vectorized conditional moments over all 2^(M-1) histories.

    ``width`` may exceed M-1; surplus (oldest) bits then carry zero taps.
    """
    h = cir.h
    if width is None:
        width = cir.memory - 1
    if width < cir.memory - 1:
        raise ValueError("width smaller than the channel memory")
    taps = np.zeros(width)
    if cir.memory > 1:
        taps[width - (cir.memory - 1):] = h[1:][::-1]
    bits = ((np.arange(1 << width)[:, None] >> np.arange(width)) & 1).astype(float)
    nt = params.n_released
    isi_mean = nt * (bits @ taps) if width else np.zeros(1)
    isi_var = nt * (bits @ (taps * (1 - taps))) if width else np.zeros(1)
    m0 = params.noise_mean + isi_mean
    v0 = params.noise_std**2 + isi_var
    m1 = m0 + nt * h[0]
    v1 = v0 + nt * h[0] * (1 - h[0])
    return HistoryMoments(mean0=m0, std0=np.sqrt(v0), mean1=m1, std1=np.sqrt(v1))


@dataclass(frozen=True)
class TransitionTable:
    """P(s_hat = 1 | history, s) for every history; rows indexed by history."""

    memory: int
    threshold: float
    p1: np.ndarray = field(repr=False)  # shape (2^(M-1), 2): column s

    def prob(self, history: int, s: int, s_hat: int) -> float:
        v = float(self.p1[history, s])
        return v if s_hat == 1 else 1.0 - v

    @property
    def entries(self) -> dict:
        out = {}
        for hist in range(self.p1.shape[0]):
            for s in (0, 1):
                for s_hat in (0, 1):
                    out[(hist, s, s_hat)] = self.prob(hist, s, s_hat)
        return out

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["history", "s", "p_hat0", "p_hat1"])
        width = self.memory - 1
        for hist in range(self.p1.shape[0]):
            for s in (0, 1):
                p1 = float(self.p1[hist, s])
                w.writerow([history_string(hist, width), s, f"{1.0 - p1:.9g}", f"{p1:.9g}"])
        return buf.getvalue() if fh is None else ""


def q_tables(moments: HistoryMoments, taus):
    """P(s_hat = 1 | history, s) for each tau: arrays of shape (n_hist, n_tau)."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    z0 = (taus[None, :] - moments.mean0[:, None]) / moments.std0[:, None]
    z1 = (taus[None, :] - moments.mean1[:, None]) / moments.std1[:, None]
    return np.clip(q_function(z0), 0, 1), np.clip(q_function(z1), 0, 1)


def build_transition_table(
    cir: ChannelImpulseResponse,
    params: SystemParams,
    det: Detector,
    memory_cap: int = DEFAULT_MEMORY_CAP,
) -> TransitionTable:
    if cir.memory > memory_cap:
        raise MemoryOverflowError(cir.memory, memory_cap)
    mom = history_moments(cir, params)
    t0, t1 = q_tables(mom, [det.threshold])
    p1 = np.column_stack([t0[:, 0], t1[:, 0]])
    p1.setflags(write=False)
    return TransitionTable(memory=cir.memory, threshold=det.threshold, p1=p1)
