"""Particle-level simulation of the reset-counting receiver.

Each released particle is absorbed with probability R/d; given absorption its
hitting time has the normalized cumulative-absorption law, which inverts in
closed form: t = (a / erfcinv(v))^2 with a = (d - R) / (2 sqrt(D)) and v
uniform on (0, 1).

A pulse is simulated as one multinomial draw over the first ``horizon``
intervals plus a "later" and a "never" category. In truthful mode the later
particles get exact hitting times and land in whatever interval they hit;
in truncated mode they are discarded, so the counts follow the finite-memory
model the closed forms assume.

Seeding: ``SeedSequence(seed).spawn(2 + n_blocks)`` gives the symbol stream
(child 0), the external noise (child 1) and one generator per block of
``block`` symbols (children 2...). Blocks are merged by summation, so the
result does not depend on how blocks are scheduled.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcinv
from scipy.stats import beta, norm

from .channel import SystemParams, _absorbed_fraction
from .detection import Detector, TransitionTable
from .mutual_info import Scenario, history_width
from .sources import sample_sequence


@dataclass(frozen=True)
class SimConfig:
    n_symbols: int = 1_000_000
    seed: int = 0
    time_resolution: float = 1e-5
    truncate: bool = False  # drop particles arriving after the channel memory
    horizon: int = 64  # intervals binned by the multinomial draw (truthful mode)
    block: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be >= 1")
        if not 0 < self.time_resolution <= 1e-4:
            raise ValueError("time_resolution must lie in (0, 1e-4] s")
        if self.horizon < 1 or self.block < 1:
            raise ValueError("horizon and block must be >= 1")


@dataclass
class EmpiricalCounts:
    symbols: np.ndarray  # transmitted bits
    signal: np.ndarray  # absorbed particles per interval, before noise
    noise: np.ndarray  # rounded Gaussian noise per interval
    detected: np.ndarray  # detector output

    @property
    def counts(self) -> np.ndarray:
        return self.signal + self.noise

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["interval_index", "s", "count", "s_hat"])
        for i, (s, c, d) in enumerate(zip(self.symbols.tolist(), self.counts.tolist(),
                                          self.detected.tolist())):
            w.writerow([i, s, c, d])
        return buf.getvalue() if fh is None else ""


# -- hitting times ---------------------------------------------------------

def _scale(params: SystemParams) -> float:
    return params._erfc_scale


def hitting_times_after(params: SystemParams, t0: float, n: int, rng) -> np.ndarray:
    """Hitting times of ``n`` absorbed particles, conditioned on t > t0."""
    a = _scale(params)
    v0 = float(erfc(a / math.sqrt(t0))) if t0 > 0 else 0.0
    v = v0 + (1.0 - v0) * rng.random(n)
    with np.errstate(divide="ignore"):
        t = (a / erfcinv(v)) ** 2
    return np.maximum(t, t0)


def sample_hitting_times(params: SystemParams, n: int, rng) -> np.ndarray:
    """First-hitting times of ``n`` particles; ``inf`` for never absorbed."""
    out = np.full(n, np.inf)
    hit = rng.random(n) < params.hit_probability
    out[hit] = hitting_times_after(params, 0.0, int(hit.sum()), rng)
    return out


def sample_hitting_time(params: SystemParams, rng) -> float | None:
    """One particle's hitting time in seconds, or None if it escapes."""
    t = float(sample_hitting_times(params, 1, rng)[0])
    return None if math.isinf(t) else t


# -- pulses ----------------------------------------------------------------

def bin_probabilities(params: SystemParams, t_sym: float, n_bins: int) -> np.ndarray:
    """Per-interval hit probabilities, then the 'later' and 'never' masses."""
    edges = _absorbed_fraction(params, t_sym * np.arange(n_bins + 1))
    h = np.diff(edges)
    later = params.hit_probability - edges[-1]
    p = np.concatenate([h, [later, 1.0 - params.hit_probability]])
    return np.clip(p, 0.0, 1.0)


def pulse_bins(params: SystemParams, t_sym: float, n_bins: int, n_pulses: int, rng) -> np.ndarray:
    """Multinomial counts of isolated pulses, shape (n_pulses, n_bins + 2).

    Columns: intervals 1..n_bins, absorbed later, never absorbed.
    """
    p = bin_probabilities(params, t_sym, n_bins)
    return rng.multinomial(params.n_released, p / p.sum(), size=n_pulses)


def _block_signal(args):
    params, t_sym, n_bins, truncate, starts, n, seed = args
    rng = np.random.default_rng(seed)
    out = np.zeros(n, dtype=np.int64)
    if starts.size == 0:
        return out
    bins = pulse_bins(params, t_sym, n_bins, starts.size, rng)
    for k in range(n_bins):
        idx = starts + k
        ok = idx < n
        np.add.at(out, idx[ok], bins[ok, k])
    if not truncate:
        late = bins[:, n_bins]
        total = int(late.sum())
        if total:
            t = hitting_times_after(params, n_bins * t_sym, total, rng)
            k = np.floor(t / t_sym)
            k = np.where(np.isfinite(k), k, n).astype(np.float64)
            idx = np.repeat(starts, late) + np.minimum(k, n)
            idx = idx[idx < n].astype(np.int64)
            out += np.bincount(idx, minlength=n)
    return out


def simulate_stream(params: SystemParams, t_sym: float, src, det: Detector, cfg: SimConfig,
                    memory: int | None = None, symbols=None) -> EmpiricalCounts:
    """Transmit a stream and count absorbed particles per interval.

    The stream is sampled from ``src`` unless ``symbols`` is given.
    ``memory`` sets the binned horizon in truncated mode (required there).
    """
    if cfg.truncate:
        if memory is None:
            raise ValueError("truncated simulation needs the channel memory")
        n_bins = memory
    else:
        n_bins = cfg.horizon
    n = cfg.n_symbols if symbols is None else len(symbols)
    n_blocks = -(-n // cfg.block)
    seeds = np.random.SeedSequence(cfg.seed).spawn(2 + n_blocks)
    if symbols is None:
        symbols = sample_sequence(src, n, np.random.default_rng(seeds[0]))
    symbols = np.asarray(symbols, dtype=np.int8)
    noise = np.rint(np.random.default_rng(seeds[1]).normal(
        params.noise_mean, params.noise_std, n)).astype(np.int64)
    ones = np.flatnonzero(symbols)
    tasks = []
    for b in range(n_blocks):
        lo, hi = b * cfg.block, min((b + 1) * cfg.block, n)
        starts = ones[(ones >= lo) & (ones < hi)]
        tasks.append((params, t_sym, n_bins, cfg.truncate, starts, n, seeds[2 + b]))
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(_block_signal, tasks))
    else:
        parts = [_block_signal(t) for t in tasks]
    signal = np.zeros(n, dtype=np.int64)
    for part in parts:
        signal += part
    detected = (signal + noise >= det.threshold).astype(np.int8)
    return EmpiricalCounts(symbols=symbols, signal=signal, noise=noise, detected=detected)


# -- estimators ------------------------------------------------------------

def _history_index(symbols: np.ndarray, width: int) -> np.ndarray:
    """History code for every position i >= width (bit 0 = oldest)."""
    n = symbols.size
    code = np.zeros(n - width, dtype=np.int64)
    for k in range(width):
        # bit k holds s_{i - width + k}
        code |= symbols[k:n - width + k].astype(np.int64) << k
    return code


@dataclass(frozen=True)
class EmpiricalTransitions:
    memory: int
    n: np.ndarray  # samples per (history, s)
    ones: np.ndarray  # detections s_hat = 1 per (history, s)

    @property
    def p1(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.n > 0, self.ones / np.maximum(self.n, 1), np.nan)

    @property
    def empty(self) -> np.ndarray:
        return self.n == 0

    def interval(self, z: float = 3.0):
        """Exact (Clopper-Pearson) binomial interval per cell.

        Coverage matches a two-sided normal band of ``z`` standard deviations.
        Empty cells give (nan, nan).
        """
        a = 2.0 * norm.sf(z)
        k, n = self.ones, self.n
        with np.errstate(invalid="ignore"):
            lo = np.where(k > 0, beta.ppf(a / 2, k, n - k + 1), 0.0)
            hi = np.where(k < n, beta.ppf(1 - a / 2, k + 1, n - k), 1.0)
        return np.where(self.empty, np.nan, lo), np.where(self.empty, np.nan, hi)

    def outside(self, table: TransitionTable, z: float = 3.0) -> np.ndarray:
        """Populated cells whose analytic probability falls outside the interval."""
        lo, hi = self.interval(z)
        p = np.asarray(table.p1, dtype=float)
        return ~self.empty & ((p < lo) | (p > hi))


def empirical_transitions(counts: EmpiricalCounts, symbols, memory: int) -> EmpiricalTransitions:
    """Detection frequencies per (history, s), skipping the first M-1 symbols."""
    s = np.asarray(symbols, dtype=np.int64)
    width = memory - 1
    hist = _history_index(s, width)
    cur = s[width:]
    det = counts.detected[width:].astype(np.int64)
    cell = hist * 2 + cur
    size = (1 << width) * 2
    n = np.bincount(cell, minlength=size).reshape(-1, 2)
    ones = np.bincount(cell, weights=det, minlength=size).astype(np.int64).reshape(-1, 2)
    return EmpiricalTransitions(memory=memory, n=n, ones=ones)


def _cond_entropy(joint: np.ndarray) -> float:
    """H(X | Y) in bits from a count table with Y on axis 0 and X on axis 1."""
    total = joint.sum()
    row = joint.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log2(row / joint), 0.0)
    return float(terms.sum() / total)


@dataclass(frozen=True)
class EmpiricalMI:
    mi: float  # clipped at zero like the closed forms
    raw: float
    rate: float  # plug-in source entropy rate
    equivocation: float
    min_cell: int  # smallest populated conditioning cell
    sufficient: bool


def empirical_mi(counts: EmpiricalCounts, symbols, scenario, memory: int,
                 min_per_cell: int = 30) -> EmpiricalMI:
    """Plug-in mutual information mirroring the scenario's conditioning."""
    if isinstance(scenario, str):
        scenario = Scenario.parse(scenario)
    s = np.asarray(symbols, dtype=np.int64)
    width = history_width(memory)
    if s.size <= width + 1:
        raise ValueError("stream too short")
    cur = s[width:]
    det = counts.detected[width:].astype(np.int64)
    prev = s[width - 1:-1]
    if scenario.markov:
        rate = _cond_entropy(np.bincount(prev * 2 + cur, minlength=4).reshape(2, 2))
    else:
        rate = _cond_entropy(np.bincount(cur, minlength=2).reshape(1, 2))
    if scenario.aware:
        cond = _history_index(s, width) * 2 + det
        size = (1 << width) * 2
    else:
        cond = det
        size = 2
    joint = np.bincount(cond * 2 + cur, minlength=size * 2).reshape(size, 2)
    equiv = _cond_entropy(joint)
    occupied = joint.sum(axis=1)
    occupied = occupied[occupied > 0]
    min_cell = int(occupied.min())
    return EmpiricalMI(mi=max(rate - equiv, 0.0), raw=rate - equiv, rate=rate, equivocation=equiv, min_cell=min_cell,
                       sufficient=min_cell >= min_per_cell)


# -- validation suite ------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    passed: bool


def run_validation(params: SystemParams, cir, src, det: Detector, cfg: SimConfig,
                   scenario: str = "crr-isia", n_draws: int = 1_000_000,
                   n_pulses: int = 2000) -> list:
    """Monte Carlo cross-checks of the analytic channel model."""
    from scipy.stats import kstest

    from .detection import build_transition_table
    from .mutual_info import mutual_information

    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    checks = []
    rng = np.random.default_rng(seeds[0])
    t = sample_hitting_times(params, n_draws, rng)
    frac = float(np.isfinite(t).mean())
    pr = params.hit_probability
    tol = 3 * math.sqrt(pr * (1 - pr) / n_draws)
    checks.append(Check("hit_fraction", abs(frac - pr), tol, abs(frac - pr) <= tol))
    finite = t[np.isfinite(t)]
    ks = kstest(finite, lambda x: _absorbed_fraction(params, np.maximum(x, 0.0)) / pr)
    checks.append(Check("hitting_time_ks_pvalue", ks.pvalue, 0.01, ks.pvalue >= 0.01))

    bins = pulse_bins(params, cir.t_sym, cir.memory, n_pulses, np.random.default_rng(seeds[1]))
    cons = int(np.abs(bins.sum(axis=1) - params.n_released).max())
    checks.append(Check("particle_conservation", cons, 0, cons == 0))
    nt = params.n_released
    mean_dev = np.abs(bins[:, :cir.memory].mean(axis=0) - nt * cir.h)
    se = np.sqrt(nt * cir.h * (1 - cir.h) / n_pulses)
    worst = float((mean_dev / se).max())
    checks.append(Check("pulse_mean_max_z", worst, 3.0, worst <= 3.0))

    sim = SimConfig(n_symbols=cfg.n_symbols, seed=int(seeds[2].generate_state(1)[0]),
                    truncate=True, block=cfg.block, workers=cfg.workers)
    counts = simulate_stream(params, cir.t_sym, src, det, sim, memory=cir.memory)
    emp = empirical_transitions(counts, counts.symbols, cir.memory)
    table = build_transition_table(cir, params, det)
    bad = int(emp.outside(table).sum())
    checks.append(Check("transition_cells_outside_ci", bad, 0, bad == 0))
    sc = Scenario.parse(scenario)
    est = empirical_mi(counts, counts.symbols, sc, cir.memory)
    ref = mutual_information(sc, cir, params, det, src).mi
    diff = abs(est.mi - ref)
    checks.append(Check("plugin_mi_abs_error", diff, 0.05, diff <= 0.05 and est.sufficient))
    return checks
