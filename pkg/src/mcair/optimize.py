"""Threshold optimization and brute-force capacity search.

Every point of an input-distribution grid gets its own optimal detector
threshold. The coarse threshold scan of a whole grid is batched: for a fixed
threshold the equivocation is linear in the history weights, so points that
share a conditional prior P(s = 1 | last bit) share one table and the scan
reduces to matrix products. Refinement rounds run per point on the kernel.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import (DEFAULT_MEMORY_CAP, ChannelError, ChannelImpulseResponse, SystemParams,
                      compute_cir)
from .detection import q_tables
from .mutual_info import (Scenario, equivocation, history_structure, history_weights,
                          log_history_weights, moments_for)
from .sources import IndependentSource, MarkovSource, entropy_rate


def air(mi: float, t_sym: float) -> float:
    """Achievable information rate in bit/s."""
    if not t_sym > 0:
        raise ValueError("t_sym must be > 0")
    return mi / t_sym


@dataclass(frozen=True)
class ThresholdSearch:
    """Coarse grid over [lo, hi] followed by shrinking refinement rounds.

    Each round shrinks the step by ``shrink`` and evaluates ``refine_steps``
    thresholds centred on the incumbent (``coarse_steps`` when None). Unset
    bounds are derived from the channel.
    """

    lo: float | None = None
    hi: float | None = None
    coarse_steps: int = 256
    refine_rounds: int = 3
    refine_steps: int | None = None
    shrink: float = 0.2

    def __post_init__(self):
        if self.coarse_steps < 16:
            raise ValueError("coarse_steps must be >= 16")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be >= 0")
        if self.refine_steps is not None and self.refine_steps < 2:
            raise ValueError("refine_steps must be >= 2")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.lo is not None and self.hi is not None and not self.lo < self.hi:
            raise ValueError("lo must be < hi")

    def bounds(self, cir: ChannelImpulseResponse, params: SystemParams):
        lo, hi = default_bounds(cir, params)
        return (self.lo if self.lo is not None else lo, self.hi if self.hi is not None else hi)

    @property
    def n_refine(self) -> int:
        return self.refine_steps if self.refine_steps is not None else self.coarse_steps


# bulk searches: full coarse grid, then 5-point rounds spanning +-0.4 previous step
GRID_SEARCH = ThresholdSearch(refine_steps=5)


def default_bounds(cir: ChannelImpulseResponse, params: SystemParams):
    h = cir.h
    nt = params.n_released
    lo = params.noise_mean - 4 * params.noise_std
    hi = (params.noise_mean + nt * h.sum()
          + 4 * math.sqrt(params.noise_std**2 + nt * (h * (1 - h)).sum()))
    return lo, hi


def _better(v, t, best_v, best_t):
    return v > best_v or (v == best_v and t < best_t)


def _refine(evaluate, best_t, best_v, step, search: ThresholdSearch, lo, hi):
    """Shrinking rounds around the incumbent; ``evaluate`` maps taus -> values."""
    m = search.n_refine
    offsets = np.arange(m) - (m - 1) / 2.0
    for _ in range(search.refine_rounds):
        step *= search.shrink
        cand = best_t + offsets * step
        cand = cand[(cand >= lo) & (cand <= hi) & (cand != best_t)]
        if cand.size == 0:
            continue
        vals = evaluate(cand)
        k = int(np.argmax(vals))
        # candidates are sorted, so the first maximum is the smallest tau
        if _better(vals[k], cand[k], best_v, best_t):
            best_t, best_v = float(cand[k]), float(vals[k])
    return best_t, best_v


def optimize_threshold(scenario: Scenario, cir, params, src, search: ThresholdSearch | None = None):
    """Return (tau*, mi*) maximizing the mutual information over the threshold.

    The search maximizes the unclipped value; the returned MI is clipped.
    """
    search = search or ThresholdSearch()
    mom = moments_for(cir, params)
    rate = entropy_rate(src)
    lo, hi = search.bounds(cir, params)

    def evaluate(taus):
        return rate - equivocation(scenario, mom, src, taus)

    taus = np.linspace(lo, hi, search.coarse_steps)
    vals = evaluate(taus)
    k = int(np.argmax(vals))
    step = (hi - lo) / (search.coarse_steps - 1)
    t, v = _refine(evaluate, float(taus[k]), float(vals[k]), step, search, lo, hi)
    return t, max(v, 0.0)


@dataclass(frozen=True)
class CapacityResult:
    scenario: str
    t_sym: float
    memory: int
    air: float
    mi: float
    tau: float
    argmax: tuple

    @property
    def param1(self):
        return self.argmax[0]

    @property
    def param2(self):
        return self.argmax[1] if len(self.argmax) > 1 else None


@dataclass
class AirSurface:
    """Per-point optimal threshold and AIR over an input grid.

    Markov grids are indexed [p, q]; independent grids [lambda0].
    """

    scenario: str
    t_sym: float
    memory: int
    values: np.ndarray
    tau: np.ndarray
    mi: np.ndarray
    air: np.ndarray = field(init=False)

    def __post_init__(self):
        self.air = self.mi / self.t_sym

    def capacity(self) -> CapacityResult:
        k = int(np.argmax(self.air))  # row-major: ties go to smaller (p, q)
        idx = np.unravel_index(k, self.air.shape)
        return CapacityResult(
            scenario=self.scenario, t_sym=self.t_sym, memory=self.memory,
            air=float(self.air[idx]), mi=float(self.mi[idx]), tau=float(self.tau[idx]),
            argmax=tuple(float(self.values[i]) for i in idx),
        )

    def rows(self):
        """(param1, param2 or None, tau, air) in grid order."""
        if self.air.ndim == 1:
            for i, v in enumerate(self.values):
                yield float(v), None, float(self.tau[i]), float(self.air[i])
        else:
            for i, p in enumerate(self.values):
                for j, q in enumerate(self.values):
                    yield float(p), float(q), float(self.tau[i, j]), float(self.air[i, j])


def input_grid(grid_step: float) -> np.ndarray:
    """Interior grid {step, 2 step, ..., 1 - step}."""
    n = round(1.0 / grid_step)
    if not grid_step > 0 or abs(n * grid_step - 1.0) > 1e-9 or n < 2:
        raise ValueError(f"grid_step {grid_step!r} must divide 1")
    return np.round(np.arange(1, n) / n, 12)


def _points(scenario: Scenario, values):
    if scenario.markov:
        return [MarkovSource(p, q) for p in values for q in values]
    return [IndependentSource(v) for v in values]


def _priors(src):
    """P(s = 1 | last history bit = 0), P(s = 1 | last bit = 1)."""
    if isinstance(src, IndependentSource):
        return src.lambda1, src.lambda1
    return src.p, 1.0 - src.q


def _xlogratio(c, tot):
    with np.errstate(divide="ignore", invalid="ignore"):
        v = c * np.log2(tot / c)
    return np.where(c > 0, v, 0.0)


class GridEvaluator:
    """Threshold-optimized MI for many sources on one channel realization."""

    TAU_CHUNK_ELEMS = 1 << 22

    def __init__(self, scenario: Scenario, params: SystemParams, cir: ChannelImpulseResponse,
                 search: ThresholdSearch = GRID_SEARCH):
        self.scenario = scenario
        self.search = search
        self.moments = moments_for(cir, params)
        self.width = self.moments.width
        self.lo, self.hi = search.bounds(cir, params)
        self.taus = np.linspace(self.lo, self.hi, search.coarse_steps)
        self.step = (self.hi - self.lo) / (search.coarse_steps - 1)
        last = history_structure(self.width)[:, 1]
        self.groups = [np.flatnonzero(last == b) for b in (0, 1)]
        self._qcache = {}

    # -- coarse stage -----------------------------------------------------
    def _tau_chunks(self, nh):
        size = max(1, self.TAU_CHUNK_ELEMS // max(nh, 1))
        for lo in range(0, self.taus.size, size):
            yield slice(lo, lo + size)

    def _qtables(self, b: int, sl: slice):
        key = (b, sl.start, sl.stop)
        cached = self._qcache.get(key)
        if cached is not None:
            return cached
        idx = self.groups[b]
        mom = self.moments
        sub = type(mom)(mom.mean0[idx], mom.std0[idx], mom.mean1[idx], mom.std1[idx])
        p01, p11 = q_tables(sub, self.taus[sl])
        tabs = (1.0 - p01, p01, 1.0 - p11, p11)
        if idx.size * self.taus.size <= self.TAU_CHUNK_ELEMS:
            self._qcache[key] = tabs
        return tabs

    def group_contribution(self, b: int, r: float, sources):
        """Coarse-scan contribution of histories ending in bit ``b``.

        Aware: an (n_src, n_tau) equivocation part. Unaware: the four joint
        masses P(s, s_hat) as a (4, n_src, n_tau) array.
        """
        idx = self.groups[b]
        w = np.exp(np.array([log_history_weights(s, self.width)[idx] for s in sources]))
        nt = self.taus.size
        if self.scenario.aware:
            out = np.empty((len(sources), nt))
        else:
            out = np.empty((4, len(sources), nt))
        for sl in self._tau_chunks(idx.size):
            p00, p01, p10, p11 = self._qtables(b, sl)
            c00, c01 = (1 - r) * p00, (1 - r) * p01
            c10, c11 = r * p10, r * p11
            if self.scenario.aware:
                phi = (_xlogratio(c00, c00 + c10) + _xlogratio(c10, c00 + c10)
                       + _xlogratio(c01, c01 + c11) + _xlogratio(c11, c01 + c11))
                out[:, sl] = w @ phi
            else:
                for k, c in enumerate((c00, c01, c10, c11)):
                    out[k, :, sl] = w @ c
        return out

    def coarse(self, sources, map_fn=map):
        """Raw MI (before clipping) on the coarse threshold grid, per source."""
        n = len(sources)
        keys = {}
        for i, s in enumerate(sources):
            for b, r in enumerate(_priors(s)):
                keys.setdefault((b, r), []).append(i)
        tasks = sorted(keys)
        args = [(b, r, [sources[i] for i in keys[(b, r)]]) for b, r in tasks]
        results = list(map_fn(self._group_task, args))
        nt = self.taus.size
        acc = np.zeros((n, nt)) if self.scenario.aware else np.zeros((4, n, nt))
        # fixed accumulation order: bit 0 groups then bit 1 groups
        for (b, r), res in sorted(zip(tasks, results), key=lambda x: x[0]):
            rows = keys[(b, r)]
            if self.scenario.aware:
                acc[rows] += res
            else:
                acc[:, rows] += res
        if self.scenario.aware:
            equiv = acc
        else:
            s00, s01, s10, s11 = acc
            equiv = (_xlogratio(s00, s00 + s10) + _xlogratio(s10, s00 + s10)
                     + _xlogratio(s01, s01 + s11) + _xlogratio(s11, s01 + s11))
        rates = np.array([entropy_rate(s) for s in sources])
        return rates[:, None] - equiv

    def _group_task(self, args):
        return self.group_contribution(*args)

    # -- refinement -------------------------------------------------------
    def refine(self, src, coarse_row):
        k = int(np.argmax(coarse_row))
        mom = self.moments
        w, r = history_weights(src, self.width)
        rate = entropy_rate(src)

        def evaluate(taus):
            return rate - kernels.equivocation(mom.mean0, mom.std0, mom.mean1, mom.std1,
                                               w, r, taus, self.scenario.aware)

        return _refine(evaluate, float(self.taus[k]), float(coarse_row[k]), self.step,
                       self.search, self.lo, self.hi)

    def _refine_task(self, args):
        sources, rows = args
        return [self.refine(s, row) for s, row in zip(sources, rows)]

    def optimize(self, sources, map_fn=map, chunk=64):
        """(tau*, raw MI*) arrays for every source."""
        coarse = self.coarse(sources, map_fn)
        args = [(sources[i:i + chunk], coarse[i:i + chunk]) for i in range(0, len(sources), chunk)]
        out = [t for part in map_fn(self._refine_task, args) for t in part]
        taus = np.array([t for t, _ in out])
        raw = np.array([v for _, v in out])
        return taus, raw


class _Pool:
    """map() over a process pool, or the builtin map for one worker."""

    def __init__(self, workers: int):
        self.workers = max(1, int(workers))
        self.ex = None

    def __enter__(self):
        if self.workers > 1:
            self.ex = ProcessPoolExecutor(self.workers)
        return self.ex.map if self.ex else map

    def __exit__(self, *exc):
        if self.ex:
            self.ex.shutdown()


def air_surface(scenario: Scenario, params: SystemParams, t_sym: float, grid_step: float = 0.01,
                search: ThresholdSearch = GRID_SEARCH, workers: int = 1, values=None,
                memory_cap: int = DEFAULT_MEMORY_CAP, cir: ChannelImpulseResponse | None = None
                ) -> AirSurface:
    """Optimal threshold and AIR at every point of the input grid."""
    if isinstance(scenario, str):
        scenario = Scenario.parse(scenario)
    values = input_grid(grid_step) if values is None else np.asarray(values, dtype=float)
    cir = cir or compute_cir(params, t_sym, memory_cap=memory_cap)
    ev = GridEvaluator(scenario, params, cir, search)
    sources = _points(scenario, values)
    with _Pool(workers) as map_fn:
        taus, raw = ev.optimize(sources, map_fn)
    shape = (values.size, values.size) if scenario.markov else (values.size,)
    return AirSurface(scenario=scenario.name, t_sym=t_sym, memory=cir.memory, values=values,
                      tau=taus.reshape(shape), mi=np.maximum(raw, 0.0).reshape(shape))


def capacity(scenario: Scenario, params: SystemParams, t_sym: float, grid_step: float = 0.01,
             search: ThresholdSearch = GRID_SEARCH, workers: int = 1, values=None,
             memory_cap: int = DEFAULT_MEMORY_CAP) -> CapacityResult:
    return air_surface(scenario, params, t_sym, grid_step, search, workers, values,
                       memory_cap).capacity()


@dataclass(frozen=True)
class SweepPoint:
    t_sym: float
    result: CapacityResult | None
    error: str | None = None


def sweep_grid(t_min: float, t_max: float, step: float) -> np.ndarray:
    if not step > 0:
        raise ValueError("t_sym step must be > 0")
    n = int(math.floor((t_max - t_min) / step + 1e-9))
    return np.round(t_min + step * np.arange(n + 1), 12)


def capacity_sweep(scenario: Scenario, params: SystemParams, t_sym_range=(0.2, 1.5),
                   t_sym_step: float = 0.05, grid_step: float = 0.01,
                   search: ThresholdSearch = GRID_SEARCH, workers: int = 1,
                   memory_cap: int = DEFAULT_MEMORY_CAP, t_syms=None):
    """Capacity per symbol interval; points whose memory overflows are flagged."""
    if isinstance(scenario, str):
        scenario = Scenario.parse(scenario)
    grid = sweep_grid(*t_sym_range, t_sym_step) if t_syms is None else np.asarray(t_syms, float)
    out = []
    for t in grid:
        try:
            res = capacity(scenario, params, float(t), grid_step, search, workers,
                           memory_cap=memory_cap)
            out.append(SweepPoint(float(t), res))
        except ChannelError as exc:
            out.append(SweepPoint(float(t), None, str(exc)))
    return out
