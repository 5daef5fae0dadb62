"""Diffusion channel between a point transmitter and a fully absorbing sphere.

The receiver counts absorbed particles per symbol interval and resets its
counter at each boundary, so the impulse response is the per-interval
increment of the expected cumulative absorption curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

DEFAULT_MEMORY_CAP = 22


class ChannelError(ValueError):
    """Invalid physical parameters or an unusable memory estimate."""


class MemoryOverflowError(ChannelError):
    def __init__(self, required: int, cap: int):
        super().__init__(f"effective memory M={required} exceeds cap {cap}")
        self.required = required
        self.cap = cap


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the link plus the external-noise moments.

    Lengths in micrometres, time in seconds, counts in molecules.
    """

    n_released: int = 10_000
    receiver_radius: float = 1.0
    distance: float = 10.0
    diffusion_coeff: float = 79.4
    noise_mean: float = 50.0
    noise_std: float = 50.0
    alpha: float = 0.001

    def __post_init__(self):
        if not self.n_released >= 1:
            raise ChannelError("n_released must be >= 1")
        if not self.receiver_radius > 0:
            raise ChannelError("receiver_radius must be > 0")
        if not self.distance > self.receiver_radius:
            raise ChannelError("distance must exceed receiver_radius")
        if not self.diffusion_coeff > 0:
            raise ChannelError("diffusion_coeff must be > 0")
        if not self.noise_std > 0:
            raise ChannelError("noise_std must be > 0")
        if not math.isfinite(self.noise_mean):
            raise ChannelError("noise_mean must be finite")
        if not 0 < self.alpha < self.hit_probability:
            raise ChannelError("alpha must lie in (0, receiver_radius/distance)")

    @property
    def hit_probability(self) -> float:
        """Probability that a released particle is ever absorbed, R/d."""
        return self.receiver_radius / self.distance

    @property
    def _erfc_scale(self) -> float:
        # erfc argument is scale / sqrt(t)
        return (self.distance - self.receiver_radius) / (2.0 * math.sqrt(self.diffusion_coeff))


@dataclass(frozen=True)
class ChannelImpulseResponse:
    t_sym: float
    t_alpha: float
    memory: int
    h: np.ndarray = field(repr=False)
    degenerate: bool = False

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        if h.shape != (self.memory,):
            raise ChannelError("h must have exactly `memory` taps")

    @classmethod
    def from_taps(cls, h, t_sym: float = 1.0) -> "ChannelImpulseResponse":
        """Wrap a synthetic tap vector (tests, what-if studies)."""
        h = np.asarray(h, dtype=float)
        return cls(t_sym=t_sym, t_alpha=t_sym * (len(h) - 1), memory=len(h), h=h)


def _absorbed_fraction(params: SystemParams, t):
    """Cumulative absorbed fraction N(t)/N_T, vectorized; exact 0 at t = 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ChannelError("time must be non-negative")
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = params.hit_probability * erfc(params._erfc_scale / np.sqrt(t[pos]))
    return out


def expected_cumulative_absorbed(params: SystemParams, t: float) -> float:
    """Expected number of particles absorbed by time ``t`` without resets."""
    if t == math.inf:
        return params.n_released * params.hit_probability
    return float(params.n_released * _absorbed_fraction(params, t))


def hitting_probability(params: SystemParams, t_sym: float, i: int) -> float:
    """Probability that one particle is absorbed inside the ``i``-th interval."""
    if not t_sym > 0:
        raise ChannelError("t_sym must be > 0")
    if i < 1:
        raise ChannelError("interval index starts at 1")
    hi, lo = _absorbed_fraction(params, [i * t_sym, (i - 1) * t_sym])
    return float(hi - lo)


def window_probability(params: SystemParams, t, t_sym: float):
    """Absorption probability inside the window [t, t + t_sym]."""
    t = np.asarray(t, dtype=float)
    return _absorbed_fraction(params, t + t_sym) - _absorbed_fraction(params, t)


def _regula_falsi(f, a: float, b: float, fa: float, fb: float, tol: float, maxiter: int):
    # Illinois variant: halves the retained endpoint value to avoid one-sided stagnation.
    side = 0
    c = a
    for _ in range(maxiter):
        c = (a * fb - b * fa) / (fb - fa)
        fc = f(c)
        if abs(fc) <= tol:
            return c
        if fc * fb > 0:
            b, fb = c, fc
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            a, fa = c, fc
            if side == 1:
                fb *= 0.5
            side = 1
    raise ChannelError("regula falsi did not converge")


@dataclass(frozen=True)
class MemoryEstimate:
    t_alpha: float
    memory: int
    degenerate: bool = False


def effective_memory(
    params: SystemParams,
    t_sym: float,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    tol: float = 1e-12,
    maxiter: int = 200,
) -> MemoryEstimate:
    """Solve for the time after which an interval-long window holds < alpha.

    The root is taken on the decaying tail of the window probability; the
    memory length is the number of whole intervals needed to cover it.
    """
    if not t_sym > 0:
        raise ChannelError("t_sym must be > 0")

    def g(t):
        return float(window_probability(params, t, t_sym)) - params.alpha

    # coarse geometric scan for the peak, then a bounded local polish
    scan = np.concatenate([[0.0], t_sym * 2.0 ** np.arange(-30, 8)])
    vals = window_probability(params, scan, t_sym)
    k = int(np.argmax(vals))
    t_peak, g_peak = float(scan[k]), float(vals[k]) - params.alpha
    if g_peak <= 0:
        from scipy.optimize import minimize_scalar

        lo = scan[max(k - 1, 0)]
        hi = scan[min(k + 1, len(scan) - 1)]
        res = minimize_scalar(lambda t: -g(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14 * max(hi, 1.0)})
        if -res.fun <= 0:
            return MemoryEstimate(t_alpha=0.0, memory=1, degenerate=True)
        t_peak, g_peak = float(res.x), float(-res.fun)

    t_hi = max(t_peak, t_sym)
    g_hi = g(t_hi)
    while g_hi >= 0:
        t_hi *= 2.0
        g_hi = g(t_hi)
    t_alpha = _regula_falsi(g, t_peak, t_hi, g_peak, g_hi, tol, maxiter)
    memory = max(1, math.ceil(t_alpha / t_sym))
    if memory > memory_cap:
        raise MemoryOverflowError(memory, memory_cap)
    return MemoryEstimate(t_alpha=t_alpha, memory=memory)


def compute_cir(
    params: SystemParams, t_sym: float, memory_cap: int = DEFAULT_MEMORY_CAP
) -> ChannelImpulseResponse:
    est = effective_memory(params, t_sym, memory_cap=memory_cap)
    edges = _absorbed_fraction(params, t_sym * np.arange(est.memory + 1))
    h = np.diff(edges)
    return ChannelImpulseResponse(
        t_sym=t_sym, t_alpha=est.t_alpha, memory=est.memory, h=h, degenerate=est.degenerate
    )


@dataclass(frozen=True)
class GaussianValidity:
    ratios: tuple
    tap_valid: tuple
    valid: bool


def validate_gaussian(params: SystemParams, cir: ChannelImpulseResponse) -> GaussianValidity:
    """Check that each tap's binomial count sits three std-devs above zero."""
    h = cir.h
    ratios = params.n_released * h / (1.0 - h)
    ok = tuple(bool(r > 9.0) for r in ratios)
    return GaussianValidity(ratios=tuple(float(r) for r in ratios), tap_valid=ok, valid=all(ok))
