import math

import numpy as np
import pytest

from mcair.channel import ChannelImpulseResponse, SystemParams, compute_cir
from mcair.mutual_info import Scenario, equivocation, moments_for
from mcair.optimize import (GRID_SEARCH, CapacityResult, GridEvaluator, ThresholdSearch, air,
                            air_surface, capacity, capacity_sweep, default_bounds, input_grid,
                            optimize_threshold, sweep_grid)
from mcair.sources import IndependentSource, MarkovSource, entropy_rate


def test_air():
    assert air(1.0, 0.5) == 2.0
    assert air(0.0, 3.0) == 0.0
    assert air(0.3, 0.7) < air(0.4, 0.7)
    with pytest.raises(ValueError):
        air(1.0, 0.0)


def test_search_validation():
    with pytest.raises(ValueError):
        ThresholdSearch(coarse_steps=8)
    with pytest.raises(ValueError):
        ThresholdSearch(lo=5.0, hi=1.0)


def test_input_grid():
    g = input_grid(0.01)
    assert g[0] == 0.01 and g[-1] == 0.99 and g.size == 99
    assert set(input_grid(0.05)) <= set(g)
    with pytest.raises(ValueError):
        input_grid(0.03)


def test_symmetric_channel_threshold_at_midpoint():
    # the pulse adds N_T h (1 - h) ~ 3e5 to a noise variance of 1e10
    nt, h1 = 10**9, 3e-4
    p = SystemParams(n_released=nt, noise_std=1e5)
    cir = ChannelImpulseResponse.from_taps([h1])
    search = ThresholdSearch()
    tau, _ = optimize_threshold(Scenario.parse("ind-isia"), cir, p, IndependentSource(0.5), search)
    lo, hi = default_bounds(cir, p)
    refined_step = (hi - lo) / (search.coarse_steps - 1) * search.shrink**search.refine_rounds
    assert abs(tau - (50 + nt * h1 / 2)) <= refined_step


def test_optimum_dominates_endpoints(params):
    cir = compute_cir(params, 0.7)
    src = MarkovSource(0.55, 0.55)
    sc = Scenario.parse("crr-isia")
    tau, mi = optimize_threshold(sc, cir, params, src)
    lo, hi = default_bounds(cir, params)
    ends = entropy_rate(src) - equivocation(sc, moments_for(cir, params), src, [lo, hi])
    assert mi >= max(ends.max(), 0.0)


def test_threshold_matches_dense_grid_oracle(params):
    cir = compute_cir(params, 0.7)
    src = MarkovSource(0.55, 0.55)
    sc = Scenario.parse("crr-isia")
    _, mi = optimize_threshold(sc, cir, params, src)
    lo, hi = default_bounds(cir, params)
    dense = entropy_rate(src) - equivocation(sc, moments_for(cir, params), src,
                                             np.linspace(lo, hi, 10_000))
    assert abs(mi - dense.max()) <= 1e-4
    assert mi >= dense.max() - 1e-9  # refinement never loses to the dense grid here


@pytest.mark.parametrize("name", ["crr-isia", "crr-isiu", "ind-isia", "ind-isiu"])
def test_grid_evaluator_matches_pointwise(params, name):
    sc = Scenario.parse(name)
    cir = compute_cir(params, 0.6)
    values = [0.2, 0.5, 0.8]
    surf = air_surface(sc, params, 0.6, values=values, cir=cir)
    pts = [(p, q) for p in values for q in values] if sc.markov else [(v,) for v in values]
    flat_mi = surf.mi.reshape(-1)
    for k, pt in enumerate(pts):
        src = MarkovSource(*pt) if sc.markov else IndependentSource(*pt)
        _, mi = optimize_threshold(sc, cir, params, src, GRID_SEARCH)
        assert flat_mi[k] == pytest.approx(mi, abs=1e-12)


def test_workers_do_not_change_results(params):
    a = air_surface("crr-isiu", params, 0.8, grid_step=0.1, workers=1)
    b = air_surface("crr-isiu", params, 0.8, grid_step=0.1, workers=2)
    assert np.array_equal(a.air, b.air) and np.array_equal(a.tau, b.tau)


def test_surface_and_capacity_invariants(params):
    t_sym = 0.9
    res = {n: air_surface(n, params, t_sym, grid_step=0.1)
           for n in ("crr-isia", "crr-isiu", "ind-isia", "ind-isiu")}
    assert np.all(res["crr-isia"].air >= res["crr-isiu"].air - 1e-9)
    assert np.all(res["ind-isia"].air >= res["ind-isiu"].air - 1e-9)
    for s in res.values():
        c = s.capacity()
        assert c.air == c.mi / c.t_sym
        assert all(v in set(s.values) for v in c.argmax)
        np.testing.assert_array_equal(s.air, s.mi / t_sym)
    # independent grid embeds into the Markov grid (p = lambda1, q = lambda0)
    for kw in ("isia", "isiu"):
        assert res[f"ind-{kw}"].capacity().air <= res[f"crr-{kw}"].capacity().air + 1e-9


def test_capacity_grid_refinement_monotone(params):
    for name in ("ind-isiu", "crr-isia"):
        coarse = capacity(name, params, 1.2, grid_step=0.1)
        fine = capacity(name, params, 1.2, grid_step=0.05)
        assert fine.air >= coarse.air - 1e-9


def test_capacity_tie_break_is_row_major():
    from mcair.optimize import AirSurface
    s = AirSurface("crr-isia", 1.0, 2, np.array([0.2, 0.4]), np.zeros((2, 2)),
                   np.array([[0.1, 0.3], [0.3, 0.3]]))
    assert s.capacity().argmax == (0.2, 0.4)


def test_single_point_grid(params):
    c = capacity("ind-isia", params, 0.5, values=[0.5])
    cir = compute_cir(params, 0.5)
    _, mi = optimize_threshold(Scenario.parse("ind-isia"), cir, params, IndependentSource(0.5),
                               GRID_SEARCH)
    assert c.argmax == (0.5,) and c.air == pytest.approx(mi / 0.5, abs=1e-15)
    assert isinstance(c, CapacityResult) and c.param2 is None


def test_sweep_flags_overflow(params):
    pts = capacity_sweep("ind-isia", params, t_syms=[0.3, 1.5], grid_step=0.1, memory_cap=8)
    assert pts[0].result is None and "M=" in pts[0].error
    assert pts[1].result is not None and pts[1].result.memory <= 8
    assert list(sweep_grid(0.2, 1.5, 0.05))[-1] == 1.5
    assert sweep_grid(0.2, 1.5, 0.05).size == 27
