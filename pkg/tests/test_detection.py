import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcair.channel import ChannelImpulseResponse, MemoryOverflowError, compute_cir
from mcair.detection import (Detector, build_transition_table, conditional_moments,
                             history_bits, history_moments, history_string, q_function,
                             transition_probability)

import oracles


def test_q_function_values():
    assert q_function(0.0) == 0.5
    assert q_function(math.inf) == 0.0 and q_function(-math.inf) == 1.0
    assert abs(q_function(1.959964) - oracles.Q_1_959964) < 1e-15
    assert abs(q_function(1.959964) - 0.025) < 1e-6
    assert q_function(30.0) == pytest.approx(4.906713927148187e-198, rel=1e-12)
    z = np.linspace(-10, 10, 2001)
    d = np.diff(q_function(z))
    assert np.all(d <= 0)
    assert np.all(d[np.abs(z[1:]) < 5] < 0)  # strict where doubles resolve it


def test_detector_rejects_non_finite():
    with pytest.raises(ValueError):
        Detector(math.nan)
    with pytest.raises(ValueError):
        Detector(-math.inf)


def test_history_encoding():
    # bit 0 is the oldest symbol, the string is written oldest first
    assert list(history_bits(0b011, 3)) == [1, 1, 0]
    assert history_string(0b011, 3) == "110"
    with pytest.raises(ValueError):
        history_bits(8, 3)


def test_moments_trivial_cases(params):
    cir = compute_cir(params, 1.0)
    w = cir.memory - 1
    g0 = conditional_moments(cir, params, 0, 0)
    assert (g0.mean, g0.variance) == (50.0, 2500.0)
    g1 = conditional_moments(cir, params, 0, 1)
    h1 = cir.h[0]
    assert g1.mean == pytest.approx(50 + 1e4 * h1, rel=1e-15)
    assert g1.variance == pytest.approx(2500 + 1e4 * h1 * (1 - h1), rel=1e-15)
    gall = conditional_moments(cir, params, (1 << w) - 1, 1)
    assert gall.mean == pytest.approx(50 + 1e4 * sum(oracles.H_TSYM1), rel=1e-12)


def test_moments_tap_alignment(params):
    cir = ChannelImpulseResponse.from_taps([0.05, 0.02, 0.01])
    # history oldest first: (s_{i-2}, s_{i-1}) = (1, 0) -> tap h_3 only
    g = conditional_moments(cir, params, [1, 0], 0)
    assert g.mean == pytest.approx(50 + 1e4 * 0.01)
    g = conditional_moments(cir, params, 0b10, 0)  # bit 1 = s_{i-1}
    assert g.mean == pytest.approx(50 + 1e4 * 0.02)
    with pytest.raises(ValueError):
        conditional_moments(cir, params, [1, 0, 0], 0)


def test_transition_probability_limits(params):
    cir = compute_cir(params, 1.0)
    for s in (0, 1):
        assert transition_probability(cir, params, Detector(-1e9), 5, s, 1) == 1.0
    assert transition_probability(cir, params, Detector(50.0), 0, 0, 1) == 0.5
    tau = 50 + 1e4 * cir.h[0]
    assert transition_probability(cir, params, Detector(tau), 0, 1, 1) == pytest.approx(0.5)


def test_table_matches_scalar_path(params):
    cir = compute_cir(params, 1.0)
    small = ChannelImpulseResponse.from_taps(cir.h[:3], 1.0)
    det = Detector(150.0)
    table = build_transition_table(small, params, det)
    assert table.p1.shape == (4, 2)
    for (hist, s, s_hat), v in table.entries.items():
        assert v == pytest.approx(transition_probability(small, params, det, hist, s, s_hat),
                                  abs=1e-15)
        window = list(history_bits(hist, 2)) + [s]
        ref = oracles.p_detect(small.h, 1e4, 50, 50, 150.0, window)
        assert (v if s_hat else 1 - v) == pytest.approx(ref, abs=1e-14)


def test_single_tap_table_is_binary_channel(params):
    table = build_transition_table(ChannelImpulseResponse.from_taps([0.03]), params,
                                   Detector(200.0))
    assert len(table.entries) == 4
    assert table.to_csv().splitlines() == [
        "history,s,p_hat0,p_hat1",
        f",0,{1 - table.p1[0, 0]:.9g},{table.p1[0, 0]:.9g}",
        f",1,{1 - table.p1[0, 1]:.9g},{table.p1[0, 1]:.9g}",
    ]


def test_table_csv_order(params):
    table = build_transition_table(compute_cir(params, 2.0), params, Detector(300.0))
    rows = table.to_csv().splitlines()
    assert rows[0] == "history,s,p_hat0,p_hat1"
    assert [r.split(",")[0] for r in rows[1:5]] == ["000000", "000000", "100000", "100000"]
    assert len(rows) == 1 + 2 * 2**6


def test_table_cap(params):
    with pytest.raises(MemoryOverflowError):
        build_transition_table(compute_cir(params, 1.0), params, Detector(0.0), memory_cap=4)


@given(st.floats(-500, 2000), st.integers(0, 255))
def test_rows_normalized_and_bounded(tau, hist):
    from mcair.channel import SystemParams
    p = SystemParams()
    cir = compute_cir(p, 1.0)
    for s in (0, 1):
        a = transition_probability(cir, p, Detector(tau), hist, s, 0)
        b = transition_probability(cir, p, Detector(tau), hist, s, 1)
        assert 0 <= a <= 1 and 0 <= b <= 1
        assert abs(a + b - 1) <= 1e-12


def test_monotone_in_threshold(params):
    mom = history_moments(compute_cir(params, 1.0), params)
    from mcair.detection import q_tables
    p0, p1 = q_tables(mom, np.linspace(-200, 1500, 400))
    assert np.all(np.diff(p0, axis=1) <= 0) and np.all(np.diff(p1, axis=1) <= 0)


def test_dominance_and_isi_monotonicity(params):
    cir = compute_cir(params, 1.0)
    mom = history_moments(cir, params)
    assert np.all(mom.mean1 > mom.mean0)
    w = cir.memory - 1
    for hist in range(1 << w):
        for k in range(w):
            if not hist >> k & 1:
                assert mom.mean0[hist | 1 << k] > mom.mean0[hist]
        for tau in np.linspace(-100, mom.mean0[hist], 7):
            det = Detector(tau)
            assert (transition_probability(cir, params, det, hist, 1, 1)
                    >= transition_probability(cir, params, det, hist, 0, 1))


def test_padded_moments_carry_zero_taps(params):
    cir = ChannelImpulseResponse.from_taps([0.05, 0.02])
    mom = history_moments(cir, params, width=3)
    assert mom.width == 3
    # only bit 2 (s_{i-1}) carries a tap
    np.testing.assert_allclose(mom.mean0[[0, 1, 2, 3]], 50.0)
    np.testing.assert_allclose(mom.mean0[4], 50 + 1e4 * 0.02)
