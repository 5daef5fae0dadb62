"""Pure numpy equivocation kernels (fallback for the compiled extension)."""
import numpy as np
from scipy.special import erfc

INV_SQRT2 = 1.0 / np.sqrt(2.0)


def _xlogratio(c, tot):
    with np.errstate(divide="ignore", invalid="ignore"):
        v = c * np.log2(tot / c)
    return np.where(c > 0, v, 0.0)


def _tails(tau, mean, std):
    z = (tau[:, None] - mean[None, :]) / std[None, :]
    # smaller tail directly, larger one by complement
    t = 0.5 * erfc(np.abs(z) * INV_SQRT2)
    pos = z >= 0
    return np.where(pos, 1.0 - t, t), np.where(pos, t, 1.0 - t)


def equivocation(mean0, std0, mean1, std1, w, r, taus, aware, chunk=64):
    """Conditional entropy of the current symbol, one value per threshold.

    ``w[h]`` is the probability of history h and ``r[h]`` = P(s = 1 | h).
    Aware: H(S | history, S_hat). Unaware: H(S | S_hat).
    """
    taus = np.asarray(taus, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float)
    r = np.asarray(r, dtype=float)
    out = np.empty(taus.size)
    w0 = w * (1.0 - r)
    w1 = w * r
    for lo in range(0, taus.size, chunk):
        t = taus[lo:lo + chunk]
        a0, a1 = _tails(t, mean0, std0)
        b0, b1 = _tails(t, mean1, std1)
        a0, a1, b0, b1 = a0 * w0, a1 * w0, b0 * w1, b1 * w1
        if aware:
            hs = (_xlogratio(a0, a0 + b0) + _xlogratio(b0, a0 + b0)
                  + _xlogratio(a1, a1 + b1) + _xlogratio(b1, a1 + b1))
            out[lo:lo + chunk] = hs.sum(axis=1)
        else:
            s00, s01, s10, s11 = (x.sum(axis=1) for x in (a0, a1, b0, b1))
            out[lo:lo + chunk] = (_xlogratio(s00, s00 + s10) + _xlogratio(s10, s00 + s10)
                                  + _xlogratio(s01, s01 + s11) + _xlogratio(s11, s01 + s11))
    return out
