"""Compiled vs numpy equivocation kernel.

    python3 benchmarks/bench_kernels.py [--t-sym 0.4 0.7 1.0] [--taus 64] [--repeat 3]
"""
import argparse
import time

import numpy as np

from mcair import _pykernels
from mcair.channel import SystemParams, compute_cir
from mcair.mutual_info import history_weights, moments_for
from mcair.sources import MarkovSource

try:
    from mcair import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-sym", type=float, nargs="+", default=[0.4, 0.7, 1.0])
    ap.add_argument("--taus", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    params = SystemParams()
    src = MarkovSource(0.6, 0.62)
    print(f"{'t_sym':>6} {'M':>3} {'hist':>6} {'mode':>8} {'numpy ms':>10} {'cython ms':>10} "
          f"{'speedup':>8} {'max |diff|':>11}")
    for t_sym in args.t_sym:
        cir = compute_cir(params, t_sym)
        mom = moments_for(cir, params)
        w, r = history_weights(src, mom.width)
        lo, hi = 0.0, params.noise_mean + 1e4 * cir.h.sum()
        taus = np.linspace(lo, hi, args.taus)
        for aware in (True, False):
            kargs = (mom.mean0, mom.std0, mom.mean1, mom.std1, w, r, taus, aware)
            t_np, v_np = best_of(lambda: _pykernels.equivocation(*kargs), args.repeat)
            if _ckernels is None:
                t_c, diff = float("nan"), float("nan")
            else:
                t_c, v_c = best_of(lambda: _ckernels.equivocation(*kargs), args.repeat)
                diff = float(np.max(np.abs(v_c - v_np)))
            mode = "aware" if aware else "unaware"
            print(f"{t_sym:6.2f} {cir.memory:3d} {w.size:6d} {mode:>8} {t_np * 1e3:10.1f} "
                  f"{t_c * 1e3:10.1f} {t_np / t_c:8.2f} {diff:11.2e}")


if __name__ == "__main__":
    main()
