"""Time the numba kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_backends.py [--repeat N]``.  Each case is
timed after one warm-up call (which also triggers numba compilation).
"""
import argparse
import time

import numpy as np

from limitexec import _backend
from limitexec.intensity import ExponentialIntensity, figure1_tilde
from limitexec.value_solver import LiquidationProblem


def _cases():
    P = LiquidationProblem(400, 50, 300)
    th_T = P.terminal_theta()
    c = P.gamma * P.delta_size
    p = np.linspace(-10, 20, 20000)
    for label, model in (("exponential", ExponentialIntensity(0.1, 0.3)), ("tilde", figure1_tilde())):
        kind, prm = model.packed()

        def quotes(k, kind=kind, prm=prm):
            d, h = np.empty_like(p), np.empty_like(p)
            k.quote_batch(kind, prm, 0, c, P.gamma, p, np.full(p.size, np.nan), d, h)

        def march(k, kind=kind, prm=prm):
            k.march_liquidation(kind, prm, 0, c, P.gamma, 0.0, 0.3, 50.0, th_T, 0.01, 30000, 0,
                                -np.inf, -np.inf)
        yield f"quote_batch/{label} (20k)", quotes
        yield f"march/{label} (30k steps)", march

    nsteps = 6000
    hazard = np.zeros((9, nsteps + 1))
    hazard[1:, 1:] = np.cumsum(np.full((nsteps, 8), 0.05 * 0.05), axis=0).T
    quotes_tab = np.ones((nsteps, 9))
    ell = np.full(9, 3.0)

    def sim(k):
        k.simulate_paths(hazard, quotes_tab, np.uint64(1), 20000, 50.0, 0.0, 0.3, 0.05,
                         0.0, 0.0, 0.001, ell, 13)
    yield "simulate_paths (20k paths)", sim


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if _backend.numba_available() else [])
    print(f"{'case':34s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for name, fn in _cases():
        times = []
        for b in backends:
            k = _backend.get_kernels(b)
            fn(k)
            best = min(_timed(fn, k) for _ in range(args.repeat))
            times.append(best)
        ratio = times[0] / times[-1] if len(times) > 1 else float("nan")
        print(f"{name:34s}" + "".join(f"{t:11.4f}s" for t in times) + f"{ratio:9.1f}x")


def _timed(fn, k):
    t = time.perf_counter()
    fn(k)
    return time.perf_counter() - t


if __name__ == "__main__":
    main()
