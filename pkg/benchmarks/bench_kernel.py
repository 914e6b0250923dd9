"""Compiled vs pure-Python kernel timings.

Usage: python3 benchmarks/bench_kernel.py [--repeat N] [--quick]

Both backends run the same inputs; the last column is the largest absolute
difference between their outputs (zero when the arithmetic matches exactly).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from excitable import _backend
from excitable.detect import detect
from excitable.integrate import SolverSettings, integrate
from excitable.model import compute_equilibrium, hodgkin_huxley
from excitable.synapse import SynapseParams, periodic_train


def _best(fn, repeat):
    best, result = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def cases(quick: bool):
    hh = hodgkin_huxley()
    sparse = SynapseParams(0.8, 5.0, 0.3, 65.0)
    dense = SynapseParams(1.0, 4.0, 0.425, 65.0)
    rest = np.asarray(compute_equilibrium(hh, sparse))
    t_sparse = 100.0 if quick else 500.0
    t_dense = 20.0 if quick else 100.0
    yield ("dopri5 T=15, %g ms" % t_sparse,
           lambda b: integrate(hh, sparse, rest, periodic_train(15.0, horizon=t_sparse), t_sparse, backend=b).states)
    yield ("dopri5 T=0.01, %g ms" % t_dense,
           lambda b: integrate(hh, dense, rest, periodic_train(0.01, horizon=t_dense), t_dense, backend=b).states)
    rk4 = SolverSettings(method="rk4", max_step=0.01)
    yield ("rk4 h=0.01 T=15, %g ms" % t_sparse,
           lambda b: integrate(hh, sparse, rest, periodic_train(15.0, horizon=t_sparse), t_sparse, rk4, backend=b).states)
    rng = np.random.default_rng(0)
    n = 20_000 if quick else 200_000
    t = np.arange(n) * 0.01
    v = 60.0 * np.sin(t / 3.0) ** 8 + rng.normal(0, 2.0, n)
    yield ("detector, %d samples" % n, lambda b: detect(t, v, backend=b).times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="shorter horizons")
    args = parser.parse_args(argv)
    if not _backend.compiled_available():
        print("compiled kernel not built; only the Python backend is available")
        return 1
    print(f"{'case':34s} {'compiled s':>11s} {'python s':>10s} {'speedup':>8s} {'max diff':>9s}")
    for name, fn in cases(args.quick):
        tc, rc = _best(lambda: fn("compiled"), args.repeat)
        tp, rp = _best(lambda: fn("python"), 1)
        diff = float(np.max(np.abs(rc - rp))) if rc.size else 0.0
        print(f"{name:34s} {tc:11.4f} {tp:10.3f} {tp / tc:8.1f} {diff:9.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
