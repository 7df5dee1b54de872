"""Compare the compiled and pure-Python special-function kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints per-call timings for both backends and the largest relative
difference between them on the same inputs.
"""
import argparse
import timeit

import numpy as np

from iqscc import _kernels

try:
    from iqscc import _speedups
except ImportError:  # pragma: no cover
    _speedups = None


def _cases(rng, n=200):
    orders = rng.integers(0, 30, n)
    xs = 10 ** rng.uniform(-2, 2.5, n)
    ms = rng.integers(1, 8, n)
    a = rng.uniform(0, 30, n)
    b = rng.uniform(0, 30, n)
    return orders, xs, ms, a, b


def _run(mod, cases):
    orders, xs, ms, a, b = cases
    bes = [mod.bessel_i(int(o), float(x)) for o, x in zip(orders, xs)]
    mq = [mod.marcum_q(int(m), float(u), float(v), 1e-10) for m, u, v in zip(ms, a, b)]
    return np.array(bes), np.array(mq)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    cases = _cases(np.random.default_rng(args.seed))
    n_calls = 2 * len(cases[0])
    mods = [("python", _kernels)] + ([("cython", _speedups)] if _speedups else [])
    times = {}
    for name, mod in mods:
        t = min(timeit.repeat(lambda: _run(mod, cases), number=1, repeat=args.repeat))
        times[name] = t
        print("%-7s %9.2f us/call" % (name, 1e6 * t / n_calls))
    if _speedups is None:
        print("compiled extension not built; only the fallback was timed")
        return 0
    bp, mp = _run(_kernels, cases)
    bc, mc = _run(_speedups, cases)
    rel = max(np.max(np.abs(bp - bc) / np.abs(bp)), np.max(np.abs(mp - mc) / np.maximum(np.abs(mp), 1e-300)))
    print("speedup %.1fx, max relative difference %.2e" % (times["python"] / times["cython"], rel))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
