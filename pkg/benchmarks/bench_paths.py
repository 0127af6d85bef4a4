#!/usr/bin/env python3
"""Time the compiled path engine against the pure-Python fallback.

Both engines derive one RNG stream per path from (seed, path index), so
their outputs must agree bit for bit; the script asserts that on the
benchmark workload before printing the timing table.
"""

import argparse
import time

import numpy as np

from harnacklab import build_space, make_kernel
from harnacklab.montecarlo import _tables

try:
    from harnacklab import _pathsim
except ImportError:
    _pathsim = None
from harnacklab import _pathsim_py


def bench(engine, cum, lam, mask, paths, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = engine.exit_times(cum, lam, mask, 0, 1e6, 7, paths, 10 ** 6)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(
        description="benchmark exit-time sampling on a 1-d torus")
    ap.add_argument("--side", type=int, default=64)
    ap.add_argument("--radius", type=float, default=8.0)
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    space = build_space("torus", d=1, side=args.side,
                        radius_window=(1.0, args.side / 8))
    kernel = make_kernel(space, {"family": "power", "alpha": 1.0},
                         {"kind": "stable-like"})
    cum, lam = _tables(space, kernel)
    mask = np.zeros(space.n, dtype=np.uint8)
    mask[space.ball(0, args.radius)] = 1

    t_py, out_py = bench(_pathsim_py, cum, lam, mask, args.paths,
                         args.repeats)
    rows = [("pure-python", t_py, 1.0)]
    if _pathsim is None:
        print("compiled engine not built; timing the fallback only")
    else:
        t_c, out_c = bench(_pathsim, cum, lam, mask, args.paths,
                           args.repeats)
        assert out_c[0].tobytes() == out_py[0].tobytes(), "engines disagree"
        assert np.array_equal(out_c[1], out_py[1]), "engines disagree"
        rows.insert(0, ("compiled", t_c, t_py / t_c))

    print("exit_times: side=%d radius=%g paths=%d (best of %d)"
          % (args.side, args.radius, args.paths, args.repeats))
    print("%-12s %10s %9s" % ("engine", "seconds", "speedup"))
    for name, secs, speed in rows:
        print("%-12s %10.4f %8.1fx" % (name, secs, speed))


if __name__ == "__main__":
    main()
