"""Compare the numba and numpy jet-product backends.

Kernel timings run in-process on random stacks of jets.  The end-to-end
timing runs a Weyl-residual sweep in two subprocesses, one with
CONFSPENCER_NO_NUMBA=1.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from confspencer import _kernels, jets

CASES = [(4, 2, 16), (4, 3, 64), (4, 4, 256), (6, 3, 256), (4, 4, 1024)]

SWEEP = """
import time, numpy as np
from confspencer import curvature as cv, backend
g = cv.MetricField.conformally_flat("0.1*x1*x2 - 0.2*x3^3 + 0.05*x4*x1^2", (1, 1, 1, 1))
cv.weyl_residual(g, np.zeros(4))
t = time.perf_counter()
for p in np.random.default_rng(0).uniform(-0.4, 0.4, (200, 4)):
    cv.weyl_residual(g, p)
print(backend(), time.perf_counter() - t)
"""


def bench_kernel(n, order, m, repeat):
    t = jets.table(n, order)
    rng = np.random.default_rng(0)
    a = rng.standard_normal((m, t.ncoef))
    b = rng.standard_normal((m, t.ncoef))
    ref = _kernels.jet_mul(a, b, t, use_numba=False)
    out = {}
    for name, flag in (("numpy", False), ("numba", True)):
        if flag and not _kernels.HAVE_NUMBA:
            continue
        res = _kernels.jet_mul(a, b, t, use_numba=flag)  # warm-up and JIT
        assert np.allclose(res, ref, rtol=1e-12, atol=1e-12)
        timer = timeit.Timer(lambda: _kernels.jet_mul(a, b, t, use_numba=flag))
        loops, _ = timer.autorange()
        out[name] = min(timer.repeat(repeat, loops)) / loops
    return t.ncoef, out


def sweep(no_numba):
    env = dict(os.environ)
    env.pop("CONFSPENCER_NO_NUMBA", None)
    if no_numba:
        env["CONFSPENCER_NO_NUMBA"] = "1"
    r = subprocess.run([sys.executable, "-c", SWEEP], env=env, capture_output=True, text=True, check=True)
    name, secs = r.stdout.split()
    return name, float(secs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'n':>2} {'order':>5} {'stack':>6} {'coefs':>6} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for n, order, m in CASES:
        ncoef, t = bench_kernel(n, order, m, args.repeat)
        nb = t.get("numba", float("nan"))
        print(f"{n:>2} {order:>5} {m:>6} {ncoef:>6} {t['numpy'] * 1e6:>10.1f} {nb * 1e6:>10.1f} "
              f"{t['numpy'] / nb:>8.2f}")
    print()
    for flag in (False, True):
        name, secs = sweep(flag)
        print(f"Weyl sweep (200 points), backend {name}: {secs:.3f} s")


if __name__ == "__main__":
    main()
