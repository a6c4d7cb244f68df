"""Compare the compiled and numpy path-exponent kernels.

    python benchmarks/bench_kernels.py [--n 65536] [--D 10] [--repeat 5]
"""

import argparse
import math
import timeit

import numpy as np

from pathpdf import _fallback
from pathpdf.model import ModelParams

try:
    from pathpdf import _kernel
except ImportError:  # extension not built
    _kernel = None


def _inputs(n, D, seed=0):
    rng = np.random.default_rng(seed)
    yunit = np.ascontiguousarray(rng.standard_normal((n, D - 1)))
    base = rng.standard_normal(n)
    return yunit, base


def run(n, D, repeat):
    rows = []
    for gamma, p in ((1.0, 2.0), (0.5, 1.5), (0.2, 1.3)):
        params = ModelParams(gamma, p, 0.1, D=D)
        args = (0.1, 0.05, params.dt, params.r, params.p, params.gamma, params.beta, params.dt ** params.exponent)
        yunit, base = _inputs(n, D)
        inner = np.ascontiguousarray(yunit * 0.05)
        for name, mod in (("python", _fallback), ("compiled", _kernel)):
            if mod is None:
                continue
            t_path = min(timeit.repeat(lambda: mod.path_exponents(inner, 0.0, *args[1:]), number=1, repeat=repeat))
            t_bridge = min(timeit.repeat(lambda: mod.bridge_log_weights(yunit, base, *args), number=1, repeat=repeat))
            rows.append((gamma, p, name, t_path, t_bridge))
        if _kernel is not None:
            a = _fallback.bridge_log_weights(yunit, base, *args)
            b = _kernel.bridge_log_weights(yunit, base, *args)
            rel = np.max(np.abs(a - b) / np.maximum(np.abs(a), 1.0))
            rows.append((gamma, p, "max rel diff", rel, math.nan))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2 ** 16)
    ap.add_argument("--D", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()
    print(f"n={a.n} D={a.D} (best of {a.repeat})")
    print(f"{'gamma':>5} {'p':>4} {'backend':>13} {'path [ms]':>10} {'bridge [ms]':>12}")
    for gamma, p, name, t1, t2 in run(a.n, a.D, a.repeat):
        if name == "max rel diff":
            print(f"{gamma:5.2f} {p:4.2f} {name:>13} {t1:10.2e}")
        else:
            print(f"{gamma:5.2f} {p:4.2f} {name:>13} {1e3 * t1:10.2f} {1e3 * t2:12.2f}")


if __name__ == "__main__":
    main()
