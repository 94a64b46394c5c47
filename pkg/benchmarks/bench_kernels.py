"""Compiled kernels vs the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np
from scipy.special import zeta

from diffaudit._core import _fallback

try:
    from diffaudit._core import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    scores = rng.integers(0, 101, 400).astype(float)
    pvals = np.where(rng.random(2000) < 0.2, rng.random(2000) * 1e-4, rng.random(2000))
    X = rng.normal(size=(1000, 16))
    C = X[rng.choice(1000, 8, replace=False)].copy()
    norm = float(zeta(1.6, 1))
    return {
        "midranks n=400": lambda m: m.midranks(scores),
        "rank_sum n=400": lambda m: m.rank_sum(scores, 200),
        "saffron n=2000": lambda m: m.saffron_levels(pvals, 0.05, 0.5, 0.025, 1.6, norm),
        "lloyd 1000x16 k=8": lambda m: m.lloyd(X, C, 300),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'kernel':<22}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(np.random.default_rng(0)).items():
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:<22}{t_py:>12.3f}{'-':>12}{'-':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<22}{t_py:>12.3f}{t_cy:>12.3f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
