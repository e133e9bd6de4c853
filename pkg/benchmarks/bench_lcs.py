"""Benchmark the compiled LCS kernel against the pure-Python fallback.

The LCS dynamic program is the one O(n*m) loop in schema comparison; this
script shows what the compiled extension buys on realistic schema sizes.

    python benchmarks/bench_lcs.py
"""

from __future__ import annotations

import random
import time

import numpy as np

from schemaloom._lcs_py import lcs_length_ids as pure_lcs

try:
    from schemaloom._lcs import lcs_length_ids as compiled_lcs
except ImportError:
    compiled_lcs = None


def make_pair(n: int, vocab: int = 120, seed: int = 7):
    rng = random.Random(seed)
    a = np.array([rng.randrange(vocab) for _ in range(n)], dtype=np.int32)
    b = np.array([rng.randrange(vocab) for _ in range(n)], dtype=np.int32)
    return a, b


def time_call(fn, a, b, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(a, b)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    sizes = [100, 500, 1000, 2000, 4000, 8000]
    print(f"{'tokens':>8} {'pure (s)':>12} {'compiled (s)':>14} {'speedup':>9}")
    for n in sizes:
        a, b = make_pair(n)
        t_pure = time_call(pure_lcs, a, b)
        if compiled_lcs is None:
            print(f"{n:>8} {t_pure:>12.4f} {'not built':>14} {'-':>9}")
            continue
        assert compiled_lcs(a, b) == pure_lcs(a, b)
        t_compiled = time_call(compiled_lcs, a, b)
        print(f"{n:>8} {t_pure:>12.4f} {t_compiled:>14.6f} {t_pure / t_compiled:>8.1f}x")
    if compiled_lcs is None:
        print("\ncompiled kernel missing; build it with: python setup.py build_ext --inplace")


if __name__ == "__main__":
    main()
