"""Timing harness for the two hot kernels, numpy path vs compiled path.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 9 --seed 3

Both implementations are checked for bit-identical output on every
workload before timing, so a reported speedup is never bought with a
numeric drift. Timings are best-of-``repeats`` wall clock.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from linguafeed._kernels import fnv_state, implementations

HASH_DIM = 4096
HASH_SEED = 7
TEXT_LENGTHS = (200, 2_000, 20_000)
PAIR_SIZES = (500, 2_000, 8_000)


def random_codepoints(rng: np.random.Generator, length: int) -> np.ndarray:
    # Lowercase latin plus a sprinkle of accented letters, like real
    # lowercased article text.
    base = rng.integers(ord("a"), ord("z") + 1, size=length, dtype=np.uint32)
    accents = np.array([ord(c) for c in "àâçéèêëîïôùûü"], dtype=np.uint32)
    mask = rng.random(length) < 0.08
    base[mask] = accents[rng.integers(0, accents.size, size=int(mask.sum()))]
    return base


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_hash(impls, rng, repeats):
    state0 = fnv_state(HASH_SEED)
    rows = []
    for length in TEXT_LENGTHS:
        codes = random_codepoints(rng, length)
        outputs = {
            name: fns["ngram_hash_accumulate"](codes, HASH_DIM, state0)
            for name, fns in impls.items()
        }
        reference = outputs["numpy"]
        for name, out in outputs.items():
            if not np.array_equal(out, reference):
                raise SystemExit(f"hash outputs diverge on backend {name!r}")
        timings = {
            name: best_of(
                lambda fns=fns: fns["ngram_hash_accumulate"](codes, HASH_DIM, state0),
                repeats,
            )
            for name, fns in impls.items()
        }
        rows.append((f"ngram_hash_accumulate  n={length:>6}", timings))
    return rows


def bench_inversions(impls, rng, repeats):
    rows = []
    for size in PAIR_SIZES:
        true_idx = rng.integers(0, 6, size=size).astype(np.int64)
        values = rng.random(size)
        outputs = {
            name: fns["count_inversions"](true_idx, values)
            for name, fns in impls.items()
        }
        reference = outputs["numpy"]
        for name, out in outputs.items():
            if tuple(int(v) for v in out) != tuple(int(v) for v in reference):
                raise SystemExit(f"inversion counts diverge on backend {name!r}")
        timings = {
            name: best_of(
                lambda fns=fns: fns["count_inversions"](true_idx, values), repeats
            )
            for name, fns in impls.items()
        }
        rows.append((f"count_inversions       n={size:>6}", timings))
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats, best kept")
    parser.add_argument("--seed", type=int, default=1, help="workload RNG seed")
    args = parser.parse_args()

    impls = implementations()
    rng = np.random.default_rng(args.seed)
    if "numba" not in impls:
        print("compiled backend unavailable; timing the numpy path only")
    else:
        # First calls pay JIT compilation; warm both kernels before timing.
        warm = random_codepoints(rng, 64)
        impls["numba"]["ngram_hash_accumulate"](warm, HASH_DIM, fnv_state(HASH_SEED))
        impls["numba"]["count_inversions"](
            np.zeros(4, dtype=np.int64), np.zeros(4, dtype=np.float64)
        )

    rows = bench_hash(impls, rng, args.repeats) + bench_inversions(impls, rng, args.repeats)

    names = list(impls)
    header = f"{'kernel / workload':<32}" + "".join(f"{name:>12}" for name in names)
    if len(names) > 1:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, timings in rows:
        line = f"{label:<32}" + "".join(f"{timings[name] * 1e3:>10.3f}ms" for name in names)
        if len(names) > 1:
            line += f"{timings['numpy'] / timings['numba']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
