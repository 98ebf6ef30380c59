"""Hot numeric kernels: n-gram feature-hash accumulation and pairwise
inversion counting.

Each kernel ships in two interchangeable implementations: a numba ``@njit``
one and a vectorized pure-numpy one. The active backend is chosen once at
import time: set ``LINGUAFEED_PURE_NUMPY=1`` to force the numpy path; the
numpy path is also used automatically when numba is not importable. Both
paths are bit-identical — the hash state walks the same 64-bit FNV-1a
sequence and bucket accumulation is exact integer arithmetic in float64 —
which the test suite asserts and ``benchmarks/bench_kernels.py`` times.

Note on the numpy path: FNV mixing relies on silent modular wraparound,
which numpy only guarantees for *array* uint64 operations (scalar ops emit
overflow warnings), so the fallback works on whole window columns at a time.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "fnv_state",
    "ngram_hash_accumulate",
    "count_inversions",
    "implementations",
]

NGRAM_SIZES = (3, 4, 5)

_FNV_PRIME = 0x100000001B3
_FNV_BASIS = 0xCBF29CE484222325
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def fnv_state(seed: int) -> np.uint64:
    """Initial 64-bit FNV-1a state with ``seed`` folded in."""
    return np.uint64(((_FNV_BASIS ^ (seed & _U64_MASK)) * _FNV_PRIME) & _U64_MASK)


def _ngram_hash_accumulate_np(codes: np.ndarray, dim: int, state0: np.uint64) -> np.ndarray:
    """Signed bucket counts for character n-grams, vectorized over windows."""
    acc = np.zeros(dim, dtype=np.float64)
    n = codes.shape[0]
    c64 = codes.astype(np.uint64)
    prime = np.uint64(_FNV_PRIME)
    d64 = np.uint64(dim)
    shift = np.uint64(63)
    for size in NGRAM_SIZES:
        m = n - size + 1
        if m <= 0:
            continue
        h = np.full(m, state0, dtype=np.uint64)
        for k in range(size):
            h = (h ^ c64[k : k + m]) * prime
        buckets = (h % d64).astype(np.int64)
        signs = np.where((h >> shift) == 0, 1.0, -1.0)
        np.add.at(acc, buckets, signs)
    return acc


def _count_inversions_np(true_idx: np.ndarray, values: np.ndarray) -> tuple[int, int]:
    """Strict inversions and ties over cross-class pairs, chunked broadcast.

    A pair is oriented by true order (true_a < true_b); it is a strict
    inversion when value_a > value_b and a tie when the values are equal.
    Chunking bounds the pairwise boolean matrices to chunk x n.
    """
    n = true_idx.shape[0]
    strict = 0
    ties = 0
    chunk = 1024
    for s in range(0, n, chunk):
        t = true_idx[s : s + chunk, None]
        v = values[s : s + chunk, None]
        lower_true = t < true_idx[None, :]
        strict += int(np.count_nonzero(lower_true & (v > values[None, :])))
        ties += int(np.count_nonzero(lower_true & (v == values[None, :])))
    return strict, ties


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def ngram_hash_accumulate_nb(codes, dim, state0):  # pragma: no cover - compiled
        acc = np.zeros(dim, dtype=np.float64)
        n = codes.shape[0]
        prime = np.uint64(_FNV_PRIME)
        d64 = np.uint64(dim)
        shift = np.uint64(63)
        zero = np.uint64(0)
        for size in range(3, 6):
            m = n - size + 1
            for start in range(m):
                h = state0
                for k in range(start, start + size):
                    h = (h ^ np.uint64(codes[k])) * prime
                b = np.int64(h % d64)
                if (h >> shift) == zero:
                    acc[b] += 1.0
                else:
                    acc[b] -= 1.0
        return acc

    @njit(cache=True)
    def count_inversions_nb(true_idx, values):  # pragma: no cover - compiled
        n = true_idx.shape[0]
        strict = 0
        ties = 0
        for i in range(n):
            ti = true_idx[i]
            vi = values[i]
            for j in range(i + 1, n):
                tj = true_idx[j]
                if ti == tj:
                    continue
                if ti < tj:
                    lo, hi = vi, values[j]
                else:
                    lo, hi = values[j], vi
                if lo > hi:
                    strict += 1
                elif lo == hi:
                    ties += 1
        return strict, ties

    return ngram_hash_accumulate_nb, count_inversions_nb


def _select_backend():
    if os.environ.get("LINGUAFEED_PURE_NUMPY", "") not in ("", "0"):
        return "numpy", _ngram_hash_accumulate_np, _count_inversions_np
    try:
        hash_nb, inv_nb = _build_numba()
    except ImportError:
        return "numpy", _ngram_hash_accumulate_np, _count_inversions_np
    return "numba", hash_nb, inv_nb


BACKEND, _hash_impl, _inv_impl = _select_backend()


def ngram_hash_accumulate(codes: np.ndarray, dim: int, state0: np.uint64) -> np.ndarray:
    """Raw signed bucket counts for the n-grams of a codepoint array."""
    codes = np.ascontiguousarray(codes, dtype=np.uint32)
    return _hash_impl(codes, dim, np.uint64(state0))


def count_inversions(true_idx: np.ndarray, values: np.ndarray) -> tuple[int, int]:
    """(strict inversions, ties) over all cross-class item pairs."""
    true_idx = np.ascontiguousarray(true_idx, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if true_idx.shape[0] != values.shape[0]:
        raise ValueError("length mismatch")
    strict, ties = _inv_impl(true_idx, values)
    return int(strict), int(ties)


def implementations() -> dict[str, dict[str, object]]:
    """Both backends by name, for equivalence tests and the benchmark."""
    impls: dict[str, dict[str, object]] = {
        "numpy": {
            "ngram_hash_accumulate": _ngram_hash_accumulate_np,
            "count_inversions": _count_inversions_np,
        }
    }
    try:
        hash_nb, inv_nb = _build_numba()
    except ImportError:
        return impls
    impls["numba"] = {
        "ngram_hash_accumulate": hash_nb,
        "count_inversions": inv_nb,
    }
    return impls
