"""Shared test utilities: independent oracles and synthetic data builders.

The oracles here deliberately reimplement production logic by different
means (plain Python loops, direct formula transcription) so tests compare
two independently derived answers.
"""

from __future__ import annotations

import numpy as np

FNV_PRIME = 0x100000001B3
FNV_BASIS = 0xCBF29CE484222325
U64 = 1 << 64


def fnv1a_reference(codepoints, seed: int) -> int:
    """Pure-Python 64-bit FNV-1a with the seed folded into the start state."""
    state = ((FNV_BASIS ^ (seed % U64)) * FNV_PRIME) % U64
    for code in codepoints:
        state = ((state ^ int(code)) * FNV_PRIME) % U64
    return state


def hash_accumulate_reference(text: str, dim: int, seed: int) -> np.ndarray:
    """Signed n-gram bucket counts computed with plain Python loops."""
    codes = [ord(c) for c in text.lower()]
    acc = np.zeros(dim, dtype=np.float64)
    for size in (3, 4, 5):
        for start in range(len(codes) - size + 1):
            h = fnv1a_reference(codes[start : start + size], seed)
            bucket = h % dim
            acc[bucket] += 1.0 if (h >> 63) == 0 else -1.0
    return acc


def mismatches_bruteforce(true_idx, values, *, ties_as_half: bool = False):
    """O(n^2) plain-Python mismatch count over ordered item pairs."""
    strict = 0
    ties = 0
    n = len(true_idx)
    for i in range(n):
        for j in range(n):
            if true_idx[i] < true_idx[j]:
                if values[i] > values[j]:
                    strict += 1
                elif values[i] == values[j]:
                    ties += 1
    if ties_as_half:
        return float(strict) + 0.5 * ties
    return strict


def mismatches_enumerated(true_idx, values, *, ties_as_half: bool = False, chunk: int = 256):
    """Exhaustive item-pair enumeration via numpy broadcasting.

    Independent of both production routes (confusion-matrix combinatorics
    and the compiled pair loop); validated against
    :func:`mismatches_bruteforce` on small inputs.
    """
    t = np.asarray(true_idx, dtype=np.int64)
    v = np.asarray(values, dtype=np.float64)
    strict = 0
    ties = 0
    for s in range(0, t.shape[0], chunk):
        tt = t[s : s + chunk, None]
        vv = v[s : s + chunk, None]
        mask = tt < t[None, :]
        strict += int(np.count_nonzero(mask & (vv > v[None, :])))
        ties += int(np.count_nonzero(mask & (vv == v[None, :])))
    if ties_as_half:
        return float(strict) + 0.5 * ties
    return strict


def expand_confusion(cm, rng=None):
    """Item arrays (true_idx, pred_idx) realizing a confusion matrix."""
    cm = np.asarray(cm, dtype=np.int64)
    true_idx = []
    pred_idx = []
    k = cm.shape[0]
    for a in range(k):
        for p in range(k):
            true_idx.extend([a] * cm[a, p])
            pred_idx.extend([p] * cm[a, p])
    t = np.array(true_idx, dtype=np.int64)
    p = np.array(pred_idx, dtype=np.int64)
    if rng is not None:
        order = rng.permutation(t.shape[0])
        t, p = t[order], p[order]
    return t, p


def random_confusion(rng, k: int, max_items: int) -> np.ndarray:
    """Random K x K confusion matrix with at most ``max_items`` total."""
    n = int(rng.integers(0, max_items + 1))
    cm = np.zeros((k, k), dtype=np.int64)
    if n:
        cells = rng.integers(0, k * k, size=n)
        np.add.at(cm.ravel(), cells, 1)
    return cm


ORDINAL_SCALE_LABELS = ("A1", "A2", "B1", "B2", "C1", "C2")


def make_ordinal_embeddings(
    seed: int = 20240816,
    *,
    k: int = 6,
    per_class: int = 200,
    dim: int = 16,
    sigma: float = 1.0,
    margin: float = 3.0,
):
    """Separable ordinal synthetic embeddings.

    Class means sit on one axis, adjacent means ``2 * margin * sigma``
    apart, so every mean is ``margin`` standard deviations from its
    decision boundary and class order matches geometric order.
    Returns (x, y, train_indices, test_indices) with an 80/20 split.
    """
    rng = np.random.default_rng(seed)
    spacing = 2.0 * margin * sigma
    xs = []
    ys = []
    for c in range(k):
        mean = np.zeros(dim)
        mean[0] = spacing * c
        xs.append(mean + rng.normal(0.0, sigma, size=(per_class, dim)))
        ys.append(np.full(per_class, c, dtype=np.int64))
    x = np.vstack(xs)
    y = np.concatenate(ys)
    order = rng.permutation(y.shape[0])
    cut = int(0.8 * y.shape[0])
    return x, y, order[:cut], order[cut:]


CLASS_VOCAB = {
    "A1": ("chat", "chien", "maison", "pain", "eau", "porte", "lit", "main"),
    "A2": ("voyage", "cuisine", "marché", "jardin", "famille", "matin", "route", "ville"),
    "B1": ("travail", "projet", "réunion", "question", "réponse", "moment", "groupe", "raison"),
    "B2": ("société", "économie", "politique", "histoire", "culture", "théorie", "analyse", "systeme"),
    "C1": ("paradigme", "hypothèse", "méthodologie", "phénomène", "perspective", "controverse", "synthèse", "doctrine"),
    "C2": ("épistémologie", "herméneutique", "dialectique", "ontologie", "axiomatique", "téléologie", "heuristique", "sémiotique"),
}


def make_text_dataset(seed: int = 11, *, per_class: int = 20, words_per_text: int = 12):
    """Labeled texts with disjoint per-class vocabularies.

    Hash embeddings of different classes are nearly orthogonal, so a
    linear head separates them quickly; used for CLI round-trip tests.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for label, vocab in CLASS_VOCAB.items():
        for i in range(per_class):
            words = [vocab[int(j)] for j in rng.integers(0, len(vocab), words_per_text)]
            text = " ".join(words).capitalize() + "."
            rows.append({"text": text, "label": label, "source_id": f"synth-{label}-{i}"})
    order = rng.permutation(len(rows))
    return [rows[int(i)] for i in order]
