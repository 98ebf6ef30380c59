"""Evaluation metrics for ordered difficulty predictions.

The headline metric is the pairwise mismatch count: over every pair of test
items whose true labels differ, a mismatch is a strict order inversion (the
item with the lower true label is predicted strictly above the other). Ties
in predicted order are not mismatches by default; ``ties_as_half=True``
counts each tied cross-pair as half a mismatch for sensitivity checks.

Two independent routes compute the same number: directly from per-item
predictions (:func:`pairwise_mismatches`) and from a confusion matrix alone
(:func:`pairwise_mismatches_cm`), which works because items with the same
(true, predicted) cell are interchangeable. Scores from readability
formulas go through :func:`pairwise_mismatches_scores`, so formula-based
and classifier-based rankings are comparable on one scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import count_inversions
from .classifier import DifficultyScale

__all__ = [
    "EvalReport",
    "accuracy",
    "adjacency_mass",
    "baseline_accuracy",
    "confusion_matrix",
    "confusion_heatmap_svg",
    "evaluate",
    "pairwise_mismatches",
    "pairwise_mismatches_cm",
    "pairwise_mismatches_scores",
    "render_accuracy_table",
    "render_mismatch_table",
    "render_report",
    "load_report",
    "save_report",
]


def _as_index_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def confusion_matrix(true_idx, pred_idx, k: int) -> np.ndarray:
    """(k, k) count matrix, rows true label, columns predicted label."""
    t = _as_index_array(true_idx, "true_idx")
    p = _as_index_array(pred_idx, "pred_idx")
    if t.shape[0] != p.shape[0]:
        raise ValueError("length mismatch")
    if t.shape[0] and (t.min() < 0 or t.max() >= k or p.min() < 0 or p.max() >= k):
        raise ValueError("label index out of range")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def _finish(strict: int, ties: int, ties_as_half: bool) -> float | int:
    if ties_as_half:
        return float(strict) + 0.5 * ties
    return int(strict)


def pairwise_mismatches(true_idx, pred_idx, *, ties_as_half: bool = False) -> float | int:
    """Mismatches counted straight from per-item predicted label indices."""
    t = _as_index_array(true_idx, "true_idx")
    p = _as_index_array(pred_idx, "pred_idx")
    strict, ties = count_inversions(t, p.astype(np.float64))
    return _finish(strict, ties, ties_as_half)


def pairwise_mismatches_scores(true_idx, scores, *, ties_as_half: bool = False) -> float | int:
    """Mismatches for continuous scores (higher score = harder)."""
    t = _as_index_array(true_idx, "true_idx")
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("scores must be one-dimensional")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores contain non-finite values")
    strict, ties = count_inversions(t, s)
    return _finish(strict, ties, ties_as_half)


def pairwise_mismatches_cm(cm, *, ties_as_half: bool = False) -> float | int:
    """Mismatches computed from a confusion matrix alone.

    For true labels a < b, every predicted pair (p, q) with p > q
    contributes counts[a][p] * counts[b][q] mismatches; p == q pairs are the
    ties. Equivalent to the per-item route for any prediction set.
    """
    m = np.asarray(cm, dtype=np.int64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("confusion matrix must be square")
    if np.any(m < 0):
        raise ValueError("confusion matrix counts must be non-negative")
    k = m.shape[0]
    lower = np.tri(k, k, -1, dtype=np.int64)
    strict = 0
    ties = 0
    for a in range(k):
        for b in range(a + 1, k):
            strict += int(m[a] @ lower @ m[b])
            ties += int(m[a] @ m[b])
    return _finish(strict, ties, ties_as_half)


def accuracy(true_idx, pred_idx) -> float:
    t = _as_index_array(true_idx, "true_idx")
    p = _as_index_array(pred_idx, "pred_idx")
    if t.shape[0] != p.shape[0]:
        raise ValueError("length mismatch")
    if t.shape[0] == 0:
        raise ValueError("empty evaluation set")
    return float(np.mean(t == p))


def baseline_accuracy(true_idx) -> float:
    """Accuracy of always predicting the most frequent true label."""
    t = _as_index_array(true_idx, "true_idx")
    if t.shape[0] == 0:
        raise ValueError("empty evaluation set")
    _, counts = np.unique(t, return_counts=True)
    return float(counts.max()) / float(t.shape[0])


def adjacency_mass(cm) -> float:
    """Fraction of errors that land on a label adjacent to the true one.

    1.0 when there are no errors at all.
    """
    m = np.asarray(cm, dtype=np.int64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("confusion matrix must be square")
    k = m.shape[0]
    off = ~np.eye(k, dtype=bool)
    total_errors = int(m[off].sum())
    if total_errors == 0:
        return 1.0
    idx = np.arange(k)
    adjacent = np.abs(idx[:, None] - idx[None, :]) == 1
    return int(m[adjacent].sum()) / total_errors


@dataclass(frozen=True)
class EvalReport:
    """Evaluation summary; content is deterministic (no timestamps)."""

    n_items: int
    scale: tuple[str, ...]
    kind: str  # "labels" or "scores"
    accuracy: float | None
    baseline: float
    mismatches: int
    mismatches_ties_half: float
    adjacency_mass: float | None
    confusion: tuple[tuple[int, ...], ...] | None

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "scale": list(self.scale),
            "kind": self.kind,
            "accuracy": self.accuracy,
            "baseline": self.baseline,
            "mismatches": self.mismatches,
            "mismatches_ties_half": self.mismatches_ties_half,
            "adjacency_mass": self.adjacency_mass,
            "confusion": None if self.confusion is None else [list(r) for r in self.confusion],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalReport":
        confusion = payload.get("confusion")
        return cls(
            n_items=int(payload["n_items"]),
            scale=tuple(payload["scale"]),
            kind=payload["kind"],
            accuracy=payload.get("accuracy"),
            baseline=float(payload["baseline"]),
            mismatches=int(payload["mismatches"]),
            mismatches_ties_half=float(payload["mismatches_ties_half"]),
            adjacency_mass=payload.get("adjacency_mass"),
            confusion=None if confusion is None else tuple(tuple(int(c) for c in row) for row in confusion),
        )


def evaluate(true_labels, predictions, scale: DifficultyScale) -> EvalReport:
    """Build an :class:`EvalReport` for label or score predictions.

    ``predictions`` holding strings is treated as predicted labels (full
    report); holding numbers, as difficulty scores (mismatch counts only).
    """
    if len(true_labels) == 0:
        raise ValueError("empty evaluation set")
    if len(true_labels) != len(predictions):
        raise ValueError("length mismatch")
    true_idx = np.array([scale.index(lbl) for lbl in true_labels], dtype=np.int64)
    baseline = baseline_accuracy(true_idx)

    if isinstance(predictions[0], str):
        pred_idx = np.array([scale.index(lbl) for lbl in predictions], dtype=np.int64)
        cm = confusion_matrix(true_idx, pred_idx, len(scale))
        return EvalReport(
            n_items=len(true_labels),
            scale=scale.labels,
            kind="labels",
            accuracy=accuracy(true_idx, pred_idx),
            baseline=baseline,
            mismatches=int(pairwise_mismatches_cm(cm)),
            mismatches_ties_half=float(pairwise_mismatches_cm(cm, ties_as_half=True)),
            adjacency_mass=adjacency_mass(cm),
            confusion=tuple(tuple(int(c) for c in row) for row in cm),
        )

    scores = np.asarray(predictions, dtype=np.float64)
    return EvalReport(
        n_items=len(true_labels),
        scale=scale.labels,
        kind="scores",
        accuracy=None,
        baseline=baseline,
        mismatches=int(pairwise_mismatches_scores(true_idx, scores)),
        mismatches_ties_half=float(pairwise_mismatches_scores(true_idx, scores, ties_as_half=True)),
        adjacency_mass=None,
        confusion=None,
    )


def save_report(report: EvalReport, path: str | Path) -> None:
    text = json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_report(path: str | Path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _format_count(value: float | int) -> str:
    if isinstance(value, float) and not value.is_integer():
        return f"{value:,.1f}"
    return f"{int(value):,}"


def _render_table(title: str, header: str, rows: list[tuple[str, str, bool]]) -> str:
    name_width = max(len("method"), max((len(name) for name, _, _ in rows), default=0))
    # One extra column for the best-value marker.
    value_width = max(len(header), max((len(val) for _, val, _ in rows), default=0)) + 2
    lines = [title, f"{'method':<{name_width}}  {header:>{value_width}}"]
    lines.append("-" * name_width + "  " + "-" * value_width)
    for name, value, best in rows:
        cell = value + (" *" if best else "  ")
        lines.append(f"{name:<{name_width}}  {cell:>{value_width}}")
    return "\n".join(lines) + "\n"


def render_mismatch_table(entries: dict[str, float | int], *, title: str = "Pairwise mismatches") -> str:
    """Fixed-width table of mismatch counts; the lowest count is starred."""
    if not entries:
        raise ValueError("no table entries")
    best = min(entries.values())
    rows = [(name, _format_count(value), value == best) for name, value in entries.items()]
    return _render_table(title, "mismatches", rows)


def render_accuracy_table(entries: dict[str, float], *, title: str = "Accuracy") -> str:
    """Fixed-width table of accuracies; the highest value is starred."""
    if not entries:
        raise ValueError("no table entries")
    best = max(entries.values())
    rows = [(name, f"{value:.2f}", value == best) for name, value in entries.items()]
    return _render_table(title, "accuracy", rows)


def render_report(
    report: EvalReport,
    *,
    method_name: str = "classifier",
    extra_mismatches: dict[str, float | int] | None = None,
) -> str:
    """Human-readable report text: mismatch and accuracy tables.

    ``extra_mismatches`` merges competing methods (readability formulas)
    into the mismatch table for a side-by-side view.
    """
    mismatch_entries: dict[str, float | int] = {}
    if extra_mismatches:
        mismatch_entries.update(extra_mismatches)
    mismatch_entries[method_name] = report.mismatches
    parts = [render_mismatch_table(mismatch_entries)]
    if report.accuracy is not None:
        parts.append(
            render_accuracy_table({"baseline": report.baseline, method_name: report.accuracy})
        )
    if report.adjacency_mass is not None:
        parts.append(f"adjacent-error mass: {report.adjacency_mass:.3f}\n")
    return "\n".join(parts)


def _heat_color(fraction: float) -> str:
    # White at zero to deep blue at the per-matrix maximum.
    top = (8, 48, 107)
    r = round(255 + (top[0] - 255) * fraction)
    g = round(255 + (top[1] - 255) * fraction)
    b = round(255 + (top[2] - 255) * fraction)
    return f"rgb({r},{g},{b})"


def confusion_heatmap_svg(cm, labels, *, title: str = "Confusion matrix") -> str:
    """Standalone SVG heatmap of a confusion matrix.

    Output depends only on the inputs, so repeated renders are identical.
    """
    m = np.asarray(cm, dtype=np.int64)
    k = m.shape[0]
    if m.ndim != 2 or m.shape[1] != k or len(labels) != k:
        raise ValueError("matrix and labels must agree on size")
    cell = 52
    left = 70
    top = 58
    width = left + k * cell + 20
    height = top + k * cell + 46
    peak = int(m.max()) if m.size else 0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + k * cell / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{left + k * cell / 2:.0f}" y="{height - 8}" text-anchor="middle">predicted</text>',
        f'<text x="16" y="{top + k * cell / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + k * cell / 2:.0f})">true</text>',
    ]
    for j, label in enumerate(labels):
        x = left + j * cell + cell / 2
        parts.append(f'<text x="{x:.0f}" y="{top - 8}" text-anchor="middle">{label}</text>')
    for i, label in enumerate(labels):
        y = top + i * cell + cell / 2 + 4
        parts.append(f'<text x="{left - 8}" y="{y:.0f}" text-anchor="end">{label}</text>')
    for i in range(k):
        for j in range(k):
            count = int(m[i, j])
            fraction = 0.0 if peak == 0 else count / peak
            x = left + j * cell
            y = top + i * cell
            fill = _heat_color(fraction)
            text_fill = "white" if fraction > 0.55 else "black"
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{fill}" stroke="#ccc"/>'
            )
            parts.append(
                f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" '
                f'text-anchor="middle" fill="{text_fill}">{count}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
