"""Classical readability formulas used as comparison baselines.

The three indices are the standard published coefficient sets, applied to
the deterministic counts from :mod:`linguafeed.textproc`. Raw real values
are returned — no rounding or clamping to grade bands — because the
evaluation module compares them to classifiers via pairwise ordering only.
"""

from __future__ import annotations

from dataclasses import dataclass

from .textproc import TextStats, text_stats

__all__ = ["ReadabilityReport", "InsufficientTextError", "ari", "fkgl", "gfi", "score_all"]


class InsufficientTextError(ValueError):
    """Raised when a text has no words or no sentences to score."""


@dataclass(frozen=True)
class ReadabilityReport:
    gfi: float
    ari: float
    fkgl: float
    stats: TextStats


def _check(stats: TextStats) -> None:
    if stats.n_words < 1 or stats.n_sentences < 1:
        raise InsufficientTextError("insufficient text")


def ari(stats: TextStats) -> float:
    """Automated Readability Index."""
    _check(stats)
    return 4.71 * (stats.n_chars / stats.n_words) + 0.5 * (stats.n_words / stats.n_sentences) - 21.43


def fkgl(stats: TextStats) -> float:
    """Flesch-Kincaid grade level."""
    _check(stats)
    return 0.39 * (stats.n_words / stats.n_sentences) + 11.8 * (stats.n_syllables / stats.n_words) - 15.59


def gfi(stats: TextStats) -> float:
    """Gunning fog index."""
    _check(stats)
    return 0.4 * ((stats.n_words / stats.n_sentences) + 100.0 * (stats.n_complex_words / stats.n_words))


def score_all(text: str) -> ReadabilityReport:
    """Compute text statistics once and all three indices from them."""
    stats = text_stats(text)
    _check(stats)
    return ReadabilityReport(gfi=gfi(stats), ari=ari(stats), fkgl=fkgl(stats), stats=stats)
