"""Deterministic sentence segmentation, tokenization and syllable counting.

Everything here is a pure function of its input: no models, no language
detection, no randomness. These statistics feed the classical readability
formulas and the ingestion quality filter, so the conventions are frozen:

* word tokens are maximal letter runs; internal hyphens stay inside the
  token ("peut-être"), elision splits at the apostrophe with the apostrophe
  kept on the prefix ("l'école" -> "l'", "école");
* syllables are maximal vowel-group runs with a minimum of one, no silent-e
  adjustment;
* character counts include letters of word tokens only (no digits,
  punctuation or whitespace).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = [
    "Sentence",
    "Token",
    "TextStats",
    "segment_sentences",
    "tokenize",
    "count_syllables",
    "text_stats",
]

# Vowel inventory for the syllable heuristic (French + base Latin).
VOWELS = frozenset("aeiouyéèêëàâîïôûùüœ")

# A period directly after one of these words never ends a sentence.
ABBREVIATIONS = frozenset(
    {
        "M", "MM", "Mme", "Mmes", "Mlle", "Me", "Dr", "Pr", "Prof",
        "St", "Ste", "etc", "ex", "cf", "p", "pp", "vol", "chap",
        "art", "fig", "no", "env",
    }
)

_TERMINALS = ".!?…"
_CLOSERS = "»”\")]'’"
_OPENERS = "«“\"(['‘¿¡—–"

# Letters (no digits/underscore), internal hyphens allowed, optional
# trailing apostrophe so elided articles keep their apostrophe.
_WORD_RE = re.compile(r"[^\W\d_]+(?:-[^\W\d_]+)*['’]?")


@dataclass(frozen=True)
class Sentence:
    """A sentence with its (start, end) character span in the source text."""

    text: str
    span: tuple[int, int]


@dataclass(frozen=True)
class Token:
    surface: str
    is_word: bool


@dataclass(frozen=True)
class TextStats:
    """Aggregate counts used by the readability formulas."""

    n_sentences: int = 0
    n_words: int = 0
    n_chars: int = 0
    n_syllables: int = 0
    n_complex_words: int = 0


def _preceding_word(text: str, pos: int) -> str:
    """Letters immediately before ``pos`` (used for the abbreviation check)."""
    start = pos
    while start > 0 and text[start - 1].isalpha():
        start -= 1
    return text[start:pos]


def _is_boundary(text: str, punct_start: int, after: int) -> bool:
    """Whether the terminal run ending at ``after`` closes a sentence.

    ``punct_start`` indexes the first terminal character of the run. A
    boundary needs whitespace after the run and an uppercase or opening
    character starting the next sentence; a lone period after a listed
    abbreviation never splits.
    """
    n = len(text)
    run = text[punct_start:after].rstrip(_CLOSERS)
    if run == "." and _preceding_word(text, punct_start) in ABBREVIATIONS:
        return False
    if after >= n:
        return True
    if not text[after].isspace():
        return False
    k = after
    while k < n and text[k].isspace():
        k += 1
    if k >= n:
        return True
    nxt = text[k]
    return nxt.isupper() or nxt in _OPENERS


def segment_sentences(text: str) -> list[Sentence]:
    """Split ``text`` into sentences with exact source spans.

    Every non-whitespace character belongs to exactly one sentence;
    re-joining the spans with the original inter-span gaps reconstructs the
    input. Empty or all-whitespace input yields an empty list.
    """
    sentences: list[Sentence] = []
    n = len(text)
    start: int | None = None
    i = 0
    while i < n:
        ch = text[i]
        if start is None:
            if ch.isspace():
                i += 1
                continue
            start = i
        if ch in _TERMINALS:
            j = i + 1
            while j < n and text[j] in _TERMINALS:
                j += 1
            while j < n and text[j] in _CLOSERS:
                j += 1
            if _is_boundary(text, i, j):
                sentences.append(Sentence(text[start:j], (start, j)))
                start = None
                i = j
                continue
            i = j
            continue
        i += 1
    if start is not None:
        end = n
        while end > start and text[end - 1].isspace():
            end -= 1
        sentences.append(Sentence(text[start:end], (start, end)))
    return sentences


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into word and punctuation/number tokens.

    Word tokens are maximal letter runs (hyphen-joined compounds stay
    whole, elision splits at the apostrophe); every other non-whitespace
    run is emitted as a single non-word token.
    """
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        m = _WORD_RE.match(text, i)
        if m:
            tokens.append(Token(m.group(), True))
            i = m.end()
            continue
        j = i
        while j < n and not text[j].isspace() and not _WORD_RE.match(text, j):
            j += 1
        tokens.append(Token(text[i:j], False))
        i = j
    return tokens


def count_syllables(word: str) -> int:
    """Count syllables as maximal vowel-group runs, never less than one.

    Raises ValueError("not a word") when ``word`` contains no letter.
    """
    if not any(c.isalpha() for c in word):
        raise ValueError("not a word")
    runs = 0
    in_run = False
    for c in word.lower():
        if c in VOWELS:
            if not in_run:
                runs += 1
                in_run = True
        else:
            in_run = False
    return max(1, runs)


def text_stats(text: str) -> TextStats:
    """Aggregate sentence, word, letter, syllable and complex-word counts."""
    if not text or text.isspace():
        return TextStats()
    sentences = segment_sentences(text)
    words = [t for t in tokenize(text) if t.is_word]
    n_chars = 0
    n_syllables = 0
    n_complex = 0
    for w in words:
        n_chars += sum(1 for c in w.surface if c.isalpha())
        syl = count_syllables(w.surface)
        n_syllables += syl
        if syl >= 3:
            n_complex += 1
    return TextStats(
        n_sentences=len(sentences),
        n_words=len(words),
        n_chars=n_chars,
        n_syllables=n_syllables,
        n_complex_words=n_complex,
    )
