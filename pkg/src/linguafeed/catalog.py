"""Content catalog: annotated items plus an embedded search index.

The store keeps every item in memory, journals changes to an append-only
``documents.jsonl`` (upsert and delete records), and rebuilds its inverted
index from that journal on open, so the journal is the single source of
truth. ``index.json`` is a flushed snapshot of the index for inspection and
``manifest.json`` pins the store format and difficulty scale.

Search scores sum term frequencies weighted by field: title 3, description
2, body 1. Query terms and indexed tokens are diacritics-folded so "école"
matches "ecole".
"""

from __future__ import annotations

import json
import logging
import os
import threading
import unicodedata
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .classifier import DifficultyScale
from .readability import ReadabilityReport
from .textproc import TextStats, tokenize
from .topics import TopicAssignment

logger = logging.getLogger(__name__)

STORE_FORMAT_VERSION = 1

KIND_ARTICLE = "article"
KIND_VIDEO = "video"

FIELD_WEIGHTS = {"title": 3.0, "description": 2.0, "body": 1.0}

PROB_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Cue:
    """One timed caption line; times in seconds from the start."""

    start: float
    end: float
    text: str

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise ValueError("cue needs 0 <= start < end")
        if not self.text.strip():
            raise ValueError("cue text must be non-blank")


@dataclass(frozen=True)
class DifficultyAnnotation:
    """Predicted difficulty label with its full probability vector."""

    label: str
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be non-negative")


@dataclass(frozen=True)
class ContentItem:
    id: str
    kind: str
    url: str
    title: str
    language: str
    source_id: str = ""
    description: str = ""
    body: str = ""
    published_at: datetime | None = None
    topics: tuple[TopicAssignment, ...] = ()
    difficulty: DifficultyAnnotation | None = None
    readability: ReadabilityReport | None = None
    cues: tuple[Cue, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("id must be non-empty")
        if self.kind not in (KIND_ARTICLE, KIND_VIDEO):
            raise ValueError(f"unknown kind {self.kind!r}")
        if not self.url:
            raise ValueError("url must be non-empty")
        if not self.title.strip():
            raise ValueError("title must be non-blank")
        if not self.language:
            raise ValueError("language must be non-empty")
        if self.published_at is not None and self.published_at.tzinfo is None:
            raise ValueError("published_at must be timezone-aware")
        object.__setattr__(self, "topics", tuple(self.topics))
        object.__setattr__(self, "cues", tuple(self.cues))

    def accepted_topics(self) -> tuple[str, ...]:
        return tuple(a.topic for a in self.topics if a.accepted)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "url": self.url,
            "title": self.title,
            "language": self.language,
            "source_id": self.source_id,
            "description": self.description,
            "body": self.body,
            "published_at": self.published_at.isoformat() if self.published_at else None,
            "topics": [
                {
                    "topic": a.topic,
                    "confidence": a.confidence,
                    "origin": a.origin,
                    "accepted": a.accepted,
                }
                for a in self.topics
            ],
            "difficulty": None
            if self.difficulty is None
            else {"label": self.difficulty.label, "probs": list(self.difficulty.probs)},
            "readability": None
            if self.readability is None
            else {
                "gfi": self.readability.gfi,
                "ari": self.readability.ari,
                "fkgl": self.readability.fkgl,
                "stats": {
                    "n_sentences": self.readability.stats.n_sentences,
                    "n_words": self.readability.stats.n_words,
                    "n_chars": self.readability.stats.n_chars,
                    "n_syllables": self.readability.stats.n_syllables,
                    "n_complex_words": self.readability.stats.n_complex_words,
                },
            },
            "cues": [{"start": c.start, "end": c.end, "text": c.text} for c in self.cues],
        }

    @classmethod
    def from_dict(cls, row: dict) -> "ContentItem":
        published = row.get("published_at")
        readability = row.get("readability")
        difficulty = row.get("difficulty")
        return cls(
            id=row["id"],
            kind=row["kind"],
            url=row["url"],
            title=row["title"],
            language=row["language"],
            source_id=row.get("source_id", ""),
            description=row.get("description", ""),
            body=row.get("body", ""),
            published_at=datetime.fromisoformat(published) if published else None,
            topics=tuple(
                TopicAssignment(
                    topic=t["topic"],
                    confidence=t["confidence"],
                    origin=t["origin"],
                    accepted=t["accepted"],
                )
                for t in row.get("topics", [])
            ),
            difficulty=None
            if difficulty is None
            else DifficultyAnnotation(label=difficulty["label"], probs=tuple(difficulty["probs"])),
            readability=None
            if readability is None
            else ReadabilityReport(
                gfi=readability["gfi"],
                ari=readability["ari"],
                fkgl=readability["fkgl"],
                stats=TextStats(**readability["stats"]),
            ),
            cues=tuple(Cue(**c) for c in row.get("cues", [])),
        )


def fold_token(token: str) -> str:
    """Lowercase and strip diacritics and apostrophes for index terms."""
    decomposed = unicodedata.normalize("NFD", token.lower())
    return "".join(ch for ch in decomposed if ch.isalpha())


def index_terms(text: str) -> list[str]:
    terms = []
    for tok in tokenize(text):
        if not tok.is_word:
            continue
        folded = fold_token(tok.surface)
        if folded:
            terms.append(folded)
    return terms


@dataclass(frozen=True)
class Query:
    """Catalog search request; empty fields mean "no constraint"."""

    text: str = ""
    topics: tuple[str, ...] = ()
    levels: tuple[str, ...] = ()
    kinds: tuple[str, ...] = ()
    limit: int = 20
    offset: int = 0

    def __post_init__(self):
        if self.limit < 1:
            raise ValueError("limit must be positive")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")


@dataclass(frozen=True)
class SearchHit:
    item: ContentItem
    score: float


class CatalogStore:
    """Disk-backed catalog with upsert/delete, lookup, and ranked search.

    All public methods are safe to call from multiple threads. An item id
    is the dedup key: upserting an existing id replaces the stored item.
    """

    MANIFEST_FILE = "manifest.json"
    JOURNAL_FILE = "documents.jsonl"
    INDEX_FILE = "index.json"

    def __init__(self, data_dir: str | Path, scale: DifficultyScale):
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._scale = scale
        self._lock = threading.RLock()
        self._docs: dict[str, ContentItem] = {}
        # term -> field -> doc id -> term frequency
        self._postings: dict[str, dict[str, dict[str, int]]] = {}
        self._doc_terms: dict[str, dict[str, dict[str, int]]] = {}
        self._load_manifest()
        self._replay_journal()
        self._journal = open(self._dir / self.JOURNAL_FILE, "a", encoding="utf-8")

    @property
    def scale(self) -> DifficultyScale:
        return self._scale

    def __len__(self) -> int:
        with self._lock:
            return len(self._docs)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _load_manifest(self) -> None:
        path = self._dir / self.MANIFEST_FILE
        if path.exists():
            manifest = json.loads(path.read_text(encoding="utf-8"))
            if manifest.get("format_version") != STORE_FORMAT_VERSION:
                raise ValueError("unsupported store format version")
            if tuple(manifest.get("scale", ())) != self._scale.labels:
                raise ValueError("store was created with a different difficulty scale")
        else:
            payload = {
                "format_version": STORE_FORMAT_VERSION,
                "scale": list(self._scale.labels),
            }
            path.write_text(
                json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n",
                encoding="utf-8",
            )

    def _replay_journal(self) -> None:
        path = self._dir / self.JOURNAL_FILE
        if not path.exists():
            return
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: corrupt journal line") from exc
                op = record.get("op")
                if op == "upsert":
                    item = ContentItem.from_dict(record["doc"])
                    self._apply_upsert(item)
                elif op == "delete":
                    self._apply_delete(record["id"])
                else:
                    raise ValueError(f"{path}:{lineno}: unknown journal op {op!r}")

    def _apply_upsert(self, item: ContentItem) -> None:
        if item.id in self._docs:
            self._unindex(item.id)
        self._docs[item.id] = item
        fields = {
            "title": item.title,
            "description": item.description,
            "body": item.body if item.body else " ".join(c.text for c in item.cues),
        }
        terms_by_field: dict[str, dict[str, int]] = {}
        for name, text in fields.items():
            counts: dict[str, int] = {}
            for term in index_terms(text):
                counts[term] = counts.get(term, 0) + 1
            terms_by_field[name] = counts
            for term, tf in counts.items():
                self._postings.setdefault(term, {}).setdefault(name, {})[item.id] = tf
        self._doc_terms[item.id] = terms_by_field

    def _unindex(self, item_id: str) -> None:
        terms_by_field = self._doc_terms.pop(item_id, {})
        for name, counts in terms_by_field.items():
            for term in counts:
                field_map = self._postings.get(term)
                if not field_map:
                    continue
                doc_map = field_map.get(name)
                if doc_map:
                    doc_map.pop(item_id, None)
                    if not doc_map:
                        field_map.pop(name)
                if not field_map:
                    self._postings.pop(term, None)

    def _apply_delete(self, item_id: str) -> bool:
        if item_id not in self._docs:
            return False
        self._unindex(item_id)
        self._docs.pop(item_id)
        return True

    def _validate(self, item: ContentItem) -> None:
        if item.difficulty is not None:
            if item.difficulty.label not in self._scale.labels:
                raise ValueError(f"difficulty label {item.difficulty.label!r} not in scale")
            probs = item.difficulty.probs
            if len(probs) != len(self._scale):
                raise ValueError("probability vector length must match scale size")
            total = sum(probs)
            if abs(total - 1.0) > PROB_SUM_TOLERANCE:
                raise ValueError(f"probabilities sum to {total!r}, expected 1")

    def upsert(self, item: ContentItem) -> None:
        self._validate(item)
        with self._lock:
            self._apply_upsert(item)
            self._journal.write(
                json.dumps({"op": "upsert", "doc": item.to_dict()}, sort_keys=True) + "\n"
            )
            self._journal.flush()

    def delete(self, item_id: str) -> bool:
        with self._lock:
            removed = self._apply_delete(item_id)
            if removed:
                self._journal.write(json.dumps({"op": "delete", "id": item_id}) + "\n")
                self._journal.flush()
            return removed

    def get(self, item_id: str) -> ContentItem | None:
        with self._lock:
            return self._docs.get(item_id)

    def __contains__(self, item_id: str) -> bool:
        return self.get(item_id) is not None

    @staticmethod
    def _recency_key(item: ContentItem):
        stamp = item.published_at.timestamp() if item.published_at else float("-inf")
        return (-stamp, item.id)

    def all_items(self) -> list[ContentItem]:
        """Every item, newest first (undated items last), id as tiebreak."""
        with self._lock:
            return sorted(self._docs.values(), key=self._recency_key)

    def search(self, query: Query) -> list[SearchHit]:
        """Ranked, filtered search.

        With query text, candidates must match at least one term and are
        ranked by the weighted term-frequency score; without text, all
        items pass and ranking is by recency. Filters are conjunctive.
        """
        terms = sorted(set(index_terms(query.text))) if query.text.strip() else []
        topics = {t for t in (query.topics or ()) if t}
        levels = set(query.levels or ())
        kinds = set(query.kinds or ())
        with self._lock:
            if terms:
                candidate_ids: set[str] = set()
                for term in terms:
                    for doc_map in self._postings.get(term, {}).values():
                        candidate_ids.update(doc_map)
            else:
                candidate_ids = set(self._docs)

            hits = []
            for item_id in candidate_ids:
                item = self._docs[item_id]
                if kinds and item.kind not in kinds:
                    continue
                if levels and (item.difficulty is None or item.difficulty.label not in levels):
                    continue
                if topics and not topics.intersection(item.accepted_topics()):
                    continue
                score = 0.0
                if terms:
                    counts = self._doc_terms[item_id]
                    for term in terms:
                        for name, weight in FIELD_WEIGHTS.items():
                            score += weight * counts[name].get(term, 0)
                    if score <= 0.0:
                        continue
                hits.append(SearchHit(item=item, score=score))
            hits.sort(key=lambda h: (-h.score, self._recency_key(h.item)))
        return hits[query.offset : query.offset + query.limit]

    def flush_index(self) -> None:
        """Write the index snapshot and fsync-replace it atomically."""
        with self._lock:
            snapshot = {
                "format_version": STORE_FORMAT_VERSION,
                "terms": self._postings,
            }
            payload = json.dumps(snapshot, sort_keys=True, separators=(",", ":"))
        tmp = self._dir / (self.INDEX_FILE + ".tmp")
        tmp.write_text(payload + "\n", encoding="utf-8")
        os.replace(tmp, self._dir / self.INDEX_FILE)

    def compact(self) -> None:
        """Rewrite the journal with only live items (drops dead records)."""
        with self._lock:
            tmp = self._dir / (self.JOURNAL_FILE + ".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                for item_id in sorted(self._docs):
                    fh.write(
                        json.dumps(
                            {"op": "upsert", "doc": self._docs[item_id].to_dict()},
                            sort_keys=True,
                        )
                        + "\n"
                    )
            self._journal.close()
            os.replace(tmp, self._dir / self.JOURNAL_FILE)
            self._journal = open(self._dir / self.JOURNAL_FILE, "a", encoding="utf-8")

    def close(self) -> None:
        with self._lock:
            if self._journal.closed:
                return
            self.flush_index()
            self._journal.close()


def utc_now() -> datetime:
    return datetime.now(timezone.utc)
