"""Topic detection with a remote zero-shot classifier and a keyword
fallback.

Topic names are normalized (trimmed, lowercased, inner whitespace
collapsed) everywhere, so "  Cooking " and "cooking" are one topic.
Assignments never leave the candidate set. When the remote classifier is
unreachable the keyword lexicon takes over and the degradation is logged;
callers can tell the two apart by the assignment ``origin``.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .textproc import tokenize

logger = logging.getLogger(__name__)

ORIGIN_PRETAGGED = "pretagged"
ORIGIN_CLASSIFIER = "classifier"
ORIGIN_KEYWORD = "keyword"

_ORIGIN_RANK = {ORIGIN_PRETAGGED: 0, ORIGIN_CLASSIFIER: 1, ORIGIN_KEYWORD: 2}


class TopicClientError(RuntimeError):
    """Zero-shot endpoint failed or answered out of contract."""


def normalize_topic(name: str) -> str:
    return " ".join(name.strip().lower().split())


@dataclass(frozen=True)
class TopicAssignment:
    """One topic with a confidence in [0, 1] and where it came from."""

    topic: str
    confidence: float
    origin: str
    accepted: bool

    def __post_init__(self):
        if self.origin not in _ORIGIN_RANK:
            raise ValueError(f"unknown origin {self.origin!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")
        normalized = normalize_topic(self.topic)
        if not normalized:
            raise ValueError("topic must be non-blank")
        object.__setattr__(self, "topic", normalized)


class ZeroShotClient:
    """Small HTTP client for a zero-shot topic classification endpoint.

    Request: POST {"text", "candidate_labels"}; response: {"labels",
    "scores"} in matching order. Anything else raises
    :class:`TopicClientError` after the configured retries.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        timeout: float = 10.0,
        retry_limit: int = 2,
        transport=None,
        api_key_env: str = "LINGUAFEED_TOPIC_API_KEY",
        max_in_flight: int = 4,
    ):
        if not endpoint:
            raise ValueError("endpoint must be non-empty")
        self._endpoint = endpoint
        self._timeout = timeout
        self._retry_limit = retry_limit
        self._transport = transport
        self._api_key_env = api_key_env
        self._semaphore = threading.Semaphore(max_in_flight)
        self._http = None
        self._http_lock = threading.Lock()

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def _client(self):
        import httpx

        with self._http_lock:
            if self._http is None:
                self._http = httpx.Client(transport=self._transport, timeout=self._timeout)
        return self._http

    def classify(self, text: str, candidate_labels: list[str]) -> dict[str, float]:
        import httpx

        headers = {}
        api_key = os.environ.get(self._api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {"text": text, "candidate_labels": list(candidate_labels)}
        last_error = "request failed"
        for attempt in range(self._retry_limit + 1):
            if attempt:
                logger.warning(
                    "topic request retry %d/%d: %s", attempt, self._retry_limit, last_error
                )
            try:
                with self._semaphore:
                    response = self._client().post(self._endpoint, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_error = str(exc) or exc.__class__.__name__
                continue
            if response.status_code != 200:
                last_error = f"status {response.status_code}"
                continue
            return self._parse(response, candidate_labels)
        raise TopicClientError(f"topic classifier unavailable: {last_error}")

    def _parse(self, response, candidates: list[str]) -> dict[str, float]:
        try:
            body = response.json()
        except (ValueError, json.JSONDecodeError) as exc:
            raise TopicClientError("topic classifier returned non-JSON body") from exc
        labels = body.get("labels") if isinstance(body, dict) else None
        scores = body.get("scores") if isinstance(body, dict) else None
        if not isinstance(labels, list) or not isinstance(scores, list) or len(labels) != len(scores):
            raise TopicClientError("topic classifier returned mismatched labels/scores")
        allowed = {normalize_topic(c) for c in candidates}
        out: dict[str, float] = {}
        for label, score in zip(labels, scores):
            name = normalize_topic(str(label))
            if name not in allowed:
                raise TopicClientError(f"topic classifier returned unknown label {label!r}")
            try:
                value = float(score)
            except (TypeError, ValueError) as exc:
                raise TopicClientError("topic classifier returned non-numeric score") from exc
            if not 0.0 <= value <= 1.0:
                raise TopicClientError("topic classifier returned score outside [0, 1]")
            out[name] = value
        return out


def keyword_fallback(text: str, lexicon: dict[str, frozenset[str]]) -> list[TopicAssignment]:
    """Score topics by the fraction of their keywords present in the text.

    Single-word keywords match against the word-token set; keywords with
    spaces match as substrings of the lowercased text.
    """
    if not lexicon:
        raise ValueError("lexicon is empty")
    lowered = text.lower()
    words = {tok.surface.lower().rstrip("'’") for tok in tokenize(text) if tok.is_word}
    out = []
    for topic in sorted(lexicon, key=normalize_topic):
        keywords = lexicon[topic]
        if not keywords:
            continue
        hits = 0
        for keyword in keywords:
            needle = keyword.lower()
            if " " in needle:
                if needle in lowered:
                    hits += 1
            elif needle in words:
                hits += 1
        confidence = min(1.0, hits / len(keywords))
        out.append(
            TopicAssignment(
                topic=normalize_topic(topic),
                confidence=confidence,
                origin=ORIGIN_KEYWORD,
                accepted=hits > 0,
            )
        )
    return out


def classify_topics(
    text: str,
    candidate_topics: list[str],
    *,
    client: ZeroShotClient | None = None,
    lexicon: dict[str, frozenset[str]] | None = None,
    threshold: float = 0.5,
) -> list[TopicAssignment]:
    """Assign candidate topics to ``text``; remote first, lexicon fallback.

    Returns one assignment per candidate topic (confidence 0.0 when nothing
    matched), sorted by descending confidence then name. When the remote
    classifier fails and a lexicon is available, falls back to keywords and
    logs the degradation; with neither source usable, raises.
    """
    if not text.strip():
        raise ValueError("text must be non-blank")
    candidates = []
    seen = set()
    for raw in candidate_topics:
        name = normalize_topic(raw)
        if name and name not in seen:
            seen.add(name)
            candidates.append(name)
    if not candidates:
        raise ValueError("no candidate topics")

    if client is not None:
        try:
            scores = client.classify(text, candidates)
        except TopicClientError as exc:
            if lexicon is None:
                raise
            logger.warning("falling back to keyword topics: %s", exc)
        else:
            assignments = [
                TopicAssignment(
                    topic=name,
                    confidence=scores.get(name, 0.0),
                    origin=ORIGIN_CLASSIFIER,
                    accepted=scores.get(name, 0.0) >= threshold,
                )
                for name in candidates
            ]
            return sorted(assignments, key=lambda a: (-a.confidence, a.topic))

    if lexicon is None:
        raise ValueError("no topic classifier and no lexicon configured")
    restricted = {
        topic: keywords
        for topic, keywords in lexicon.items()
        if normalize_topic(topic) in candidates
    }
    by_name = {a.topic: a for a in keyword_fallback(text, restricted)} if restricted else {}
    assignments = [
        by_name.get(
            name,
            TopicAssignment(topic=name, confidence=0.0, origin=ORIGIN_KEYWORD, accepted=False),
        )
        for name in candidates
    ]
    return sorted(assignments, key=lambda a: (-a.confidence, a.topic))


def merge_topics(
    pretagged: list[str], predicted: list[TopicAssignment]
) -> list[TopicAssignment]:
    """Merge feed-provided tags with predicted assignments.

    Pretagged topics enter at confidence 1.0 and are always accepted. On a
    name collision the higher confidence wins; at equal confidence the more
    authoritative origin (pretagged, then classifier, then keyword) wins,
    so the merge is idempotent and order-insensitive.
    """
    merged: dict[str, TopicAssignment] = {}

    def consider(candidate: TopicAssignment) -> None:
        current = merged.get(candidate.topic)
        if current is None:
            merged[candidate.topic] = candidate
            return
        if candidate.confidence > current.confidence or (
            candidate.confidence == current.confidence
            and _ORIGIN_RANK[candidate.origin] < _ORIGIN_RANK[current.origin]
        ):
            merged[candidate.topic] = candidate

    for raw in pretagged:
        name = normalize_topic(raw)
        if name:
            consider(
                TopicAssignment(
                    topic=name, confidence=1.0, origin=ORIGIN_PRETAGGED, accepted=True
                )
            )
    for assignment in predicted:
        consider(assignment)
    return sorted(merged.values(), key=lambda a: (-a.confidence, a.topic))


def load_lexicon(path: str | Path) -> dict[str, frozenset[str]]:
    """Read a lexicon file: one topic per line, tab-separated keywords.

    Blank lines and ``#`` comments are skipped. Later lines for the same
    topic extend its keyword set.
    """
    lexicon: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = [part.strip() for part in line.split("\t")]
            topic = normalize_topic(parts[0])
            keywords = {kw.lower() for kw in parts[1:] if kw}
            if not topic or not keywords:
                raise ValueError(f"{path}:{lineno}: expected topic and keywords")
            lexicon.setdefault(topic, set()).update(keywords)
    if not lexicon:
        raise ValueError(f"{path}: lexicon is empty")
    return {topic: frozenset(kws) for topic, kws in lexicon.items()}
