"""Feed ingestion: fetch RSS/Atom sources, admit entries by policy,
annotate them, and upsert them into the catalog.

Fetching goes through an injectable ``fetch(url) -> bytes`` callable so the
whole pipeline runs against canned bytes in tests; the default fetcher uses
HTTP. Admission is decided per entry in a fixed order (duplicate, paywall,
language, staleness, length) so rejection counts are stable. Failed fetches
land in a retry queue instead of being lost; feed documents that do not
parse are counted as errors and never retried, since the bytes themselves
are bad.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from email.utils import parsedate_to_datetime
from pathlib import Path
from xml.etree import ElementTree

from .catalog import (
    KIND_ARTICLE,
    KIND_VIDEO,
    CatalogStore,
    ContentItem,
    Cue,
    DifficultyAnnotation,
)
from .readability import InsufficientTextError, ReadabilityReport, score_all
from .textproc import tokenize
from .topics import TopicAssignment, merge_topics

logger = logging.getLogger(__name__)

ATOM_NS = "{http://www.w3.org/2005/Atom}"
CONTENT_NS = "{http://purl.org/rss/1.0/modules/content/}"

REJECT_DUPLICATE = "duplicate"
REJECT_PAYWALLED = "paywalled"
REJECT_LANGUAGE = "language"
REJECT_STALE = "stale"
REJECT_TOO_SHORT = "too_short"
REJECT_CAPTIONS_UNAVAILABLE = "captions_unavailable"


class FeedParseError(ValueError):
    """Feed bytes are not a well-formed RSS or Atom document."""


class CaptionParseError(ValueError):
    """Caption document has a malformed cue block."""


class FetchError(RuntimeError):
    """A fetch attempt failed (network error or non-200 status)."""


@dataclass(frozen=True)
class FeedSource:
    url: str
    kind: str = "article_feed"
    language: str = "fr"
    source_id: str = ""
    poll_interval_minutes: int = 30
    enabled: bool = True

    def __post_init__(self):
        if not self.url:
            raise ValueError("source url must be non-empty")
        if self.kind not in ("article_feed", "video_feed"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.poll_interval_minutes < 1:
            raise ValueError("poll_interval_minutes must be positive")
        if not self.source_id:
            digest = hashlib.sha256(self.url.encode("utf-8")).hexdigest()[:12]
            object.__setattr__(self, "source_id", f"src-{digest}")


@dataclass(frozen=True)
class CrawlPolicy:
    """Admission rules applied to every fetched entry."""

    min_words: int = 100
    paywall_markers: tuple[str, ...] = ()
    allowed_languages: tuple[str, ...] = ()
    max_age_days: int | None = None

    def __post_init__(self):
        if self.min_words < 1:
            raise ValueError("min_words must be positive")
        if self.max_age_days is not None and self.max_age_days < 1:
            raise ValueError("max_age_days must be positive")
        object.__setattr__(
            self, "paywall_markers", tuple(m.lower() for m in self.paywall_markers if m)
        )
        object.__setattr__(self, "allowed_languages", tuple(self.allowed_languages))


@dataclass(frozen=True)
class FeedEntry:
    """One parsed feed item, provider-format differences already erased."""

    guid: str
    title: str
    link: str
    kind: str
    language: str
    description: str = ""
    body: str = ""
    published_at: datetime | None = None
    tags: tuple[str, ...] = ()
    captions_url: str = ""


def _parse_rfc822(value: str) -> datetime | None:
    try:
        parsed = parsedate_to_datetime(value)
    except (TypeError, ValueError):
        return None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed


def _parse_iso(value: str) -> datetime | None:
    try:
        parsed = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        return None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed


def _text(node) -> str:
    return (node.text or "").strip() if node is not None else ""


_VTT_TYPES = ("text/vtt", "text/plain")


def _entry_kind(source: FeedSource, has_video_enclosure: bool) -> str:
    if source.kind == "video_feed" or has_video_enclosure:
        return KIND_VIDEO
    return KIND_ARTICLE


def _parse_rss(root, source: FeedSource) -> list[FeedEntry]:
    channel = root.find("channel")
    if channel is None:
        raise FeedParseError("rss document has no channel")
    entries = []
    for item in channel.findall("item"):
        title = _text(item.find("title"))
        link = _text(item.find("link"))
        guid = _text(item.find("guid")) or link
        if not guid or not title:
            logger.warning("skipping rss item without guid/title in %s", source.url)
            continue
        captions_url = ""
        has_video = False
        for enclosure in item.findall("enclosure"):
            mime = enclosure.get("type", "")
            url = enclosure.get("url", "")
            if mime.startswith("video/"):
                has_video = True
            elif mime in _VTT_TYPES and url:
                captions_url = url
        entries.append(
            FeedEntry(
                guid=guid,
                title=title,
                link=link or guid,
                kind=_entry_kind(source, has_video),
                language=_text(item.find("language")) or source.language,
                description=_text(item.find("description")),
                body=_text(item.find(f"{CONTENT_NS}encoded")),
                published_at=_parse_rfc822(_text(item.find("pubDate"))),
                tags=tuple(_text(c) for c in item.findall("category") if _text(c)),
                captions_url=captions_url,
            )
        )
    return entries


def _parse_atom(root, source: FeedSource) -> list[FeedEntry]:
    entries = []
    for item in root.findall(f"{ATOM_NS}entry"):
        title = _text(item.find(f"{ATOM_NS}title"))
        guid = _text(item.find(f"{ATOM_NS}id"))
        link = ""
        captions_url = ""
        has_video = False
        for ln in item.findall(f"{ATOM_NS}link"):
            rel = ln.get("rel", "alternate")
            href = ln.get("href", "")
            if rel == "alternate" and href and not link:
                link = href
            elif rel == "captions" and href:
                captions_url = href
            elif rel == "enclosure" and ln.get("type", "").startswith("video/"):
                has_video = True
        guid = guid or link
        if not guid or not title:
            logger.warning("skipping atom entry without id/title in %s", source.url)
            continue
        stamp = _text(item.find(f"{ATOM_NS}published")) or _text(
            item.find(f"{ATOM_NS}updated")
        )
        entries.append(
            FeedEntry(
                guid=guid,
                title=title,
                link=link or guid,
                kind=_entry_kind(source, has_video),
                language=source.language,
                description=_text(item.find(f"{ATOM_NS}summary")),
                body=_text(item.find(f"{ATOM_NS}content")),
                published_at=_parse_iso(stamp) if stamp else None,
                tags=tuple(
                    c.get("term", "").strip()
                    for c in item.findall(f"{ATOM_NS}category")
                    if c.get("term", "").strip()
                ),
                captions_url=captions_url,
            )
        )
    return entries


def parse_feed(data: bytes, source: FeedSource) -> list[FeedEntry]:
    """Parse RSS 2.0 or Atom bytes into entries; malformed input raises."""
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        raise FeedParseError(f"feed parse failed: {exc}") from exc
    tag = root.tag
    if tag == "rss":
        return _parse_rss(root, source)
    if tag == f"{ATOM_NS}feed":
        return _parse_atom(root, source)
    raise FeedParseError(f"unrecognized feed root element {tag!r}")


_TIMESTAMP_RE = re.compile(r"^(?:(\d+):)?([0-5]?\d):([0-5]\d)[.,](\d{3})$")


def _parse_timestamp(raw: str) -> float:
    match = _TIMESTAMP_RE.match(raw.strip())
    if not match:
        raise CaptionParseError(f"bad cue timestamp {raw!r}")
    hours = int(match.group(1) or 0)
    minutes = int(match.group(2))
    seconds = int(match.group(3))
    millis = int(match.group(4))
    return hours * 3600.0 + minutes * 60.0 + seconds + millis / 1000.0


def parse_captions(text: str) -> tuple[Cue, ...]:
    """Parse WebVTT-style captions into cues.

    Accepts an optional WEBVTT header, optional numeric cue identifiers,
    and NOTE blocks (skipped). A block whose timing line is malformed
    raises :class:`CaptionParseError`.
    """
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    pos = 0
    if lines and lines[0].lstrip("﻿").startswith("WEBVTT"):
        pos = 1
    cues = []
    n = len(lines)
    while pos < n:
        if not lines[pos].strip():
            pos += 1
            continue
        block = []
        while pos < n and lines[pos].strip():
            block.append(lines[pos])
            pos += 1
        if block[0].strip().startswith("NOTE"):
            continue
        timing_idx = 0
        if "-->" not in block[0]:
            timing_idx = 1
            if len(block) < 2 or "-->" not in block[1]:
                raise CaptionParseError(f"cue block without timing line: {block[0]!r}")
        timing = block[timing_idx].split("-->")
        if len(timing) != 2:
            raise CaptionParseError(f"bad timing line {block[timing_idx]!r}")
        start = _parse_timestamp(timing[0])
        # Cue settings may trail the end timestamp.
        end = _parse_timestamp(timing[1].strip().split(" ")[0])
        if end <= start:
            raise CaptionParseError(f"cue ends before it starts: {block[timing_idx]!r}")
        cue_text = " ".join(line.strip() for line in block[timing_idx + 1 :]).strip()
        if cue_text:
            cues.append(Cue(start=start, end=end, text=cue_text))
    return tuple(cues)


class SeenStore:
    """Append-only set of already-admitted entry ids, one per line."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._seen: set[str] = set()
        if self._path.exists():
            with open(self._path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._seen.add(line)
        self._fh = open(self._path, "a", encoding="utf-8")

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self._seen

    def __len__(self) -> int:
        with self._lock:
            return len(self._seen)

    def add(self, key: str) -> None:
        with self._lock:
            if key in self._seen:
                return
            self._seen.add(key)
            self._fh.write(key + "\n")
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()


class RetryQueue:
    """Journal-backed queue of failed fetches.

    ``push`` records a failure, ``resolve`` clears it; entries that have
    failed ``max_attempts`` times are dropped with a log line. State is
    replayed from the journal on open so pending work survives restarts.
    """

    def __init__(self, path: str | Path, *, max_attempts: int = 3):
        self._path = Path(path)
        self._max_attempts = max_attempts
        self._lock = threading.Lock()
        self._pending: dict[str, dict] = {}
        if self._path.exists():
            with open(self._path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    if record["op"] == "push":
                        entry = self._pending.setdefault(
                            record["url"],
                            {"url": record["url"], "context": record["context"], "attempts": 0},
                        )
                        entry["attempts"] += 1
                        entry["context"] = record["context"]
                    elif record["op"] == "resolve":
                        self._pending.pop(record["url"], None)
        self._fh = open(self._path, "a", encoding="utf-8")

    def push(self, url: str, context: dict) -> None:
        with self._lock:
            entry = self._pending.setdefault(url, {"url": url, "context": context, "attempts": 0})
            entry["attempts"] += 1
            entry["context"] = context
            self._fh.write(json.dumps({"op": "push", "url": url, "context": context}) + "\n")
            self._fh.flush()
            if entry["attempts"] >= self._max_attempts:
                logger.warning("dropping %s after %d failed attempts", url, entry["attempts"])
                self._pending.pop(url)
                self._fh.write(json.dumps({"op": "resolve", "url": url}) + "\n")
                self._fh.flush()

    def resolve(self, url: str) -> None:
        with self._lock:
            if url in self._pending:
                self._pending.pop(url)
                self._fh.write(json.dumps({"op": "resolve", "url": url}) + "\n")
                self._fh.flush()

    def pending(self) -> list[dict]:
        with self._lock:
            return [dict(entry) for entry in self._pending.values()]

    def __len__(self) -> int:
        with self._lock:
            return len(self._pending)

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()


def http_fetch_factory(*, timeout: float = 20.0, user_agent: str = "linguafeed/0.1"):
    """Default fetcher: HTTP GET returning the body bytes."""

    def fetch(url: str) -> bytes:
        import httpx

        try:
            response = httpx.get(
                url,
                timeout=timeout,
                follow_redirects=True,
                headers={"User-Agent": user_agent},
            )
        except httpx.HTTPError as exc:
            raise FetchError(str(exc) or exc.__class__.__name__) from exc
        if response.status_code != 200:
            raise FetchError(f"status {response.status_code} for {url}")
        return response.content

    return fetch


def count_words(text: str) -> int:
    return sum(1 for tok in tokenize(text) if tok.is_word)


def entry_text(entry: FeedEntry, cues: tuple[Cue, ...] = ()) -> str:
    """The text an entry is scored on: body, else captions, else summary."""
    if entry.body.strip():
        return entry.body
    if cues:
        return " ".join(c.text for c in cues)
    return entry.description


def is_paywalled(entry: FeedEntry, policy: CrawlPolicy) -> bool:
    haystack = " ".join((entry.title, entry.description, entry.body)).lower()
    return any(marker in haystack for marker in policy.paywall_markers)


def item_id_for(guid: str) -> str:
    return "itm-" + hashlib.sha256(guid.encode("utf-8")).hexdigest()[:16]


@dataclass
class CrawlReport:
    """Counters for one crawl pass; rejected is keyed by reason.

    ``per_source`` holds the same counters broken down by source id so the
    operator output can show where entries came from and why they fell out.
    """

    sources_polled: int = 0
    entries_seen: int = 0
    admitted: int = 0
    rejected: dict[str, int] = field(default_factory=dict)
    fetch_errors: int = 0
    parse_errors: int = 0
    per_source: dict[str, dict] = field(default_factory=dict)

    def _source(self, source_id: str) -> dict:
        return self.per_source.setdefault(
            source_id, {"entries_seen": 0, "admitted": 0, "rejected": {}}
        )

    def note_entry(self, source_id: str) -> None:
        self.entries_seen += 1
        self._source(source_id)["entries_seen"] += 1

    def note_admitted(self, source_id: str) -> None:
        self.admitted += 1
        self._source(source_id)["admitted"] += 1

    def reject(self, source_id: str, reason: str) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + 1
        per = self._source(source_id)["rejected"]
        per[reason] = per.get(reason, 0) + 1

    def to_dict(self) -> dict:
        return {
            "sources_polled": self.sources_polled,
            "entries_seen": self.entries_seen,
            "admitted": self.admitted,
            "rejected": dict(sorted(self.rejected.items())),
            "fetch_errors": self.fetch_errors,
            "parse_errors": self.parse_errors,
            "per_source": {
                source_id: {
                    "entries_seen": counts["entries_seen"],
                    "admitted": counts["admitted"],
                    "rejected": dict(sorted(counts["rejected"].items())),
                }
                for source_id, counts in sorted(self.per_source.items())
            },
        }


@dataclass
class Annotators:
    """Annotation callables applied to every admitted entry.

    Any of them may be None, in which case the matching field stays empty.
    ``difficulty`` maps text to a :class:`DifficultyAnnotation`; ``topics``
    maps (text, pretagged tags) to merged assignments.
    """

    difficulty: object = None
    topics: object = None

    def annotate_difficulty(self, text: str) -> DifficultyAnnotation | None:
        if self.difficulty is None or not text.strip():
            return None
        return self.difficulty(text)

    def annotate_readability(self, text: str) -> ReadabilityReport | None:
        if not text.strip():
            return None
        try:
            return score_all(text)
        except InsufficientTextError:
            return None

    def annotate_topics(self, text: str, pretagged: tuple[str, ...]) -> tuple[TopicAssignment, ...]:
        predicted: list[TopicAssignment] = []
        if self.topics is not None and text.strip():
            predicted = list(self.topics(text))
        return tuple(merge_topics(list(pretagged), predicted))


def _admit(
    entry: FeedEntry,
    policy: CrawlPolicy,
    seen: SeenStore,
    cues: tuple[Cue, ...],
    now: datetime,
) -> str | None:
    """Rejection reason for an entry, or None when it is admitted."""
    if entry.guid in seen:
        return REJECT_DUPLICATE
    if is_paywalled(entry, policy):
        return REJECT_PAYWALLED
    if policy.allowed_languages and entry.language not in policy.allowed_languages:
        return REJECT_LANGUAGE
    if (
        policy.max_age_days is not None
        and entry.published_at is not None
        and entry.published_at < now - timedelta(days=policy.max_age_days)
    ):
        return REJECT_STALE
    if count_words(entry_text(entry, cues)) < policy.min_words:
        return REJECT_TOO_SHORT
    return None


def build_item(entry: FeedEntry, source: FeedSource, cues: tuple[Cue, ...], annotators: Annotators) -> ContentItem:
    text = entry_text(entry, cues)
    return ContentItem(
        id=item_id_for(entry.guid),
        kind=entry.kind,
        url=entry.link,
        title=entry.title,
        language=entry.language,
        source_id=source.source_id,
        description=entry.description,
        body=entry.body if entry.body.strip() else ("" if cues else entry.description),
        published_at=entry.published_at,
        topics=annotators.annotate_topics(text, entry.tags),
        difficulty=annotators.annotate_difficulty(text),
        readability=annotators.annotate_readability(text),
        cues=cues,
    )


def crawl_once(
    sources: list[FeedSource],
    policy: CrawlPolicy,
    store: CatalogStore,
    seen: SeenStore,
    retry: RetryQueue,
    *,
    fetch,
    annotators: Annotators | None = None,
    now: datetime | None = None,
) -> CrawlReport:
    """One crawl pass over the enabled sources.

    Feed fetch failures are queued for retry; entries with unreachable
    captions are rejected for this pass (and their caption URL queued) so
    they are reconsidered once the captions resolve.
    """
    annotators = annotators or Annotators()
    now = now or datetime.now(timezone.utc)
    report = CrawlReport()
    for source in sources:
        if not source.enabled:
            continue
        report.sources_polled += 1
        try:
            data = fetch(source.url)
        except FetchError as exc:
            logger.warning("feed fetch failed for %s: %s", source.url, exc)
            retry.push(source.url, {"kind": "feed", "source_id": source.source_id})
            report.fetch_errors += 1
            continue
        retry.resolve(source.url)
        try:
            entries = parse_feed(data, source)
        except FeedParseError as exc:
            logger.warning("feed parse failed for %s: %s", source.url, exc)
            report.parse_errors += 1
            continue
        for entry in entries:
            report.note_entry(source.source_id)
            cues: tuple[Cue, ...] = ()
            if entry.captions_url and entry.guid not in seen:
                try:
                    cues = parse_captions(fetch(entry.captions_url).decode("utf-8"))
                    retry.resolve(entry.captions_url)
                except FetchError as exc:
                    logger.warning(
                        "captions fetch failed for %s: %s", entry.captions_url, exc
                    )
                    retry.push(
                        entry.captions_url,
                        {"kind": "captions", "source_id": source.source_id, "guid": entry.guid},
                    )
                    report.fetch_errors += 1
                    report.reject(source.source_id, REJECT_CAPTIONS_UNAVAILABLE)
                    continue
                except CaptionParseError as exc:
                    logger.warning(
                        "captions parse failed for %s: %s", entry.captions_url, exc
                    )
                    report.parse_errors += 1
                    report.reject(source.source_id, REJECT_CAPTIONS_UNAVAILABLE)
                    continue
            reason = _admit(entry, policy, seen, cues, now)
            if reason is not None:
                report.reject(source.source_id, reason)
                continue
            store.upsert(build_item(entry, source, cues, annotators))
            seen.add(entry.guid)
            report.note_admitted(source.source_id)
    return report


class PollScheduler:
    """Decides which sources are due; a new source is due immediately."""

    def __init__(self, sources: list[FeedSource]):
        self._sources = [s for s in sources if s.enabled]
        self._next_due: dict[str, datetime] = {}

    def due(self, now: datetime) -> list[FeedSource]:
        return [
            source
            for source in self._sources
            if self._next_due.get(source.source_id) is None
            or self._next_due[source.source_id] <= now
        ]

    def mark_polled(self, source: FeedSource, now: datetime) -> None:
        self._next_due[source.source_id] = now + timedelta(
            minutes=source.poll_interval_minutes
        )

    def next_wakeup(self, now: datetime) -> datetime:
        if not self._next_due or len(self._next_due) < len(self._sources):
            return now
        return min(self._next_due.values())


@dataclass(frozen=True)
class FeedsConfig:
    """Parsed crawl configuration file."""

    data_dir: str
    scale_labels: tuple[str, ...]
    sources: tuple[FeedSource, ...]
    policy: CrawlPolicy
    model_path: str = ""
    provider: dict = field(default_factory=dict)
    topics: dict = field(default_factory=dict)
    user_agent: str = "linguafeed/0.1"


def load_feeds_config(path: str | Path) -> FeedsConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError("feeds config must be a JSON object")
    for key in ("data_dir", "scale", "sources"):
        if key not in raw:
            raise ValueError(f"feeds config is missing {key!r}")
    policy_raw = raw.get("policy", {})
    policy = CrawlPolicy(
        min_words=policy_raw.get("min_words", 100),
        paywall_markers=tuple(policy_raw.get("paywall_markers", ())),
        allowed_languages=tuple(policy_raw.get("allowed_languages", ())),
        max_age_days=policy_raw.get("max_age_days"),
    )
    sources = tuple(
        FeedSource(
            url=row["url"],
            kind=row.get("kind", "article_feed"),
            language=row.get("language", "fr"),
            source_id=row.get("source_id", ""),
            poll_interval_minutes=row.get("poll_interval_minutes", 30),
            enabled=row.get("enabled", True),
        )
        for row in raw["sources"]
    )
    if not sources:
        raise ValueError("feeds config has no sources")
    return FeedsConfig(
        data_dir=raw["data_dir"],
        scale_labels=tuple(raw["scale"]),
        sources=sources,
        policy=policy,
        model_path=raw.get("model_path", ""),
        provider=dict(raw.get("provider", {})),
        topics=dict(raw.get("topics", {})),
        user_agent=raw.get("user_agent", "linguafeed/0.1"),
    )
