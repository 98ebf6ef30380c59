"""Personalized recommendation and the learner model.

An item's score is a weighted sum of three signals: whether it carries one
of the learner's interests, how close its difficulty sits to the learner's
target level (current estimate plus a small stretch), and how fresh it is.
Items tagged with a non-interest are excluded outright; already-seen items
are both penalized by the score and excluded from recommendations.

The proficiency estimate moves by an exponential moving average over
explicit feedback: a verdict implies a level (item difficulty index, one
above for too_easy, one below for too_hard) and the estimate is pulled
``alpha`` of the way toward it, clamped to the scale bounds.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from .catalog import CatalogStore, ContentItem
from .topics import normalize_topic

logger = logging.getLogger(__name__)

VERDICT_TOO_EASY = "too_easy"
VERDICT_OK = "ok"
VERDICT_TOO_HARD = "too_hard"

VERDICTS = (VERDICT_TOO_EASY, VERDICT_OK, VERDICT_TOO_HARD)

_VERDICT_DELTA = {VERDICT_TOO_EASY: 1, VERDICT_OK: 0, VERDICT_TOO_HARD: -1}

EXCLUDED = float("-inf")


@dataclass(frozen=True)
class RecommenderConfig:
    """Scoring weights and learner-model constants.

    Defaults are chosen for sane behavior, not tuned. ``epsilon`` > 0
    turns on seeded exploration: each slot is filled from the top
    ``exploration_pool_factor * k`` candidates instead of strictly in
    score order.
    """

    w_topic: float = 0.5
    w_difficulty: float = 0.35
    w_freshness: float = 0.15
    stretch: float = 0.5
    alpha: float = 0.2
    half_life_hours: float = 72.0
    seen_penalty: float = 1.0
    epsilon: float = 0.0
    exploration_pool_factor: int = 3
    exploration_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.half_life_hours <= 0:
            raise ValueError("half_life_hours must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.exploration_pool_factor < 1:
            raise ValueError("exploration_pool_factor must be positive")


@dataclass(frozen=True)
class FeedbackEvent:
    item_id: str
    verdict: str
    item_difficulty_index: int
    timestamp: datetime

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.item_difficulty_index < 0:
            raise ValueError("item_difficulty_index must be non-negative")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")


@dataclass(frozen=True)
class LearnerProfile:
    """One learner: declared tastes, proficiency estimate, history."""

    user_id: str
    k: int
    interests: frozenset[str] = frozenset()
    non_interests: frozenset[str] = frozenset()
    level_estimate: float = -1.0  # sentinel: replaced by the scale midpoint
    seen_item_ids: frozenset[str] = frozenset()
    feedback_log: tuple[FeedbackEvent, ...] = ()

    def __post_init__(self):
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        interests = frozenset(normalize_topic(t) for t in self.interests) - {""}
        non_interests = frozenset(normalize_topic(t) for t in self.non_interests) - {""}
        if interests & non_interests:
            raise ValueError("interests and non_interests overlap")
        object.__setattr__(self, "interests", interests)
        object.__setattr__(self, "non_interests", non_interests)
        level = self.level_estimate
        if level == -1.0:
            level = (self.k - 1) / 2.0
        if not 0.0 <= level <= self.k - 1:
            raise ValueError("level_estimate out of scale bounds")
        object.__setattr__(self, "level_estimate", float(level))
        object.__setattr__(self, "seen_item_ids", frozenset(self.seen_item_ids))
        object.__setattr__(self, "feedback_log", tuple(self.feedback_log))

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "k": self.k,
            "interests": sorted(self.interests),
            "non_interests": sorted(self.non_interests),
            "level_estimate": self.level_estimate,
            "seen_item_ids": sorted(self.seen_item_ids),
            "feedback_log": [
                {
                    "item_id": e.item_id,
                    "verdict": e.verdict,
                    "item_difficulty_index": e.item_difficulty_index,
                    "timestamp": e.timestamp.isoformat(),
                }
                for e in self.feedback_log
            ],
        }

    @classmethod
    def from_dict(cls, row: dict) -> "LearnerProfile":
        return cls(
            user_id=row["user_id"],
            k=int(row["k"]),
            interests=frozenset(row.get("interests", ())),
            non_interests=frozenset(row.get("non_interests", ())),
            level_estimate=float(row["level_estimate"]),
            seen_item_ids=frozenset(row.get("seen_item_ids", ())),
            feedback_log=tuple(
                FeedbackEvent(
                    item_id=e["item_id"],
                    verdict=e["verdict"],
                    item_difficulty_index=int(e["item_difficulty_index"]),
                    timestamp=datetime.fromisoformat(e["timestamp"]),
                )
                for e in row.get("feedback_log", ())
            ),
        )


def score_item(
    profile: LearnerProfile,
    item: ContentItem,
    now: datetime,
    cfg: RecommenderConfig = RecommenderConfig(),
    *,
    scale=None,
) -> float:
    """Relevance score of one annotated item; -inf marks exclusion.

    Only accepted topic assignments count for matching. Items without a
    published date earn no freshness credit. ``scale`` maps the difficulty
    label to its index; without one the probability argmax stands in.
    """
    topics = set(item.accepted_topics())
    if topics & profile.non_interests:
        return EXCLUDED
    topic_score = 1.0 if topics & profile.interests else 0.0

    if item.difficulty is None:
        return EXCLUDED
    if scale is not None:
        idx = scale.index(item.difficulty.label)
    else:
        idx = int(np.argmax(item.difficulty.probs))
    target = profile.level_estimate + cfg.stretch
    difficulty_score = max(0.0, 1.0 - abs(idx - target) / profile.k)

    if item.published_at is None:
        freshness = 0.0
    else:
        age_hours = max(0.0, (now - item.published_at).total_seconds() / 3600.0)
        freshness = math.exp(-age_hours / cfg.half_life_hours)

    score = (
        cfg.w_topic * topic_score
        + cfg.w_difficulty * difficulty_score
        + cfg.w_freshness * freshness
    )
    if item.id in profile.seen_item_ids:
        score -= cfg.seen_penalty
    return score


def recommend(
    profile: LearnerProfile,
    catalog,
    k: int,
    now: datetime,
    cfg: RecommenderConfig = RecommenderConfig(),
) -> list[ContentItem]:
    """Top-k items for a learner; pure in (profile, catalog snapshot, now).

    Seen items, excluded items, and items without a difficulty annotation
    never appear. ``catalog`` may be a :class:`CatalogStore` or any
    iterable of items.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if isinstance(catalog, CatalogStore):
        items = catalog.all_items()
        scale = catalog.scale
    else:
        items = list(catalog)
        scale = None
    scored = []
    for item in items:
        if item.id in profile.seen_item_ids:
            continue
        score = score_item(profile, item, now, cfg, scale=scale)
        if score == EXCLUDED:
            continue
        scored.append((score, item))

    def _stamp(item: ContentItem) -> float:
        return item.published_at.timestamp() if item.published_at else float("-inf")

    scored.sort(key=lambda pair: (-pair[0], -_stamp(pair[1]), pair[1].id))
    if cfg.epsilon <= 0.0:
        return [item for _, item in scored[:k]]

    pool = scored[: cfg.exploration_pool_factor * k]
    rng = np.random.default_rng(cfg.exploration_seed)
    picked: list[ContentItem] = []
    while pool and len(picked) < k:
        if len(pool) > 1 and rng.random() < cfg.epsilon:
            choice = int(rng.integers(0, len(pool)))
        else:
            choice = 0
        picked.append(pool.pop(choice)[1])
    return picked


def apply_feedback(
    profile: LearnerProfile,
    event: FeedbackEvent,
    cfg: RecommenderConfig = RecommenderConfig(),
) -> LearnerProfile:
    """New profile after one explicit difficulty verdict.

    The estimate moves alpha of the way toward the implied level
    (difficulty index shifted by the verdict) and stays inside [0, k-1].
    """
    if event.item_difficulty_index >= profile.k:
        raise ValueError("item_difficulty_index out of scale bounds")
    implied = event.item_difficulty_index + _VERDICT_DELTA[event.verdict]
    updated = (1.0 - cfg.alpha) * profile.level_estimate + cfg.alpha * implied
    clamped = min(float(profile.k - 1), max(0.0, updated))
    return replace(
        profile,
        level_estimate=clamped,
        seen_item_ids=profile.seen_item_ids | {event.item_id},
        feedback_log=profile.feedback_log + (event,),
    )


class ProfileStore:
    """Durable learner profiles: JSON-lines journal, last record wins.

    ``put`` appends the full profile snapshot; ``compact`` rewrites the
    file with one line per user. Mutations per user are serialized through
    :meth:`update`.
    """

    def __init__(self, path: str | Path, k: int):
        self._path = Path(path)
        self._k = k
        self._lock = threading.Lock()
        self._user_locks: dict[str, threading.Lock] = {}
        self._profiles: dict[str, LearnerProfile] = {}
        if self._path.exists():
            with open(self._path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    profile = LearnerProfile.from_dict(json.loads(line))
                    self._profiles[profile.user_id] = profile
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self._path, "a", encoding="utf-8")

    @property
    def k(self) -> int:
        return self._k

    def _user_lock(self, user_id: str) -> threading.Lock:
        with self._lock:
            if user_id not in self._user_locks:
                self._user_locks[user_id] = threading.Lock()
            return self._user_locks[user_id]

    def get(self, user_id: str) -> LearnerProfile | None:
        with self._lock:
            return self._profiles.get(user_id)

    def __contains__(self, user_id: str) -> bool:
        return self.get(user_id) is not None

    def user_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._profiles)

    def default_profile(self, user_id: str) -> LearnerProfile:
        """An unseen user starts at the scale midpoint with no tastes."""
        return LearnerProfile(user_id=user_id, k=self._k)

    def put(self, profile: LearnerProfile) -> None:
        if profile.k != self._k:
            raise ValueError("profile scale size does not match store")
        with self._lock:
            self._profiles[profile.user_id] = profile
            self._fh.write(
                json.dumps(profile.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
            )
            self._fh.flush()

    def update(self, user_id: str, fn) -> LearnerProfile:
        """Read-modify-write one profile under its per-user lock.

        ``fn`` receives the current profile (created at the default if
        absent) and returns the replacement, which is persisted.
        """
        with self._user_lock(user_id):
            current = self.get(user_id) or self.default_profile(user_id)
            updated = fn(current)
            if updated.user_id != user_id:
                raise ValueError("update must keep the user_id")
            self.put(updated)
            return updated

    def compact(self) -> None:
        import os

        with self._lock:
            tmp = self._path.with_suffix(self._path.suffix + ".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                for user_id in sorted(self._profiles):
                    fh.write(
                        json.dumps(
                            self._profiles[user_id].to_dict(),
                            sort_keys=True,
                            separators=(",", ":"),
                        )
                        + "\n"
                    )
            self._fh.close()
            os.replace(tmp, self._path)
            self._fh = open(self._path, "a", encoding="utf-8")

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()
