"""HTTP facade over the catalog, recommender, and translate client.

Every response carries an ``X-Schema-Version`` header. Errors share one
JSON shape: {"status", "code", "message"} with status echoing the HTTP
status code. Authentication is a single static bearer token for the whole
deployment; when no token is configured the API is open. ``/healthz`` is
always open so probes work before credentials are wired up.

State lives in the catalog and profile stores only; handlers are otherwise
stateless, and per-user writes are serialized by the profile store.
"""

from __future__ import annotations

import json
import logging
import socket
from contextlib import asynccontextmanager
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .catalog import CatalogStore, ContentItem, Query
from .classifier import DifficultyScale
from .recommender import (
    VERDICTS,
    FeedbackEvent,
    LearnerProfile,
    ProfileStore,
    RecommenderConfig,
    apply_feedback,
    recommend,
)
from .topics import normalize_topic

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

MAX_TRANSLATE_CHARS = 200


class ApiError(Exception):
    """Error carried to the client as {"status", "code", "message"}."""

    def __init__(self, status: int, code: str, message: str):
        if status not in (400, 401, 404, 409, 422, 500, 502):
            raise ValueError(f"unsupported error status {status}")
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class TranslateError(RuntimeError):
    """Upstream translation service failed."""


class StubTranslateClient:
    """Offline stand-in: echoes the text reversed, no pronunciation."""

    def translate(self, text: str, source_lang: str, target_lang: str) -> dict:
        return {"translation": text[::-1], "pronunciation_url": None}


class HttpTranslateClient:
    """Proxy to a third-party translation endpoint."""

    def __init__(self, endpoint: str, *, timeout: float = 10.0, transport=None):
        if not endpoint:
            raise ValueError("endpoint must be non-empty")
        self._endpoint = endpoint
        self._timeout = timeout
        self._transport = transport

    def translate(self, text: str, source_lang: str, target_lang: str) -> dict:
        import httpx

        try:
            with httpx.Client(transport=self._transport, timeout=self._timeout) as client:
                response = client.post(
                    self._endpoint,
                    json={
                        "text": text,
                        "source_lang": source_lang,
                        "target_lang": target_lang,
                    },
                )
        except httpx.HTTPError as exc:
            raise TranslateError(str(exc) or exc.__class__.__name__) from exc
        if response.status_code != 200:
            raise TranslateError(f"status {response.status_code}")
        try:
            body = response.json()
        except (ValueError, json.JSONDecodeError) as exc:
            raise TranslateError("non-JSON body") from exc
        if not isinstance(body, dict) or not isinstance(body.get("translation"), str):
            raise TranslateError("missing translation field")
        return {
            "translation": body["translation"],
            "pronunciation_url": body.get("pronunciation_url"),
        }


@dataclass
class ServiceState:
    """Everything the handlers touch, injectable for tests."""

    catalog: CatalogStore
    profiles: ProfileStore
    translate: object = field(default_factory=StubTranslateClient)
    rec_cfg: RecommenderConfig = field(default_factory=RecommenderConfig)
    auth_token: str = ""
    now_fn: object = None

    def now(self) -> datetime:
        return self.now_fn() if self.now_fn is not None else datetime.now(timezone.utc)


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: str
    scale_labels: tuple[str, ...]
    host: str = "127.0.0.1"
    port: int = 8080
    auth_token: str = ""
    translate_endpoint: str = ""
    recommender: dict = field(default_factory=dict)


def load_service_config(path: str | Path) -> ServiceConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError("service config must be a JSON object")
    for key in ("data_dir", "scale"):
        if key not in raw:
            raise ValueError(f"service config is missing {key!r}")
    return ServiceConfig(
        data_dir=raw["data_dir"],
        scale_labels=tuple(raw["scale"]),
        host=raw.get("host", "127.0.0.1"),
        port=int(raw.get("port", 8080)),
        auth_token=raw.get("auth_token", "") or "",
        translate_endpoint=raw.get("translate_endpoint", "") or "",
        recommender=dict(raw.get("recommender", {})),
    )


def build_state(config: ServiceConfig) -> ServiceState:
    scale = DifficultyScale(labels=config.scale_labels)
    catalog = CatalogStore(config.data_dir, scale)
    profiles = ProfileStore(Path(config.data_dir) / "profiles.jsonl", k=len(scale))
    translate = (
        HttpTranslateClient(config.translate_endpoint)
        if config.translate_endpoint
        else StubTranslateClient()
    )
    rec_cfg = RecommenderConfig(**config.recommender) if config.recommender else RecommenderConfig()
    return ServiceState(
        catalog=catalog,
        profiles=profiles,
        translate=translate,
        rec_cfg=rec_cfg,
        auth_token=config.auth_token,
    )


def summarize_item(item: ContentItem, score: float | None = None) -> dict:
    summary = {
        "id": item.id,
        "kind": item.kind,
        "title": item.title,
        "url": item.url,
        "language": item.language,
        "description": item.description,
        "published_at": item.published_at.isoformat() if item.published_at else None,
        "topics": list(item.accepted_topics()),
        "difficulty": None
        if item.difficulty is None
        else {"label": item.difficulty.label, "probs": list(item.difficulty.probs)},
        "readability": None
        if item.readability is None
        else {
            "gfi": item.readability.gfi,
            "ari": item.readability.ari,
            "fkgl": item.readability.fkgl,
        },
    }
    if score is not None:
        summary["score"] = score
    return summary


class InterestsBody(BaseModel):
    interests: list[str] = []
    non_interests: list[str] = []


class FeedbackBody(BaseModel):
    item_id: str
    verdict: str


class TranslateBody(BaseModel):
    text: str
    source_lang: str = "fr"
    target_lang: str = "en"


def create_app(state: ServiceState) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        state.catalog.close()
        state.profiles.close()

    app = FastAPI(
        title="linguafeed",
        docs_url=None,
        redoc_url=None,
        openapi_url=None,
        lifespan=lifespan,
    )
    scale = state.catalog.scale

    def error_response(status: int, code: str, message: str) -> JSONResponse:
        response = JSONResponse(
            status_code=status,
            content={"status": status, "code": code, "message": message},
        )
        response.headers["X-Schema-Version"] = SCHEMA_VERSION
        return response

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        for err in exc.errors():
            if str(err.get("type", "")).startswith("json"):
                return error_response(400, "bad_request", "malformed JSON body")
        return error_response(422, "validation_error", str(exc.errors()[:3]))

    @app.exception_handler(Exception)
    async def handle_unexpected(request: Request, exc: Exception):
        logger.exception("unhandled error on %s %s", request.method, request.url.path)
        return error_response(500, "internal_error", "internal server error")

    @app.middleware("http")
    async def version_and_auth(request: Request, call_next):
        if (
            state.auth_token
            and request.url.path.startswith("/api")
            and request.headers.get("Authorization") != f"Bearer {state.auth_token}"
        ):
            return error_response(401, "unauthorized", "missing or invalid bearer token")
        response = await call_next(request)
        response.headers["X-Schema-Version"] = SCHEMA_VERSION
        logger.info(
            "%s %s -> %d", request.method, request.url.path, response.status_code
        )
        return response

    def parse_level(name: str, value: str) -> int:
        try:
            return scale.index(value)
        except ValueError:
            raise ApiError(422, "bad_level", f"unknown {name} label {value!r}") from None

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "items": len(state.catalog)}

    @app.get("/api/search")
    async def search(
        q: str = "",
        topics: str = "",
        min_level: str = "",
        max_level: str = "",
        kind: str = "",
        limit: int = 20,
        offset: int = 0,
    ):
        if limit < 1 or limit > 100:
            raise ApiError(422, "bad_limit", "limit must be in 1..100")
        if offset < 0:
            raise ApiError(422, "bad_offset", "offset must be non-negative")
        lo = parse_level("min_level", min_level) if min_level else 0
        hi = parse_level("max_level", max_level) if max_level else len(scale) - 1
        if lo > hi:
            raise ApiError(422, "bad_level", "min_level is above max_level")
        levels = scale.labels[lo : hi + 1] if (min_level or max_level) else ()
        if kind and kind not in ("article", "video"):
            raise ApiError(422, "bad_kind", f"unknown kind {kind!r}")
        topic_filter = tuple(
            t for t in (normalize_topic(part) for part in topics.split(",")) if t
        )
        hits = state.catalog.search(
            Query(
                text=q,
                topics=topic_filter,
                levels=levels,
                kinds=(kind,) if kind else (),
                limit=limit,
                offset=offset,
            )
        )
        return {"items": [summarize_item(hit.item, hit.score) for hit in hits]}

    @app.get("/api/users/{user_id}/feed")
    async def feed(user_id: str, limit: int = 20):
        if limit < 1 or limit > 100:
            raise ApiError(422, "bad_limit", "limit must be in 1..100")
        profile = state.profiles.get(user_id)
        if profile is None:
            raise ApiError(404, "user_not_found", f"unknown user {user_id!r}")
        items = recommend(profile, state.catalog, limit, state.now(), state.rec_cfg)
        return {
            "items": [summarize_item(item) for item in items],
            "level_estimate": profile.level_estimate,
        }

    @app.get("/api/users/{user_id}/interests")
    async def get_interests(user_id: str):
        profile = state.profiles.get(user_id)
        if profile is None:
            raise ApiError(404, "user_not_found", f"unknown user {user_id!r}")
        return {
            "interests": sorted(profile.interests),
            "non_interests": sorted(profile.non_interests),
            "level_estimate": profile.level_estimate,
        }

    @app.put("/api/users/{user_id}/interests", status_code=204)
    async def put_interests(user_id: str, body: InterestsBody):
        interests = frozenset(normalize_topic(t) for t in body.interests) - {""}
        non_interests = frozenset(normalize_topic(t) for t in body.non_interests) - {""}
        if interests & non_interests:
            overlap = ", ".join(sorted(interests & non_interests))
            raise ApiError(409, "interests_overlap", f"topics in both lists: {overlap}")

        def apply(profile: LearnerProfile) -> LearnerProfile:
            return replace(profile, interests=interests, non_interests=non_interests)

        state.profiles.update(user_id, apply)
        return Response(status_code=204)

    @app.post("/api/users/{user_id}/feedback")
    async def feedback(user_id: str, body: FeedbackBody):
        if body.verdict not in VERDICTS:
            raise ApiError(
                422, "bad_verdict", f"verdict must be one of {', '.join(VERDICTS)}"
            )
        item = state.catalog.get(body.item_id)
        if item is None:
            raise ApiError(404, "item_not_found", f"unknown item {body.item_id!r}")
        if item.difficulty is None:
            raise ApiError(422, "item_not_scorable", "item has no difficulty annotation")
        idx = scale.index(item.difficulty.label)
        event = FeedbackEvent(
            item_id=item.id,
            verdict=body.verdict,
            item_difficulty_index=idx,
            timestamp=state.now(),
        )
        updated = state.profiles.update(
            user_id, lambda profile: apply_feedback(profile, event, state.rec_cfg)
        )
        return {"level_estimate": updated.level_estimate}

    @app.get("/api/items/{item_id}")
    async def get_item(item_id: str):
        item = state.catalog.get(item_id)
        if item is None:
            raise ApiError(404, "item_not_found", f"unknown item {item_id!r}")
        return item.to_dict()

    @app.post("/api/translate")
    async def translate(body: TranslateBody):
        text = body.text
        if not text.strip():
            raise ApiError(422, "bad_text", "text must be non-blank")
        if len(text) > MAX_TRANSLATE_CHARS:
            raise ApiError(
                422, "bad_text", f"text exceeds {MAX_TRANSLATE_CHARS} characters"
            )
        try:
            result = state.translate.translate(text, body.source_lang, body.target_lang)
        except TranslateError as exc:
            raise ApiError(502, "upstream_failed", f"translation failed: {exc}") from exc
        return {
            "translation": result["translation"],
            "pronunciation_url": result.get("pronunciation_url"),
        }

    return app


def run_service(config: ServiceConfig) -> None:
    """Blocking server loop; flushes stores on shutdown."""
    import uvicorn

    state = build_state(config)
    app = create_app(state)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((config.host, config.port))
    except OSError as exc:
        sock.close()
        state.catalog.close()
        state.profiles.close()
        raise RuntimeError(f"cannot bind {config.host}:{config.port}: {exc}") from exc
    sock.set_inheritable(True)
    uv_config = uvicorn.Config(app, host=config.host, port=config.port, log_level="warning")
    uvicorn.Server(uv_config).run(sockets=[sock])
