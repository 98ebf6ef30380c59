"""Difficulty classification head over frozen embeddings.

A single softmax layer maps an embedding to a distribution over the ordered
difficulty labels. Training minimizes mean cross-entropy plus an optional
proximal term ``lambda * ||theta - theta0||^2`` that pulls the parameters
back toward their initialization, so a head adapted to a small target set
stays close to the starting solution.

Everything downstream treats the label scale as ordered: index distance
between labels is meaningful and is what the evaluation module counts.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .embedding import (
    EmbeddingCache,
    EmbeddingVector,
    ProviderConfig,
    embed_batch,
)

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

CEFR_LABELS = ("A1", "A2", "B1", "B2", "C1", "C2")


class DegenerateTrainingSetError(ValueError):
    """Training set has fewer than two distinct labels."""


class InsufficientClassSupportError(ValueError):
    """Stratified split needs at least two items per label."""


@dataclass(frozen=True)
class DifficultyScale:
    """Ordered difficulty labels, easiest first."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(labels) < 2:
            raise ValueError("scale needs at least two labels")
        if len(set(labels)) != len(labels):
            raise ValueError("scale labels must be unique")
        if any(not lbl for lbl in labels):
            raise ValueError("scale labels must be non-empty")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"label {label!r} not in scale") from None


CEFR_SCALE = DifficultyScale(labels=CEFR_LABELS)


@dataclass(frozen=True)
class LabeledText:
    text: str
    label: str
    source_id: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("text must be non-blank")
        if not self.label:
            raise ValueError("label must be non-empty")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.5
    lambda_: float = 0.0
    seed: int = 0
    init_std: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be non-negative")
        if self.init_std < 0:
            raise ValueError("init_std must be non-negative")


@dataclass(frozen=True)
class HeadParams:
    """Softmax head parameters: weights (K, dim) and bias (K,)."""

    weights: np.ndarray
    bias: np.ndarray
    scale: DifficultyScale
    provider_id: str

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if weights.ndim != 2 or bias.ndim != 1:
            raise ValueError("weights must be 2-D and bias 1-D")
        k = len(self.scale)
        if weights.shape[0] != k or bias.shape[0] != k:
            raise ValueError("parameter rows must match scale size")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ValueError("parameters contain non-finite values")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stable under large logits."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _check_vector(params: HeadParams, vector: EmbeddingVector) -> None:
    if vector.provider_id != params.provider_id:
        raise ValueError(
            f"vector provider {vector.provider_id!r} does not match "
            f"model provider {params.provider_id!r}"
        )
    if vector.dim != params.dim:
        raise ValueError(f"vector dim {vector.dim} does not match model dim {params.dim}")


def predict(params: HeadParams, vector: EmbeddingVector) -> tuple[str, np.ndarray]:
    """Predicted label and the full probability vector for one embedding."""
    _check_vector(params, vector)
    probs = softmax(params.weights @ vector.values + params.bias)
    return params.scale.labels[int(np.argmax(probs))], probs


def predict_batch(params: HeadParams, vectors: list[EmbeddingVector]) -> tuple[list[str], np.ndarray]:
    if not vectors:
        raise ValueError("vectors must be non-empty")
    for vec in vectors:
        _check_vector(params, vec)
    x = np.stack([vec.values for vec in vectors])
    probs = softmax(x @ params.weights.T + params.bias)
    labels = [params.scale.labels[i] for i in np.argmax(probs, axis=1)]
    return labels, probs


def _cross_entropy(weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    logits = x @ weights.T + bias
    m = np.max(logits, axis=1)
    lse = m + np.log(np.sum(np.exp(logits - m[:, None]), axis=1))
    return float(np.mean(lse - logits[np.arange(y.shape[0]), y]))


def _proximal(weights, bias, weights0, bias0) -> float:
    dw = weights - weights0
    db = bias - bias0
    return float(np.sum(dw * dw) + np.sum(db * db))


def loss(
    params: HeadParams,
    x: np.ndarray,
    y_idx: np.ndarray,
    *,
    lambda_: float = 0.0,
    init_weights: np.ndarray | None = None,
    init_bias: np.ndarray | None = None,
) -> float:
    """Mean cross-entropy plus the proximal pull toward the init point."""
    value = _cross_entropy(params.weights, params.bias, x, y_idx)
    if lambda_ > 0.0:
        if init_weights is None or init_bias is None:
            raise ValueError("proximal term needs the initialization point")
        value += lambda_ * _proximal(params.weights, params.bias, init_weights, init_bias)
    return value


def _gradient_arrays(weights, bias, x, y, weights0, bias0, lambda_):
    n = x.shape[0]
    probs = softmax(x @ weights.T + bias)
    probs[np.arange(n), y] -= 1.0
    grad_w = probs.T @ x / n
    grad_b = np.mean(probs, axis=0)
    if lambda_ > 0.0:
        grad_w = grad_w + 2.0 * lambda_ * (weights - weights0)
        grad_b = grad_b + 2.0 * lambda_ * (bias - bias0)
    return grad_w, grad_b


def gradient(
    params: HeadParams,
    x: np.ndarray,
    y_idx: np.ndarray,
    *,
    lambda_: float = 0.0,
    init_weights: np.ndarray | None = None,
    init_bias: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of :func:`loss` w.r.t. weights and bias."""
    if lambda_ > 0.0 and (init_weights is None or init_bias is None):
        raise ValueError("proximal term needs the initialization point")
    w0 = params.weights if init_weights is None else init_weights
    b0 = params.bias if init_bias is None else init_bias
    return _gradient_arrays(params.weights, params.bias, x, y_idx, w0, b0, lambda_)


def train_on_embeddings(
    x: np.ndarray,
    y_idx: np.ndarray,
    scale: DifficultyScale,
    cfg: TrainConfig,
    provider_id: str,
    *,
    init: HeadParams | None = None,
) -> HeadParams:
    """Mini-batch gradient descent on pre-computed embeddings.

    With ``init`` given, training starts from those parameters and the
    proximal term (when ``cfg.lambda_ > 0``) anchors to them; otherwise the
    start point is drawn from ``N(0, init_std)`` under ``cfg.seed``.
    """
    x = np.asarray(x, dtype=np.float64)
    y_idx = np.asarray(y_idx, dtype=np.int64)
    if x.ndim != 2 or y_idx.ndim != 1 or x.shape[0] != y_idx.shape[0]:
        raise ValueError("x must be (n, dim) with one label index per row")
    if x.shape[0] == 0:
        raise ValueError("training set is empty")
    k = len(scale)
    if np.any(y_idx < 0) or np.any(y_idx >= k):
        raise ValueError("label index out of range for scale")
    if np.unique(y_idx).shape[0] < 2:
        raise DegenerateTrainingSetError("training set has fewer than two distinct labels")

    rng = np.random.default_rng(cfg.seed)
    if init is not None:
        if init.dim != x.shape[1] or len(init.scale) != k:
            raise ValueError("init parameters do not match data shape")
        weights = init.weights.copy()
        bias = init.bias.copy()
    else:
        weights = rng.normal(0.0, cfg.init_std, size=(k, x.shape[1]))
        bias = rng.normal(0.0, cfg.init_std, size=k)
    weights0 = weights.copy()
    bias0 = bias.copy()

    n = x.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            pick = order[start : start + cfg.batch_size]
            grad_w, grad_b = _gradient_arrays(
                weights, bias, x[pick], y_idx[pick], weights0, bias0, cfg.lambda_
            )
            weights -= cfg.learning_rate * grad_w
            bias -= cfg.learning_rate * grad_b
    return HeadParams(weights=weights, bias=bias, scale=scale, provider_id=provider_id)


def train(
    dataset: list[LabeledText],
    scale: DifficultyScale,
    cfg: TrainConfig,
    provider: ProviderConfig,
    *,
    cache: EmbeddingCache | None = None,
    transport=None,
    init: HeadParams | None = None,
) -> HeadParams:
    """Embed a labeled dataset and fit the softmax head on it."""
    if not dataset:
        raise ValueError("dataset is empty")
    y_idx = np.array([scale.index(item.label) for item in dataset], dtype=np.int64)
    vectors = embed_batch([item.text for item in dataset], provider, cache=cache, transport=transport)
    x = np.stack([vec.values for vec in vectors])
    return train_on_embeddings(x, y_idx, scale, cfg, provider.provider_id, init=init)


def train_test_split(
    dataset: list[LabeledText],
    test_ratio: float,
    seed: int,
    *,
    stratified: bool = True,
) -> tuple[list[LabeledText], list[LabeledText]]:
    """Deterministic split into (train, test).

    Stratified mode keeps per-label test proportions as close to
    ``test_ratio`` as integer counts allow (largest-remainder rounding) and
    requires at least two items per label.
    """
    if not 0.0 < test_ratio < 1.0:
        raise ValueError("test_ratio must be in (0, 1)")
    if not dataset:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(seed)
    n = len(dataset)

    if not stratified:
        order = rng.permutation(n)
        n_test = int(test_ratio * n + 0.5)
        test_ids = set(int(i) for i in order[:n_test])
    else:
        groups: dict[str, list[int]] = {}
        for i, item in enumerate(dataset):
            groups.setdefault(item.label, []).append(i)
        for label, members in groups.items():
            if len(members) < 2:
                raise InsufficientClassSupportError(
                    f"label {label!r} has fewer than two items"
                )
        n_test_total = int(test_ratio * n + 0.5)
        labels = sorted(groups)
        base = {lbl: int(test_ratio * len(groups[lbl])) for lbl in labels}
        remainder = {lbl: test_ratio * len(groups[lbl]) - base[lbl] for lbl in labels}
        leftover = n_test_total - sum(base.values())
        for lbl in sorted(labels, key=lambda l: (-remainder[l], l)):
            if leftover <= 0:
                break
            if base[lbl] + 1 <= len(groups[lbl]) - 1:
                base[lbl] += 1
                leftover -= 1
        test_ids = set()
        for lbl in labels:
            members = np.array(groups[lbl])
            order = rng.permutation(len(members))
            test_ids.update(int(members[i]) for i in order[: base[lbl]])

    train_split = [dataset[i] for i in range(n) if i not in test_ids]
    test_split = [dataset[i] for i in range(n) if i in test_ids]
    return train_split, test_split


def config_digest(cfg: TrainConfig) -> str:
    payload = json.dumps(asdict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def save_model(params: HeadParams, path: str | Path, *, train_config: TrainConfig | None = None) -> None:
    """Write the model as canonical JSON with base64 float64 parameter blobs.

    The write is canonical (sorted keys, fixed separators, trailing newline)
    so re-saving the same parameters produces a byte-identical file.
    """
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "scale": list(params.scale.labels),
        "provider_id": params.provider_id,
        "dim": params.dim,
        "weights": base64.b64encode(params.weights.astype("<f8").tobytes()).decode("ascii"),
        "bias": base64.b64encode(params.bias.astype("<f8").tobytes()).decode("ascii"),
        "train_config_digest": config_digest(train_config) if train_config else "",
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_model(path: str | Path) -> HeadParams:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {version!r}")
    scale = DifficultyScale(labels=tuple(payload["scale"]))
    dim = int(payload["dim"])
    weights = np.frombuffer(base64.b64decode(payload["weights"]), dtype="<f8").reshape(
        len(scale), dim
    )
    bias = np.frombuffer(base64.b64decode(payload["bias"]), dtype="<f8")
    return HeadParams(
        weights=weights.copy(),
        bias=bias.copy(),
        scale=scale,
        provider_id=payload["provider_id"],
    )


def load_dataset(path: str | Path) -> list[LabeledText]:
    """Read a JSONL dataset: one {"text", "label", "source_id"?} per line."""
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON") from exc
            if not isinstance(row, dict) or "text" not in row or "label" not in row:
                raise ValueError(f"{path}:{lineno}: expected text and label fields")
            items.append(
                LabeledText(
                    text=row["text"],
                    label=row["label"],
                    source_id=str(row.get("source_id", "")),
                )
            )
    if not items:
        raise ValueError(f"{path}: dataset is empty")
    return items


def save_dataset(items: list[LabeledText], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(
                json.dumps(
                    {"text": item.text, "label": item.label, "source_id": item.source_id},
                    sort_keys=True,
                    separators=(",", ":"),
                )
                + "\n"
            )
