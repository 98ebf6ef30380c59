"""Operator command line: train, eval, crawl, serve, score.

Every subcommand exits 0 on success; failures print one ``error: ...``
line on stderr and exit nonzero. All randomness flows from ``--seed``,
which defaults to a fixed constant, never the clock.
"""

from __future__ import annotations

import functools
import json
import logging
import signal
import sys
import threading
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from .catalog import CatalogStore, DifficultyAnnotation
from .classifier import (
    DifficultyScale,
    TrainConfig,
    load_dataset,
    load_model,
    loss,
    predict,
    save_model,
    train_on_embeddings,
    train_test_split,
)
from .embedding import (
    LOCAL_PROVIDER_ID,
    EmbeddingCache,
    EmbeddingClient,
    ProviderConfig,
)
from .evaluation import (
    confusion_heatmap_svg,
    evaluate,
    pairwise_mismatches_scores,
    render_report,
)
from .ingestion import (
    Annotators,
    PollScheduler,
    RetryQueue,
    SeenStore,
    crawl_once,
    http_fetch_factory,
    load_feeds_config,
)
from .readability import InsufficientTextError, score_all
from .service import load_service_config, run_service
from .topics import ZeroShotClient, classify_topics, load_lexicon

logger = logging.getLogger(__name__)

DEFAULT_SEED = 1234


def _fail_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ValueError, RuntimeError, OSError) as exc:
            raise SystemExit(f"error: {exc}") from exc

    return wrapper


def _parse_scale(labels: str) -> DifficultyScale:
    return DifficultyScale(labels=tuple(part.strip() for part in labels.split(",") if part.strip()))


def _provider_config(provider_id: str, endpoint: str, dim: int) -> ProviderConfig:
    return ProviderConfig(
        provider_id=provider_id,
        endpoint=endpoint or LOCAL_PROVIDER_ID,
        dim=dim,
    )


@click.group()
def main() -> None:
    """Language-learning content platform operations."""
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command("train")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--scale", "scale_labels", required=True, help="Comma-separated ordered labels.")
@click.option("--provider", "provider_id", default=LOCAL_PROVIDER_ID, show_default=True)
@click.option("--endpoint", default="", help="Embedding endpoint URL; empty uses the local provider.")
@click.option("--dim", default=256, show_default=True)
@click.option("--epochs", default=30, show_default=True)
@click.option("--lr", "learning_rate", default=0.5, show_default=True)
@click.option("--lambda", "lambda_", default=0.0, show_default=True, help="Proximal pull toward the initialization.")
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--init-std", default=0.0, show_default=True)
@click.option("--cache-dir", default="", help="Embedding cache directory (remote providers only).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_fail_cleanly
def train_cmd(
    dataset_path, scale_labels, provider_id, endpoint, dim, epochs,
    learning_rate, lambda_, seed, batch_size, init_std, cache_dir, out_path,
):
    """Fit a difficulty model on a labeled JSONL dataset."""
    scale = _parse_scale(scale_labels)
    dataset = load_dataset(dataset_path)
    cfg = TrainConfig(
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        lambda_=lambda_,
        seed=seed,
        init_std=init_std,
    )
    provider = _provider_config(provider_id, endpoint, dim)
    cache = EmbeddingCache(cache_dir) if cache_dir and not provider.is_local else None
    y_idx = np.array([scale.index(item.label) for item in dataset], dtype=np.int64)
    with EmbeddingClient(provider, cache=cache) as client:
        vectors = client.embed_batch([item.text for item in dataset])
    x = np.stack([vec.values for vec in vectors])
    params = train_on_embeddings(x, y_idx, scale, cfg, provider.provider_id)
    save_model(params, out_path, train_config=cfg)
    final = loss(params, x, y_idx)
    click.echo(f"final train loss: {final:.6f}")
    click.echo(f"model written to {out_path}")


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--split", default=0.2, show_default=True, help="Held-out fraction.")
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--compare-readability", is_flag=True, help="Also count readability-formula mismatches.")
@click.option("--endpoint", default="", help="Embedding endpoint URL; empty uses the local provider.")
@click.option("--stratified/--no-stratified", default=True, show_default=True)
@click.option("--cache-dir", default="", help="Embedding cache directory (remote providers only).")
@_fail_cleanly
def eval_cmd(
    model_path, dataset_path, split, seed, report_path,
    compare_readability, endpoint, stratified, cache_dir,
):
    """Evaluate a model on the held-out part of a dataset.

    Writes three artifacts next to --report: the JSON report, the
    fixed-width tables (.txt), and the confusion heatmap (.svg).
    """
    params = load_model(model_path)
    dataset = load_dataset(dataset_path)
    _, test_set = train_test_split(dataset, split, seed, stratified=stratified)
    if not test_set:
        raise ValueError("test split is empty")
    provider = _provider_config(params.provider_id, endpoint, params.dim)
    cache = EmbeddingCache(cache_dir) if cache_dir and not provider.is_local else None
    with EmbeddingClient(provider, cache=cache) as client:
        vectors = client.embed_batch([item.text for item in test_set])
    predictions = [predict(params, vec)[0] for vec in vectors]
    true_labels = [item.label for item in test_set]
    report = evaluate(true_labels, predictions, params.scale)

    extra = {}
    if compare_readability:
        true_idx = np.array([params.scale.index(lbl) for lbl in true_labels], dtype=np.int64)
        scores = {"GFI": [], "ARI": [], "FKGL": []}
        for item in test_set:
            scored = score_all(item.text)
            scores["GFI"].append(scored.gfi)
            scores["ARI"].append(scored.ari)
            scores["FKGL"].append(scored.fkgl)
        extra = {
            name: int(pairwise_mismatches_scores(true_idx, np.array(values)))
            for name, values in scores.items()
        }

    base = Path(report_path)
    if base.suffix == ".json":
        base = base.with_suffix("")
    payload = report.to_dict()
    if extra:
        payload["readability_mismatches"] = extra
    json_path = base.with_suffix(".json")
    json_path.write_text(
        json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )
    tables = render_report(report, extra_mismatches=extra or None)
    base.with_suffix(".txt").write_text(tables, encoding="utf-8")
    base.with_suffix(".svg").write_text(
        confusion_heatmap_svg(np.array(report.confusion), report.scale), encoding="utf-8"
    )
    click.echo(tables.rstrip("\n"))
    click.echo(f"accuracy: {report.accuracy:.4f} (baseline {report.baseline:.4f})")
    click.echo(f"report written to {json_path}")


def _build_annotators(config, data_dir: Path):
    difficulty_fn = None
    client = None
    if config.model_path:
        params = load_model(config.model_path)
        provider_raw = dict(config.provider)
        provider_raw.setdefault("provider_id", params.provider_id)
        provider_raw.setdefault("dim", params.dim)
        provider = ProviderConfig(**provider_raw)
        cache = None
        if not provider.is_local:
            cache = EmbeddingCache(str(data_dir / "embed-cache"))
        client = EmbeddingClient(provider, cache=cache)

        def difficulty_fn(text: str) -> DifficultyAnnotation:
            vector = client.embed_batch([text])[0]
            label, probs = predict(params, vector)
            return DifficultyAnnotation(label=label, probs=tuple(float(p) for p in probs))

    topics_fn = None
    topics_cfg = config.topics
    candidates = list(topics_cfg.get("candidates", ()))
    if candidates:
        zero_shot = (
            ZeroShotClient(topics_cfg["endpoint"]) if topics_cfg.get("endpoint") else None
        )
        lexicon = (
            load_lexicon(topics_cfg["lexicon_path"]) if topics_cfg.get("lexicon_path") else None
        )
        threshold = float(topics_cfg.get("threshold", 0.5))
        if zero_shot is not None or lexicon is not None:

            def topics_fn(text: str):
                return classify_topics(
                    text, candidates, client=zero_shot, lexicon=lexicon, threshold=threshold
                )

    return Annotators(difficulty=difficulty_fn, topics=topics_fn), client


def _print_crawl_report(report) -> None:
    for source_id, counts in sorted(report.per_source.items()):
        rejected = " ".join(
            f"rejected[{reason}]={count}"
            for reason, count in sorted(counts["rejected"].items())
        )
        line = (
            f"{source_id}: entries={counts['entries_seen']} "
            f"admitted={counts['admitted']}"
        )
        click.echo(line + (f" {rejected}" if rejected else ""))
    click.echo(
        f"total: entries={report.entries_seen} admitted={report.admitted} "
        f"fetch_errors={report.fetch_errors} parse_errors={report.parse_errors}"
    )


@main.command("crawl")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data-dir", required=True, type=click.Path(file_okay=False))
@click.option("--once", is_flag=True, help="Run a single pass instead of polling forever.")
@_fail_cleanly
def crawl_cmd(config_path, data_dir, once):
    """Poll the configured feeds and ingest admissible entries."""
    config = load_feeds_config(config_path)
    data_path = Path(data_dir)
    data_path.mkdir(parents=True, exist_ok=True)
    scale = DifficultyScale(labels=config.scale_labels)
    annotators, embed_client = _build_annotators(config, data_path)
    fetch = http_fetch_factory(user_agent=config.user_agent)
    store = CatalogStore(data_path, scale)
    seen = SeenStore(data_path / "seen.txt")
    retry = RetryQueue(data_path / "retry.jsonl")
    try:
        if once:
            report = crawl_once(
                list(config.sources), config.policy, store, seen, retry,
                fetch=fetch, annotators=annotators,
            )
            _print_crawl_report(report)
            return
        stop = threading.Event()

        def request_stop(signum, frame):
            stop.set()

        signal.signal(signal.SIGTERM, request_stop)
        signal.signal(signal.SIGINT, request_stop)
        scheduler = PollScheduler(list(config.sources))
        while not stop.is_set():
            now = datetime.now(timezone.utc)
            for source in scheduler.due(now):
                report = crawl_once(
                    [source], config.policy, store, seen, retry,
                    fetch=fetch, annotators=annotators,
                )
                _print_crawl_report(report)
                scheduler.mark_polled(source, now)
            stop.wait(1.0)
    finally:
        store.close()
        seen.close()
        retry.close()
        if embed_client is not None:
            embed_client.close()


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@_fail_cleanly
def serve_cmd(config_path):
    """Run the HTTP service until terminated."""
    config = load_service_config(config_path)
    run_service(config)


@main.command("score")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--text", default=None, help="Text to score; mutually exclusive with --file.")
@click.option("--file", "file_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--endpoint", default="", help="Embedding endpoint URL; empty uses the local provider.")
@_fail_cleanly
def score_cmd(model_path, text, file_path, endpoint):
    """Print the difficulty prediction and readability scores for a text."""
    if (text is None) == (file_path is None):
        raise ValueError("provide exactly one of --text or --file")
    if file_path is not None:
        text = Path(file_path).read_text(encoding="utf-8")
    if not text.strip():
        raise ValueError("text is empty")
    params = load_model(model_path)
    provider = _provider_config(params.provider_id, endpoint, params.dim)
    with EmbeddingClient(provider) as client:
        vector = client.embed_batch([text])[0]
    label, probs = predict(params, vector)
    click.echo(f"label: {label}")
    click.echo(
        "probs: " + " ".join(f"{lbl}={p:.6f}" for lbl, p in zip(params.scale.labels, probs))
    )
    try:
        scores = score_all(text)
        click.echo(f"gfi: {scores.gfi:.4f}")
        click.echo(f"ari: {scores.ari:.4f}")
        click.echo(f"fkgl: {scores.fkgl:.4f}")
    except InsufficientTextError:
        click.echo("readability: not enough text")


if __name__ == "__main__":
    main()
