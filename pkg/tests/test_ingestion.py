"""Feed parsing, captions, admission rules, and the crawl loop."""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from linguafeed.catalog import KIND_VIDEO, CatalogStore
from linguafeed.classifier import CEFR_SCALE
from linguafeed.ingestion import (
    REJECT_CAPTIONS_UNAVAILABLE,
    REJECT_DUPLICATE,
    REJECT_LANGUAGE,
    REJECT_PAYWALLED,
    REJECT_STALE,
    REJECT_TOO_SHORT,
    Annotators,
    CaptionParseError,
    CrawlPolicy,
    FeedParseError,
    FeedSource,
    FeedsConfig,
    FetchError,
    PollScheduler,
    RetryQueue,
    SeenStore,
    count_words,
    crawl_once,
    entry_text,
    item_id_for,
    load_feeds_config,
    parse_captions,
    parse_feed,
)

FIXTURES = Path(__file__).parent / "fixtures"
NOW = datetime(2024, 8, 11, 12, 0, tzinfo=timezone.utc)

GAZETTE = FeedSource(
    url="https://presse.example/flux.xml",
    kind="article_feed",
    language="fr",
    source_id="src-gazette",
)

POLICY = CrawlPolicy(min_words=40, paywall_markers=("abonnés seulement",))


def fixture_bytes(name: str) -> bytes:
    return (FIXTURES / name).read_bytes()


def dict_fetch(table: dict[str, bytes]):
    calls = []

    def fetch(url: str) -> bytes:
        calls.append(url)
        if url not in table:
            raise FetchError(f"no route for {url}")
        return table[url]

    return fetch, calls


def crawl_env(tmp_path):
    store = CatalogStore(tmp_path / "catalog", CEFR_SCALE)
    seen = SeenStore(tmp_path / "seen.txt")
    retry = RetryQueue(tmp_path / "retry.jsonl")
    return store, seen, retry


class TestParseRss:
    def test_fixture_entries(self):
        entries = parse_feed(fixture_bytes("feed_articles.xml"), GAZETTE)
        assert len(entries) == 8
        first = entries[0]
        assert first.guid == "https://presse.example/articles/boulangerie"
        assert first.title == "La boulangerie du quartier rouvre ses portes"
        assert first.tags == ("vie quotidienne",)
        assert first.published_at == datetime(2024, 8, 9, 6, 30, tzinfo=timezone.utc)
        assert first.body.startswith("La boulangerie du quartier a rouvert")

    def test_video_enclosure_sets_kind_and_captions(self):
        entries = parse_feed(fixture_bytes("feed_articles.xml"), GAZETTE)
        video = next(e for e in entries if "gorges" in e.guid)
        assert video.kind == KIND_VIDEO
        assert video.captions_url == "https://video.example/gorges.vtt"

    def test_malformed_xml_raises(self):
        with pytest.raises(FeedParseError):
            parse_feed(b"<rss><channel>", GAZETTE)

    def test_unrecognized_root_raises(self):
        with pytest.raises(FeedParseError):
            parse_feed(b"<opml/>", GAZETTE)

    def test_item_without_title_skipped(self):
        data = (
            b'<rss version="2.0"><channel>'
            b"<item><guid>g1</guid></item>"
            b"<item><guid>g2</guid><title>Bon titre</title></item>"
            b"</channel></rss>"
        )
        entries = parse_feed(data, GAZETTE)
        assert [e.guid for e in entries] == ["g2"]


class TestParseAtom:
    def test_fixture_entries(self):
        source = FeedSource(
            url="https://video.example/feed", kind="video_feed", source_id="src-docu"
        )
        entries = parse_feed(fixture_bytes("feed_atom.xml"), source)
        assert len(entries) == 2
        foret, volcans = entries
        assert foret.kind == KIND_VIDEO
        assert foret.captions_url == "https://video.example/episodes/foret.vtt"
        assert foret.tags == ("nature", "voyage")
        assert foret.published_at == datetime(2024, 8, 9, 9, 0, tzinfo=timezone.utc)
        # Falls back to <updated> when <published> is absent.
        assert volcans.published_at == datetime(2024, 8, 8, 18, 30, tzinfo=timezone.utc)
        assert volcans.body.startswith("Le documentaire explore")


class TestParseCaptions:
    def test_fixture_cues(self):
        cues = parse_captions((FIXTURES / "captions_gorges.vtt").read_text())
        assert len(cues) == 6
        assert cues[0].start == 0.0
        assert cues[0].end == 4.0
        assert cues[0].text == "Bienvenue dans les gorges pour une descente en canoë."
        # Cue settings after the timestamps are tolerated.
        assert cues[2].text == "Nous passons sous le vieux pont de pierre."
        # A cue without an id line still parses.
        assert cues[4].start == 16.25

    def test_hours_component_optional(self):
        cues = parse_captions(
            "WEBVTT\n\n01:02:03.500 --> 01:02:05.000\nbonjour\n"
        )
        assert cues[0].start == pytest.approx(3723.5)

    def test_comma_separator_accepted(self):
        cues = parse_captions("WEBVTT\n\n00:01,000 --> 00:02,000\nsalut\n")
        assert cues[0].start == pytest.approx(1.0)

    def test_end_before_start_raises(self):
        with pytest.raises(CaptionParseError):
            parse_captions("WEBVTT\n\n00:05.000 --> 00:04.000\nmauvais\n")

    def test_garbage_raises(self):
        with pytest.raises(CaptionParseError):
            parse_captions("pas des sous-titres du tout")


class TestSmallHelpers:
    def test_count_words(self):
        assert count_words("Le chat dort.") == 3
        assert count_words("") == 0

    def test_entry_text_prefers_body_then_cues(self):
        entries = parse_feed(fixture_bytes("feed_articles.xml"), GAZETTE)
        article = entries[0]
        assert entry_text(article) == article.body
        video = next(e for e in entries if "gorges" in e.guid)
        cues = parse_captions((FIXTURES / "captions_gorges.vtt").read_text())
        assert "canoë" in entry_text(video, cues)
        assert entry_text(video) == video.description

    def test_item_id_is_stable_digest(self):
        a = item_id_for("https://presse.example/articles/boulangerie")
        b = item_id_for("https://presse.example/articles/boulangerie")
        assert a == b
        assert a.startswith("itm-")
        assert a != item_id_for("autre-guid")


class TestSeenStore:
    def test_persists_across_reopen(self, tmp_path):
        path = tmp_path / "seen.txt"
        store = SeenStore(path)
        store.add("guid-1")
        store.close()
        again = SeenStore(path)
        assert "guid-1" in again
        assert "guid-2" not in again
        assert len(again) == 1
        again.close()


class TestRetryQueue:
    def test_push_resolve(self, tmp_path):
        queue = RetryQueue(tmp_path / "retry.jsonl")
        queue.push("https://x.example/a", {"kind": "feed"})
        assert len(queue) == 1
        queue.resolve("https://x.example/a")
        assert len(queue) == 0
        queue.close()

    def test_drops_after_max_attempts(self, tmp_path, caplog):
        queue = RetryQueue(tmp_path / "retry.jsonl", max_attempts=3)
        for _ in range(3):
            queue.push("https://x.example/a", {"kind": "feed"})
        assert len(queue) == 0
        queue.close()

    def test_journal_replayed_on_reopen(self, tmp_path):
        path = tmp_path / "retry.jsonl"
        queue = RetryQueue(path)
        queue.push("https://x.example/a", {"kind": "feed"})
        queue.close()
        again = RetryQueue(path)
        assert len(again) == 1
        assert again.pending()[0]["url"] == "https://x.example/a"
        again.close()


class TestCrawlOnce:
    def crawl(self, tmp_path, table=None, sources=None, policy=POLICY, now=NOW):
        store, seen, retry = crawl_env(tmp_path)
        if table is None:
            table = {
                GAZETTE.url: fixture_bytes("feed_articles.xml"),
                "https://video.example/gorges.vtt": fixture_bytes(
                    "captions_gorges.vtt"
                ),
            }
        fetch, calls = dict_fetch(table)
        report = crawl_once(
            sources or [GAZETTE], policy, store, seen, retry, fetch=fetch, now=now
        )
        return store, seen, retry, report, calls

    def test_admissions_and_rejections(self, tmp_path):
        store, seen, retry, report, _ = self.crawl(tmp_path)
        assert report.entries_seen == 8
        assert report.admitted == 5
        assert report.rejected == {
            REJECT_PAYWALLED: 1,
            REJECT_TOO_SHORT: 1,
            REJECT_DUPLICATE: 1,
        }
        assert len(store) == 5
        assert len(retry) == 0
        store.close(), seen.close(), retry.close()

    def test_video_item_carries_cues(self, tmp_path):
        store, seen, retry, _, _ = self.crawl(tmp_path)
        video = store.get(item_id_for("https://video.example/gorges"))
        assert video.kind == KIND_VIDEO
        assert len(video.cues) == 6
        assert video.body == ""
        store.close(), seen.close(), retry.close()

    def test_pretagged_topics_attached(self, tmp_path):
        store, seen, retry, _, _ = self.crawl(tmp_path)
        item = store.get(item_id_for("https://presse.example/articles/match"))
        assert item.accepted_topics() == ("sport",)
        store.close(), seen.close(), retry.close()

    def test_readability_attached(self, tmp_path):
        store, seen, retry, _, _ = self.crawl(tmp_path)
        item = store.get(item_id_for("https://presse.example/articles/marche"))
        assert item.readability is not None
        assert item.readability.stats.n_words > 40
        store.close(), seen.close(), retry.close()

    def test_second_crawl_rejects_everything_as_duplicate(self, tmp_path):
        store, seen, retry = crawl_env(tmp_path)
        table = {
            GAZETTE.url: fixture_bytes("feed_articles.xml"),
            "https://video.example/gorges.vtt": fixture_bytes("captions_gorges.vtt"),
        }
        fetch, calls = dict_fetch(table)
        crawl_once([GAZETTE], POLICY, store, seen, retry, fetch=fetch, now=NOW)
        second = crawl_once([GAZETTE], POLICY, store, seen, retry, fetch=fetch, now=NOW)
        assert second.admitted == 0
        assert second.rejected[REJECT_DUPLICATE] == 6
        # Captions of already-seen guids are not refetched.
        assert calls.count("https://video.example/gorges.vtt") == 1
        store.close(), seen.close(), retry.close()

    def test_report_per_source(self, tmp_path):
        store, seen, retry, report, _ = self.crawl(tmp_path)
        per = report.to_dict()["per_source"]["src-gazette"]
        assert per["entries_seen"] == 8
        assert per["admitted"] == 5
        assert per["rejected"][REJECT_PAYWALLED] == 1
        store.close(), seen.close(), retry.close()

    def test_feed_fetch_failure_queued_for_retry(self, tmp_path):
        store, seen, retry, report, _ = self.crawl(tmp_path, table={})
        assert report.fetch_errors == 1
        assert report.admitted == 0
        assert len(retry) == 1
        assert retry.pending()[0]["url"] == GAZETTE.url
        store.close(), seen.close(), retry.close()

    def test_feed_parse_failure_not_retried(self, tmp_path):
        store, seen, retry, report, _ = self.crawl(
            tmp_path, table={GAZETTE.url: b"<rss><channel>"}
        )
        assert report.parse_errors == 1
        assert len(retry) == 0
        store.close(), seen.close(), retry.close()

    def test_missing_captions_rejected_and_queued(self, tmp_path):
        table = {GAZETTE.url: fixture_bytes("feed_articles.xml")}
        store, seen, retry, report, _ = self.crawl(tmp_path, table=table)
        assert report.rejected[REJECT_CAPTIONS_UNAVAILABLE] == 1
        assert report.admitted == 4
        # The video guid stays unseen so a later pass reconsiders it.
        assert "https://video.example/gorges" not in seen
        assert retry.pending()[0]["url"] == "https://video.example/gorges.vtt"
        store.close(), seen.close(), retry.close()

    def test_corrupt_captions_rejected_without_retry(self, tmp_path):
        table = {
            GAZETTE.url: fixture_bytes("feed_articles.xml"),
            "https://video.example/gorges.vtt": b"pas du webvtt",
        }
        store, seen, retry, report, _ = self.crawl(tmp_path, table=table)
        assert report.rejected[REJECT_CAPTIONS_UNAVAILABLE] == 1
        assert report.parse_errors == 1
        assert len(retry) == 0
        store.close(), seen.close(), retry.close()

    def test_language_filter(self, tmp_path):
        data = (
            '<rss version="2.0"><channel><item>'
            "<title>English piece</title>"
            "<guid>g-en</guid><link>https://x.example/en</link>"
            "<language>en</language>"
            "<description>" + "word " * 50 + "</description>"
            "</item></channel></rss>"
        ).encode()
        policy = CrawlPolicy(min_words=10, allowed_languages=("fr",))
        store, seen, retry, report, _ = self.crawl(
            tmp_path, table={GAZETTE.url: data}, policy=policy
        )
        assert report.rejected == {REJECT_LANGUAGE: 1}
        store.close(), seen.close(), retry.close()

    def test_stale_filter(self, tmp_path):
        policy = CrawlPolicy(
            min_words=40, paywall_markers=("abonnés seulement",), max_age_days=2
        )
        late = datetime(2024, 8, 20, tzinfo=timezone.utc)
        store, seen, retry, report, _ = self.crawl(tmp_path, policy=policy, now=late)
        assert report.admitted == 0
        assert report.rejected[REJECT_STALE] >= 5
        store.close(), seen.close(), retry.close()

    def test_disabled_source_skipped(self, tmp_path):
        disabled = FeedSource(
            url=GAZETTE.url, kind="article_feed", source_id="src-off", enabled=False
        )
        store, seen, retry, report, calls = self.crawl(tmp_path, sources=[disabled])
        assert report.sources_polled == 0
        assert calls == []
        store.close(), seen.close(), retry.close()


class TestPollScheduler:
    def test_new_source_due_immediately(self):
        sched = PollScheduler([GAZETTE])
        assert sched.due(NOW) == [GAZETTE]

    def test_not_due_until_interval_elapses(self):
        sched = PollScheduler([GAZETTE])
        sched.mark_polled(GAZETTE, NOW)
        assert sched.due(NOW + timedelta(minutes=5)) == []
        assert sched.due(NOW + timedelta(minutes=30)) == [GAZETTE]

    def test_next_wakeup(self):
        sched = PollScheduler([GAZETTE])
        sched.mark_polled(GAZETTE, NOW)
        assert sched.next_wakeup(NOW) == NOW + timedelta(minutes=30)


class TestFeedsConfig:
    def test_load(self, tmp_path):
        payload = {
            "data_dir": str(tmp_path / "data"),
            "scale": ["A1", "A2", "B1", "B2", "C1", "C2"],
            "sources": [
                {"url": "https://presse.example/flux.xml", "kind": "article_feed"}
            ],
            "policy": {"min_words": 40, "paywall_markers": ["abonnés seulement"]},
        }
        path = tmp_path / "feeds.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        config = load_feeds_config(path)
        assert isinstance(config, FeedsConfig)
        assert config.policy.min_words == 40
        assert config.sources[0].url == "https://presse.example/flux.xml"
        assert config.scale_labels == ("A1", "A2", "B1", "B2", "C1", "C2")

    def test_missing_required_field(self, tmp_path):
        path = tmp_path / "feeds.json"
        path.write_text('{"data_dir": "/tmp/x"}', encoding="utf-8")
        with pytest.raises(ValueError):
            load_feeds_config(path)
