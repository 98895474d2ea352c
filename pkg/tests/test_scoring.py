import itertools
import json
import logging
from pathlib import Path

import pytest

from feedlab.domain import AapaScore, Post
from feedlab.errors import EmptyBatch
from feedlab.scoring import (FACTOR_DEFINITIONS, DelayedBackend, FactorPrompt, LexiconOracle, ScoreCache,
                             ScoringDiagnostics, build_factor_prompt, chunk_messages, content_hash, is_aapa,
                             is_political, parse_factor_response, political_fraction, qualifies, score_posts)
from feedlab.scoring.prompts import parse_prompt

FIXTURES = Path(__file__).parent / "fixtures"

POLITICAL_TEMPLATES = [
    "The senator says the tax bill will pass {i}",
    "Voters line up early at the polls, day {i}",
    "Congress debates immigration again, round {i}",
]


def labeled():
    with open(FIXTURES / "labeled_posts.jsonl", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh]


def political_posts(n, extra=""):
    return [Post(f"p{i}", "a", POLITICAL_TEMPLATES[i % 3].format(i=i) + extra) for i in range(n)]


class TestOracleFixture:
    @pytest.mark.parametrize("row", labeled(), ids=lambda r: r["post"]["post_id"])
    def test_matches_hand_labels(self, row):
        oracle = LexiconOracle()
        scores = score_posts([Post.from_dict(row["post"])], oracle)
        s = scores[row["post"]["post_id"]]
        assert s.is_political == row["political"]
        assert list(s.factors) == row["factors"]

    def test_fixture_size_and_variety(self):
        rows = labeled()
        assert len(rows) >= 50
        counts = {sum(r["factors"]) for r in rows}
        assert {0, 1, 3, 4, 5, 6, 8} <= counts

    def test_examples(self):
        o = LexiconOracle()
        assert is_political("The senator's new voting bill is a disgrace", o)
        assert not is_political("My cat sleeps 16 hours a day", o)
        assert not is_political("", o)

    def test_bit_reproducible(self):
        texts = [Post.from_dict(r["post"]) for r in labeled()]
        a = score_posts(texts, LexiconOracle())
        b = score_posts(texts, LexiconOracle())
        assert a == b


class TestScreening:
    def test_180_post_fixture(self):
        with open(FIXTURES / "screening_180.jsonl", encoding="utf-8") as fh:
            posts = [Post.from_dict(json.loads(line)) for line in fh]
        assert len(posts) == 180
        frac = political_fraction(posts, LexiconOracle())
        assert frac == pytest.approx(0.05)
        assert qualifies(frac)

    def test_none_and_all(self):
        o = LexiconOracle()
        benign = [Post(f"b{i}", "a", f"Lunch was great today #{i}") for i in range(100)]
        assert political_fraction(benign, o) == 0.0
        assert not qualifies(0.0)
        assert political_fraction(political_posts(20), o) == 1.0

    def test_ads_excluded(self):
        o = LexiconOracle()
        posts = political_posts(1) + [Post("ad", "brand", "Vote for our new pizza", is_ad=True),
                                      Post("b", "a", "Nice weather")]
        assert political_fraction(posts, o) == 0.5
        with pytest.raises(EmptyBatch):
            political_fraction([Post("ad", "brand", "x", is_ad=True)], o)


class TestChunking:
    def test_sizes(self):
        assert [len(c) for c in chunk_messages(list(range(23)))] == [10, 10, 3]
        assert [len(c) for c in chunk_messages(list(range(10)))] == [10]
        assert chunk_messages([]) == []

    def test_order_preserving(self):
        items = list(range(37))
        assert list(itertools.chain.from_iterable(chunk_messages(items))) == items


class TestPrompts:
    def test_v1_opening(self):
        p = build_factor_prompt(0, [("a", "hi")])
        assert p.startswith("Do the following messages express partisan animosity?")

    def test_json_lines(self):
        p = build_factor_prompt(5, [("a", "one"), ("b", "two")])
        body = p.split("INPUT MESSAGES:")[1].strip().splitlines()
        assert [json.loads(line) for line in body] == [{"id": "a", "message": "one"}, {"id": "b", "message": "two"}]

    def test_definition_present(self):
        for f, definition in enumerate(FACTOR_DEFINITIONS):
            assert definition in build_factor_prompt(f, [("a", "x")])
        assert "distrust of people in general" in build_factor_prompt(5, [("a", "x")])

    def test_round_trip(self):
        msgs = [("m0", 'quote " and \\ slash'), ("m1", "ünïcode")]
        for f in range(8):
            assert parse_prompt(build_factor_prompt(f, msgs)) == (f, msgs)

    def test_prompt_type_bounds(self):
        with pytest.raises(ValueError):
            FactorPrompt(0, ())
        with pytest.raises(ValueError):
            FactorPrompt(0, tuple((str(i), "x") for i in range(11)))
        assert FactorPrompt(2, (("a", "x"),)).render() == build_factor_prompt(2, [("a", "x")])


class TestParseResponse:
    def test_yes(self):
        assert parse_factor_response('[{"id":"a","answer":"YES"}]', ["a"]) == {"a": True}

    def test_garbage_degrades_and_logs(self, caplog):
        events = []
        with caplog.at_level(logging.WARNING, logger="feedlab.scoring"):
            out = parse_factor_response("I cannot help with that", ["a", "b"], events)
        assert out == {"a": False, "b": False}
        assert events and events[0]["event"] == "DegradedParse"
        assert "DegradedParse" in caplog.text

    def test_empty(self):
        assert parse_factor_response("[]", []) == {}

    def test_missing_and_malformed_ids(self):
        events = []
        out = parse_factor_response('[{"id":"a","answer":"maybe"},{"id":"zz","answer":"YES"}]', ["a", "b"], events)
        assert out == {"a": False, "b": False}
        assert set(events[0]["ids"]) == {"a", "b"}

    def test_surrounding_prose(self):
        raw = 'Sure! [{"id": "x", "answer": "yes"}, {"id": "y", "answer": "NO"}] hope that helps'
        assert parse_factor_response(raw, ["x", "y"]) == {"x": True, "y": False}


class TestScorePosts:
    def test_ten_political_posts_eight_requests(self):
        o = LexiconOracle()
        diag = ScoringDiagnostics()
        score_posts(political_posts(10), o, ScoreCache(), diagnostics=diag)
        assert o.requests == 8 and diag.requests == 8

    def test_warm_cache_no_requests(self):
        o, cache = LexiconOracle(), ScoreCache()
        posts = political_posts(10)
        first = score_posts(posts, o, cache)
        before = o.requests
        second = score_posts(posts, o, cache)
        assert o.requests == before
        assert first == second

    @pytest.mark.parametrize("n", [1, 9, 10, 11, 25])
    def test_request_bound(self, n):
        o = LexiconOracle()
        score_posts(political_posts(n), o)
        assert o.requests == 8 * -(-n // 10)

    def test_non_political_never_sent(self):
        o = LexiconOracle()
        s = score_posts([Post("b", "a", "Trust no one at the car lot")], o)
        assert o.requests == 0
        assert s["b"] == AapaScore.non_political()

    def test_ads_skipped(self):
        o = LexiconOracle()
        assert score_posts([Post("ad", "x", "Vote in the senate election", is_ad=True)], o) == {}

    def test_duplicate_texts_scored_once(self):
        o = LexiconOracle()
        posts = [Post(f"p{i}", "a", "Senate vote today") for i in range(5)]
        s = score_posts(posts, o)
        assert o.requests == 8 and len(s) == 5

    def test_timeout_degrades_factor(self, caplog):
        inner = LexiconOracle()
        slow = DelayedBackend(inner, delay_ms=2000, factors={2})
        text = " violence is the only answer. the other party is pure evil."
        posts = political_posts(3, extra=text)
        diag = ScoringDiagnostics()
        cache = ScoreCache()
        try:
            with caplog.at_level(logging.WARNING, logger="feedlab.scoring"):
                out = score_posts(posts, slow, cache, timeout_ms=200, diagnostics=diag)
        finally:
            slow.release.set()
        for s in out.values():
            assert s.factors[0] and not s.factors[2]
        assert diag.timeouts == 1
        assert any(e["event"] == "Timeout" and e["factor"] == "v3" for e in diag.events)
        assert "Timeout" in caplog.text
        # degraded scores are not cached, so a healthy backend fixes them later
        assert len(cache) == 0
        healed = score_posts(posts, inner, cache)
        assert all(s.factors[2] for s in healed.values())

    def test_full_timeout_all_false(self):
        slow = DelayedBackend(LexiconOracle(), delay_ms=2000)
        diag = ScoringDiagnostics()
        try:
            out = score_posts(political_posts(12, " trust no one."), slow, timeout_ms=100, diagnostics=diag)
        finally:
            slow.release.set()
        assert diag.timeouts == 16
        assert all(s.is_political and s.count == 0 for s in out.values())

    def test_timeouts_only_lower_counts(self):
        posts = [Post.from_dict(r["post"]) for r in labeled()]
        full = score_posts(posts, LexiconOracle())
        slow = DelayedBackend(LexiconOracle(), delay_ms=2000, factors={0, 4})
        try:
            degraded = score_posts(posts, slow, timeout_ms=150)
        finally:
            slow.release.set()
        for pid in full:
            assert degraded[pid].count <= full[pid].count


class TestThreshold:
    def test_exhaustive(self):
        for bits in itertools.product([False, True], repeat=8):
            s = AapaScore(bits, True)
            assert is_aapa(s) == (sum(bits) >= 4) == s.is_aapa

    def test_examples(self):
        assert is_aapa(AapaScore((True,) * 4 + (False,) * 4, True))
        assert not is_aapa(AapaScore((True,) * 3 + (False,) * 5, True))
        assert not is_aapa(AapaScore())


class TestCache:
    def test_hash_stable(self):
        assert content_hash("abc") == content_hash("abc")
        assert content_hash("abc") != content_hash("abd")
        assert 0 <= content_hash("x") < 2 ** 64

    def test_counters(self):
        c = ScoreCache()
        assert c.get("t") is None
        s = AapaScore()
        c.put("t", s)
        assert c.get("t") is s
        assert c.peek("t") is s
        assert (c.hits, c.misses) == (1, 1)
