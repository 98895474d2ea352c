from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedlab.domain import AapaScore, Arm, FeedBatch, Participant, Party, Platform, Post
from feedlab.errors import UnscoredBatch
from feedlab.rerank import (INVENTORY_WINDOW_MS, DemotionCache, Origin, RerankedFeed, UprankInventory,
                            identity_feed, merge_demoted, penalty_key, rerank_increased, rerank_reduced,
                            select_uprank_candidate, serve_load)

HOUR = 3_600_000


def score(count):
    if count is None:
        return AapaScore()
    return AapaScore(tuple(i < count for i in range(8)), True)


def make_batch(counts, ads=()):
    """``counts[i]`` is the factor count of content post i (None = non-political)."""
    posts, scores, it = [], {}, iter(range(len(counts)))
    total = len(counts) + len(ads)
    for slot in range(1, total + 1):
        if slot in ads:
            posts.append(Post(f"ad{slot}", "brand", "buy", is_ad=True))
        else:
            i = next(it)
            posts.append(Post(f"c{i}", "a", f"text {i}"))
            scores[f"c{i}"] = score(counts[i])
    return FeedBatch("p", 0, tuple(posts)), scores


def reference_reduced(counts):
    """Reference order: stable sort by key with ties on position, cut at batch length."""
    keyed = [(penalty_key(i + 1, c or 0), i + 1, f"c{i}") for i, c in enumerate(counts)]
    keyed.sort()
    n = len(counts)
    return [pid for k, _, pid in keyed if k <= n], [(pid, k) for k, _, pid in keyed if k > n]


counts_strategy = st.lists(st.one_of(st.none(), st.integers(0, 8)), min_size=1, max_size=40)


class TestPenaltyKey:
    def test_examples(self):
        assert penalty_key(3, 4) == 123
        assert penalty_key(7, 6) == 427
        assert penalty_key(1, 8) == 81

    def test_non_aapa_keeps_position(self):
        assert penalty_key(5, 3) == 5

    def test_score_monotone(self):
        for pos in range(1, 40):
            keys = [penalty_key(pos, s) for s in range(4, 9)]
            assert keys == sorted(set(keys))

    def test_zero_position(self):
        with pytest.raises(ValueError):
            penalty_key(0, 4)


class TestReduced:
    def test_no_aapa_identity(self):
        b, s = make_batch([None] * 20 + [2] * 10)
        out = rerank_reduced(b, s, Arm.TREATMENT, np.random.default_rng(0), True)
        assert out.content_ids == [p.post_id for p in b.posts]
        assert out.survey_slot is None and not out.intervened

    def test_control_keeps_order(self):
        counts = [None] * 35
        for i in (4, 10, 20):
            counts[i] = 5
        b, s = make_batch(counts)
        out = rerank_reduced(b, s, Arm.CONTROL, np.random.default_rng(3), True)
        assert out.content_ids == [p.post_id for p in b.posts]
        assert out.survey_slot - 1 in (5, 11, 21)

    def test_treatment_example(self):
        counts = [None] * 35
        counts[2], counts[6] = 4, 6
        b, s = make_batch(counts)
        out = rerank_reduced(b, s, Arm.TREATMENT, np.random.default_rng(0), False)
        assert [(p.post_id, k) for p, k in out.demoted] == [("c2", 123), ("c6", 427)]
        assert out.content_ids == [f"c{i}" for i in range(35) if i not in (2, 6)]

    def test_unscored(self):
        b, s = make_batch([None, 5])
        del s["c1"]
        with pytest.raises(UnscoredBatch):
            rerank_reduced(b, s, Arm.TREATMENT, np.random.default_rng(0), False)

    def test_ads_pinned(self):
        counts = [5, None, None, 7, None]
        b, s = make_batch(counts, ads=(2, 6))
        out = rerank_reduced(b, s, Arm.TREATMENT, np.random.default_rng(0), True)
        assert [it.post.post_id for it in out.rendered()] == ["c1", "ad2", "c2", "c4", "ad6"]

    @settings(max_examples=300, deadline=None)
    @given(counts_strategy, st.integers(0, 2 ** 32 - 1), st.booleans())
    def test_matches_reference_and_conserves(self, counts, seed, sampled):
        b, s = make_batch(counts)
        out = rerank_reduced(b, s, Arm.TREATMENT, np.random.default_rng(seed), sampled)
        if not any(c is not None and c >= 4 for c in counts):
            assert out.content_ids == [p.post_id for p in b.posts]
            return
        kept, demoted = reference_reduced(counts)
        assert out.content_ids == kept
        assert [(p.post_id, k) for p, k in out.demoted] == demoted
        assert Counter(out.content_ids + [p.post_id for p, _ in out.demoted]) == Counter(s.keys())
        non_aapa = [f"c{i}" for i, c in enumerate(counts) if c is None or c < 4]
        assert [pid for pid in out.content_ids if pid in set(non_aapa)] == non_aapa

    @settings(max_examples=200, deadline=None)
    @given(counts_strategy, st.integers(0, 2 ** 32 - 1))
    def test_slot_parity(self, counts, seed):
        b, s = make_batch(counts)
        t = rerank_reduced(b, s, Arm.TREATMENT, np.random.default_rng(seed), True)
        c = rerank_reduced(b, s, Arm.CONTROL, np.random.default_rng(seed), True)
        assert t.survey_slot == c.survey_slot
        assert c.content_ids == [p.post_id for p in b.posts]


class TestIncreased:
    def test_treatment_inserts(self):
        b, s = make_batch([None] * 35)
        cand = Post("up", "x", "upranked")
        rng = np.random.default_rng(5)
        pos = int(np.random.default_rng(5).integers(1, 36))
        out = rerank_increased(b, s, Arm.TREATMENT, cand, rng, True)
        assert len(out.content) == 36
        assert out.content[pos - 1].post.post_id == "up" and out.content[pos - 1].origin is Origin.UPRANKED
        assert out.survey_slot == pos + 1

    def test_control_same_slot_no_insert(self):
        b, s = make_batch([None] * 35)
        cand = Post("up", "x", "upranked")
        t = rerank_increased(b, s, Arm.TREATMENT, cand, np.random.default_rng(9), True)
        c = rerank_increased(b, s, Arm.CONTROL, cand, np.random.default_rng(9), True)
        assert len(c.content) == 35 and c.content_ids == [p.post_id for p in b.posts]
        assert c.survey_slot == t.survey_slot

    def test_no_candidate(self):
        b, s = make_batch([None] * 10)
        out = rerank_increased(b, s, Arm.TREATMENT, None, np.random.default_rng(1), True)
        assert out.content_ids == [p.post_id for p in b.posts]
        assert out.survey_slot is not None

    @settings(max_examples=200, deadline=None)
    @given(counts_strategy, st.integers(0, 2 ** 32 - 1))
    def test_conservation(self, counts, seed):
        b, s = make_batch(counts)
        cand = Post("up", "x", "upranked")
        out = rerank_increased(b, s, Arm.TREATMENT, cand, np.random.default_rng(seed), False)
        ids = out.content_ids
        ids.remove("up")
        assert ids == [p.post_id for p in b.posts]


class TestDemotionCache:
    def test_reemerges_at_key(self):
        cache = DemotionCache("p", cursor=35)
        cache.entries = [(Post("d", "a", "t"), 40)]
        b, _ = make_batch([None] * 35)
        out = merge_demoted(identity_feed(b), cache)
        assert out.content[4].post.post_id == "d" and out.content[4].origin is Origin.REEMITTED
        assert cache.entries == [] and cache.cursor == 71

    def test_empty_identity(self):
        b, _ = make_batch([None] * 5)
        out = merge_demoted(b, DemotionCache("p"))
        assert out.content_ids == [p.post_id for p in b.posts]

    def test_deep_key_stays(self):
        cache = DemotionCache("p", cursor=65)
        cache.entries = [(Post("d", "a", "t"), 427)]
        b, _ = make_batch([None] * 35)
        merge_demoted(b, cache)
        assert len(cache.entries) == 1

    def test_session_reset(self):
        cache = DemotionCache("p")
        cache.begin_load(0)
        cache.entries = [(Post("d", "a", "t"), 50)]
        cache.cursor = 30
        assert not cache.begin_load(HOUR - 1)
        assert cache.begin_load(2 * HOUR - 1)
        assert cache.entries == [] and cache.cursor == 0 and cache.session_id == 1

    def test_round_trip(self):
        cache = DemotionCache("p", 2, 30, [(Post("d", "a", "t"), 50)], 123)
        assert DemotionCache.from_dict(cache.to_dict()) == cache
        assert cache.to_records()[0] == {"post": Post("d", "a", "t").to_dict(), "penalty_key": 50, "session_id": 2}

    def test_reemitted_exactly_once_over_session(self):
        rng = np.random.default_rng(11)
        cache = DemotionCache("p")
        demoted_all, reemitted = [], []
        for load in range(40):
            counts = [int(c) if c >= 0 else None for c in rng.integers(-3, 9, size=30)]
            b, s = make_batch(counts)
            b = FeedBatch("p", load, tuple(Post(f"L{load}-{p.post_id}", "a", p.text) for p in b.posts))
            s = {f"L{load}-{k}": v for k, v in s.items()}
            cache.begin_load(load * 60_000)
            offset = cache.cursor
            feed = rerank_reduced(b, s, Arm.TREATMENT, rng, False)
            served = serve_load(feed, cache)
            demoted_all += [(p.post_id, offset + k) for p, k in feed.demoted]
            keys = dict(demoted_all)
            for i, it in enumerate(served.content):
                if it.origin is Origin.REEMITTED:
                    reemitted.append(it.post.post_id)
                    # never early; late only when an earlier-keyed post holds the slot
                    assert keys[it.post.post_id] <= offset + i + 1
            order = [keys[pid] for pid in reemitted]
            assert order == sorted(order)
        assert len(reemitted) == len(set(reemitted))
        left = {p.post_id for p, _ in cache.entries}
        assert set(reemitted) | left == {pid for pid, _ in demoted_all}
        assert not set(reemitted) & left


def participant(pid, party=Party.DEMOCRAT):
    return Participant(pid, party, Platform.BOVITZ)


class TestInventory:
    def fill(self, n, at=0, party=Party.DEMOCRAT, who="other"):
        inv = UprankInventory()
        for i in range(n):
            inv.record(Post(f"i{i:03d}", "a", "t"), score(4 + i % 5), who, party, at + i)
        return inv

    def test_top_100(self):
        inv = self.fill(250, at=0)
        pool = inv.eligible(participant("me"), now=1000)
        assert len(pool) == 100
        assert all(int(p.post_id[1:]) % 5 >= 3 for p in pool[:50])
        # best score first, then most recent
        assert pool[0].post_id == "i249"

    def test_seen_excluded(self):
        inv = self.fill(3)
        pool = inv.eligible(participant("me"), now=10, seen={"i000"})
        assert "i000" not in {p.post_id for p in pool}

    def test_other_party_and_self_excluded(self):
        inv = self.fill(3, party=Party.REPUBLICAN)
        assert inv.eligible(participant("me"), now=10) == []
        mine = self.fill(3, who="me")
        assert mine.eligible(participant("me"), now=10) == []

    def test_window(self):
        inv = self.fill(1, at=0)
        assert inv.eligible(participant("me"), now=INVENTORY_WINDOW_MS)
        assert not inv.eligible(participant("me"), now=INVENTORY_WINDOW_MS + 1)

    def test_non_aapa_not_recorded(self):
        inv = UprankInventory()
        inv.record(Post("x", "a", "t"), score(3), "o", Party.DEMOCRAT, 0)
        inv.record(Post("ad", "a", "t", is_ad=True), score(6), "o", Party.DEMOCRAT, 0)
        assert len(inv) == 0

    def test_empty_returns_none(self):
        assert select_uprank_candidate(UprankInventory(), participant("me"), 0, np.random.default_rng(0)) is None

    def test_snapshot_isolated(self):
        inv = self.fill(2)
        snap = inv.snapshot()
        inv.record(Post("new", "a", "t"), score(8), "o", Party.DEMOCRAT, 5)
        assert "new" not in {p.post_id for p in snap.eligible(participant("me"), 10)}


class TestRendering:
    def test_render_index_skips_ads(self):
        b, s = make_batch([None] * 4, ads=(1, 3))
        feed = RerankedFeed(identity_feed(b).content, identity_feed(b).ads, survey_slot=2)
        assert [it.post.post_id for it in feed.rendered()] == ["ad1", "c0", "ad3", "c1", "c2", "c3"]
        assert feed.survey_render_index() == 3
