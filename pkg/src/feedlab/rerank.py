"""Reduced- and Increased-exposure reranking over scored feed batches.

Coordinates: ads are pinned to their original absolute slots and ignored
by everything else. Penalty keys, survey slots and the demotion cache all
count *content* (non-ad) positions, 1-based. A demotion-cache entry stores
an absolute session position (``cursor at load + penalty key``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .domain import AapaScore, Arm, FeedBatch, Participant, Party, Post
from .errors import UnscoredBatch

SESSION_GAP_MS = 3_600_000
INVENTORY_WINDOW_MS = 24 * 3_600_000
UPRANK_TOP_K = 100


class Origin(str, enum.Enum):
    ORIGINAL = "Original"
    UPRANKED = "Upranked"
    REEMITTED = "Reemitted"


@dataclass(frozen=True)
class RankedItem:
    post: Post
    origin: Origin = Origin.ORIGINAL


@dataclass(frozen=True)
class RerankedFeed:
    """Content in final order plus ads pinned at their original slots."""

    content: tuple[RankedItem, ...]
    ads: tuple[tuple[int, Post], ...] = ()
    survey_slot: Optional[int] = None
    demoted: tuple[tuple[Post, int], ...] = ()
    intervened: bool = False

    @property
    def content_ids(self) -> list[str]:
        return [it.post.post_id for it in self.content]

    def rendered(self) -> list[RankedItem]:
        """Content interleaved with pinned ads; ads past the end are appended."""
        total = len(self.content) + len(self.ads)
        pinned = dict(self.ads)
        out, it = [], iter(self.content)
        for slot in range(1, total + 1):
            if slot in pinned:
                out.append(RankedItem(pinned.pop(slot)))
            else:
                nxt = next(it, None)
                if nxt is not None:
                    out.append(nxt)
        out.extend(RankedItem(p) for _, p in sorted(pinned.items()))
        return out

    def survey_render_index(self) -> Optional[int]:
        """0-based index in :meth:`rendered` where the survey card goes."""
        if self.survey_slot is None:
            return None
        seen = 0
        for i, item in enumerate(self.rendered()):
            if item.post.is_ad:
                continue
            seen += 1
            if seen == self.survey_slot:
                return i
        return len(self.rendered())


def penalty_key(position: int, score: int) -> int:
    """Sort key of a post: its position, pushed down by ``position*score*10`` if AAPA."""
    if position < 1:
        raise ValueError("positions are 1-based")
    if score >= 4:
        return position + position * score * 10
    return position


def _split(batch: FeedBatch) -> tuple[list[Post], tuple[tuple[int, Post], ...]]:
    content, ads = [], []
    for i, p in enumerate(batch.posts, 1):
        (ads.append((i, p)) if p.is_ad else content.append(p))
    return content, tuple(ads)


def _scores_for(content: Sequence[Post], scores: Mapping[str, AapaScore]) -> list[AapaScore]:
    missing = [p.post_id for p in content if p.post_id not in scores]
    if missing:
        raise UnscoredBatch(f"{len(missing)} posts have no score, e.g. {missing[0]}")
    return [scores[p.post_id] for p in content]


def identity_feed(batch: FeedBatch, survey_slot: Optional[int] = None) -> RerankedFeed:
    content, ads = _split(batch)
    return RerankedFeed(tuple(RankedItem(p) for p in content), ads, survey_slot)


def aapa_positions(batch: FeedBatch, scores: Mapping[str, AapaScore]) -> list[int]:
    content, _ = _split(batch)
    return [i for i, s in enumerate(_scores_for(content, scores), 1) if s.is_aapa]


def rerank_reduced(batch: FeedBatch, scores: Mapping[str, AapaScore], arm: Arm,
                   rng: np.random.Generator, survey_sampled: bool) -> RerankedFeed:
    content, ads = _split(batch)
    sc = _scores_for(content, scores)
    flagged = [i for i, s in enumerate(sc, 1) if s.is_aapa]
    if not flagged:
        return RerankedFeed(tuple(RankedItem(p) for p in content), ads)
    pick = flagged[int(rng.integers(len(flagged)))]
    slot = pick + 1 if survey_sampled else None
    if arm is not Arm.TREATMENT:
        return RerankedFeed(tuple(RankedItem(p) for p in content), ads, slot, intervened=True)

    n = len(content)
    keyed = sorted(
        ((penalty_key(i, s.count), i, p.post_id, p) for i, (p, s) in enumerate(zip(content, sc), 1)),
        key=lambda t: t[:3],
    )
    kept = tuple(RankedItem(p) for key, _, _, p in keyed if key <= n)
    demoted = tuple((p, key) for key, _, _, p in keyed if key > n)
    return RerankedFeed(kept, ads, slot, demoted, intervened=True)


def rerank_increased(batch: FeedBatch, scores: Mapping[str, AapaScore], arm: Arm,
                     candidate: Optional[Post], rng: np.random.Generator,
                     survey_sampled: bool) -> RerankedFeed:
    content, ads = _split(batch)
    _scores_for(content, scores)
    if not content:
        return RerankedFeed((), ads)
    position = int(rng.integers(1, len(content) + 1))
    slot = position + 1 if survey_sampled else None
    items = [RankedItem(p) for p in content]
    if arm is Arm.TREATMENT and candidate is not None:
        items.insert(position - 1, RankedItem(candidate, Origin.UPRANKED))
    return RerankedFeed(tuple(items), ads, slot, intervened=candidate is not None)


@dataclass
class DemotionCache:
    """Per-participant store of demoted posts for the current scrolling session."""

    participant_id: str = ""
    session_id: int = 0
    cursor: int = 0
    entries: list[tuple[Post, int]] = field(default_factory=list)
    last_load_at: Optional[int] = None

    def begin_load(self, now: int) -> bool:
        """Start a new session after a gap of an hour or more; returns True if reset."""
        reset = self.last_load_at is not None and now - self.last_load_at >= SESSION_GAP_MS
        if reset:
            self.session_id += 1
            self.cursor = 0
            self.entries.clear()
        self.last_load_at = now
        return reset

    def add(self, demoted: Iterable[tuple[Post, int]], offset: int) -> None:
        for post, key in demoted:
            self.entries.append((post, offset + key))
        self.entries.sort(key=lambda e: (e[1], e[0].post_id))

    def to_records(self) -> list[dict]:
        return [{"post": p.to_dict(), "penalty_key": k, "session_id": self.session_id}
                for p, k in self.entries]

    def to_dict(self) -> dict:
        return {"participant_id": self.participant_id, "session_id": self.session_id, "cursor": self.cursor,
                "last_load_at": self.last_load_at, "entries": self.to_records()}

    @classmethod
    def from_dict(cls, d: dict) -> "DemotionCache":
        return cls(d["participant_id"], int(d["session_id"]), int(d["cursor"]),
                   [(Post.from_dict(e["post"]), int(e["penalty_key"])) for e in d["entries"]],
                   d.get("last_load_at"))


def merge_demoted(feed: RerankedFeed | FeedBatch, cache: DemotionCache) -> RerankedFeed:
    """Insert cached posts whose session position falls inside this load.

    Advances ``cache.cursor`` by the number of content positions served.
    """
    if isinstance(feed, FeedBatch):
        feed = identity_feed(feed)
    out: list[RankedItem] = []
    pos = cache.cursor
    entries = cache.entries
    k = 0
    for item in feed.content:
        while k < len(entries) and entries[k][1] <= pos + 1:
            out.append(RankedItem(entries[k][0], Origin.REEMITTED))
            pos += 1
            k += 1
        out.append(item)
        pos += 1
    del entries[:k]
    cache.cursor = pos
    return RerankedFeed(tuple(out), feed.ads, feed.survey_slot, feed.demoted, feed.intervened)


def serve_load(feed: RerankedFeed, cache: DemotionCache) -> RerankedFeed:
    """Merge re-emerging posts into ``feed`` then stash its newly demoted ones."""
    offset = cache.cursor
    merged = merge_demoted(feed, cache)
    cache.add(feed.demoted, offset)
    return merged


@dataclass
class _InventoryEntry:
    post: Post
    score: AapaScore
    recipients: dict  # participant_id -> (party, last recommended_at)


class UprankInventory:
    """AAPA posts recommended to any participant, for the Increased-exposure arm."""

    def __init__(self):
        self._entries: dict[str, _InventoryEntry] = {}
        self._ranked: dict[Party, list[_InventoryEntry]] = {}

    def __len__(self):
        return len(self._entries)

    def record(self, post: Post, score: AapaScore, participant_id: str, party: Party, at: int) -> None:
        if post.is_ad or not score.is_aapa:
            return
        e = self._entries.get(post.post_id)
        if e is None:
            e = self._entries[post.post_id] = _InventoryEntry(post, score, {})
        prev = e.recipients.get(participant_id)
        if prev is None or prev[1] < at:
            e.recipients[participant_id] = (party, at)
        self._ranked.clear()

    def snapshot(self) -> "UprankInventory":
        snap = UprankInventory()
        snap._entries = {k: _InventoryEntry(v.post, v.score, dict(v.recipients)) for k, v in self._entries.items()}
        return snap

    def _ranked_for(self, party: Party) -> list[tuple[_InventoryEntry, list]]:
        """Entries with same-party recipients, best first, each with its (at, pid) list newest first."""
        ranked = self._ranked.get(party)
        if ranked is None:
            rows = []
            for e in self._entries.values():
                recips = sorted(((at, pid) for pid, (pty, at) in e.recipients.items() if pty is party),
                                reverse=True)
                if recips:
                    rows.append((-e.score.count, -recips[0][0], e.post.post_id, e, recips))
            rows.sort(key=lambda r: r[:3])
            ranked = self._ranked[party] = [(r[3], r[4]) for r in rows]
        return ranked

    def eligible(self, participant: Participant, now: int, seen: Optional[set] = None,
                 top_k: int = UPRANK_TOP_K) -> list[Post]:
        """Top-k posts recommended to another same-party participant within the window."""
        seen = seen or set()
        me = participant.participant_id
        out = []
        for e, recips in self._ranked_for(participant.party):
            if e.post.post_id in seen:
                continue
            for at, pid in recips:
                if at > now:
                    continue
                if now - at > INVENTORY_WINDOW_MS:
                    break
                if pid != me:
                    out.append(e.post)
                    break
            if len(out) == top_k:
                break
        return out


def select_uprank_candidate(inventory: UprankInventory, participant: Participant, now: int,
                            rng: np.random.Generator, seen: Optional[set] = None) -> Optional[Post]:
    pool = inventory.eligible(participant, now, seen)
    if not pool:
        return None
    return pool[int(rng.integers(len(pool)))]
