"""Synthetic posts whose texts the lexicon oracle classifies exactly.

Political posts name a political topic and carry one phrase per latent
factor, taken from that factor's own phrase table; non-political posts use
the neutral sentence table. A round-trip check against the oracle runs when
the pool is built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..domain import AAPA_THRESHOLD, N_FACTORS, AapaScore, FeedBatch, Post
from ..scoring.backends import LexiconOracle, load_lexicon
from .config import SimConfig

POLITICAL_COUNTS_AAPA = np.arange(AAPA_THRESHOLD, N_FACTORS + 1)
POLITICAL_COUNTS_PLAIN = np.arange(0, AAPA_THRESHOLD)
# share of AAPA posts by factor count 4..8 and of plain political posts by count 0..3
AAPA_COUNT_PROBS = np.array([0.45, 0.27, 0.15, 0.09, 0.04])
PLAIN_COUNT_PROBS = np.array([0.30, 0.30, 0.25, 0.15])
SUBPOOL_SHARES = (0.45, 0.30, 0.25)  # non-political, plain political, AAPA


@dataclass(frozen=True)
class PooledPost:
    post: Post
    truth: AapaScore  # latent factors the text was built from


def choose_factors(k: int, weights, rng: np.random.Generator) -> tuple[bool, ...]:
    """``k`` distinct factors by weighted sampling without replacement."""
    w = np.asarray(weights, dtype=float)
    picked = rng.choice(N_FACTORS, size=k, replace=False, p=w / w.sum()) if k else []
    flags = [False] * N_FACTORS
    for f in picked:
        flags[int(f)] = True
    return tuple(flags)


def political_text(factors, rng: np.random.Generator, lexicon: dict) -> str:
    parts = [str(rng.choice(lexicon["topics"])) + ":"]
    for f, on in enumerate(factors):
        if on:
            parts.append(str(rng.choice(lexicon["factors"][f"v{f + 1}"])) + ".")
    parts.append(str(rng.choice(lexicon["neutral_political"])))
    parts.append(str(rng.choice(lexicon["tags"])))
    return " ".join(parts)


def nonpolitical_text(rng: np.random.Generator, lexicon: dict) -> str:
    return f"{rng.choice(lexicon['nonpolitical'])} {rng.choice(lexicon['tags'])}"


class ContentPool:
    """Three shared sub-pools (non-political, plain political, AAPA) of posts."""

    def __init__(self, config: SimConfig, rng: np.random.Generator, oracle: Optional[LexiconOracle] = None):
        self.config = config
        lexicon = load_lexicon()
        oracle = oracle or LexiconOracle()
        sizes = [max(1, int(round(config.pool_size * s))) for s in SUBPOOL_SHARES]
        self.nonpolitical: list[PooledPost] = []
        self.plain: list[PooledPost] = []
        self.aapa: list[PooledPost] = []
        idx = 0
        for kind, size in zip(("n", "p", "a"), sizes):
            for _ in range(size):
                pid = f"post{idx:06d}"
                idx += 1
                if kind == "n":
                    text, truth = nonpolitical_text(rng, lexicon), AapaScore.non_political()
                else:
                    counts, probs = ((POLITICAL_COUNTS_PLAIN, PLAIN_COUNT_PROBS) if kind == "p"
                                     else (POLITICAL_COUNTS_AAPA, AAPA_COUNT_PROBS))
                    k = int(rng.choice(counts, p=probs))
                    truth = AapaScore(choose_factors(k, config.factor_weights, rng), True)
                    shown = truth.factors
                    if config.classifier_noise > 0:
                        shown = tuple(on and rng.random() >= config.classifier_noise for on in shown)
                    text = political_text(shown, rng, lexicon)
                    if config.classifier_noise == 0:
                        _check_round_trip(oracle, text, truth)
                entry = PooledPost(Post(pid, f"author{int(rng.integers(1_000_000)):06d}", text), truth)
                {"n": self.nonpolitical, "p": self.plain, "a": self.aapa}[kind].append(entry)
        self.truth = {e.post.post_id: e.truth for sub in (self.nonpolitical, self.plain, self.aapa) for e in sub}

    def subpools(self):
        return self.nonpolitical, self.plain, self.aapa


def _check_round_trip(oracle: LexiconOracle, text: str, truth: AapaScore) -> None:
    if not oracle.is_political_text(text) or oracle.factors_of(text) != truth.factors:
        raise AssertionError(f"generated text does not round-trip through the oracle: {text!r}")


@dataclass
class FeedCursor:
    """Per-participant position in its own permutation of each sub-pool."""

    seed: tuple
    positions: list
    _orders: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def start(cls, master_seed: int, index: int) -> "FeedCursor":
        return cls((master_seed, index), [0, 0, 0])

    def take(self, pool: ContentPool, which: int, k: int) -> list[PooledPost]:
        sub = pool.subpools()[which]
        if len(sub) < k:
            raise ValueError(f"sub-pool of {len(sub)} posts cannot fill a batch of {k}")
        out = []
        while len(out) < k:
            start = self.positions[which]
            lap, offset = divmod(start, len(sub))
            order = self._orders.get((which, lap))
            if order is None:
                order = np.random.default_rng([*self.seed, which, lap]).permutation(len(sub))
                self._orders = {(which, lap): order, **{k: v for k, v in self._orders.items() if k[0] != which}}
            n = min(k - len(out), len(sub) - offset)
            chunk = [sub[int(j)] for j in order[offset:offset + n]]
            if out:
                # wrapping mid-batch: never repeat a post inside one batch
                taken = {e.post.post_id for e in out}
                chunk = [e for e in chunk if e.post.post_id not in taken]
            out.extend(chunk)
            self.positions[which] = start + n
        return out


def generate_feed_batch(participant_id: str, political_share: float, config: SimConfig,
                        rng: np.random.Generator, pool: ContentPool, cursor: FeedCursor,
                        load_seq: int = 0, now: int = 0) -> tuple[FeedBatch, dict]:
    """One working set: ``content_per_load`` posts plus ads at random slots.

    Returns the batch and ``post_id -> latent AapaScore`` for its content.
    """
    n = config.content_per_load
    political = rng.random(n) < political_share
    aapa = rng.random(n) < config.aapa_of_political
    cats = np.where(political, np.where(aapa, 2, 1), 0)
    sizes = np.bincount(cats, minlength=3)
    drawn = [iter(cursor.take(pool, c, int(sizes[c]))) for c in range(3)]
    content = [next(drawn[c]) for c in cats.tolist()]
    total = n + config.ads_per_load
    ad_slots = set(int(s) for s in rng.choice(total, size=config.ads_per_load, replace=False)) if total else set()
    posts, it, ad_i = [], iter(content), 0
    for slot in range(total):
        if slot in ad_slots:
            ad_i += 1
            posts.append(Post(f"ad-{participant_id}-{load_seq}-{ad_i}", "advertiser",
                              "Sponsored: limited time offer", is_ad=True, created_at=now))
        else:
            posts.append(next(it).post)
    batch = FeedBatch(participant_id, load_seq, tuple(posts), now)
    return batch, {e.post.post_id: e.truth for e in content}


def screening_feed(index: int, political_share: float, config: SimConfig, rng: np.random.Generator,
                   pool: ContentPool, size: int = 180) -> list[Post]:
    """A one-off feed of ``size`` content posts used for eligibility screening."""
    cursor = FeedCursor((config.master_seed, 1_000_000 + index), [0, 0, 0])
    political = rng.random(size) < political_share
    aapa = rng.random(size) < config.aapa_of_political
    cats = np.where(political, np.where(aapa, 2, 1), 0)
    drawn = {c: iter(cursor.take(pool, c, int(np.sum(cats == c)))) for c in range(3)}
    return [next(drawn[int(c)]).post for c in cats]
