"""Scrolling, viewing and engagement behavior over served feeds."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..domain import AapaScore, EngagementEvent, EventKind
from ..rerank import RerankedFeed
from .config import SimConfig


@dataclass
class LoadBehavior:
    events: list = field(default_factory=list)
    viewed: list = field(default_factory=list)  # content post ids in view order
    end: int = 0
    survey_at: Optional[int] = None  # when the survey card was reached, if it was


def session_depth(config: SimConfig, rng: np.random.Generator) -> int:
    """Content posts viewed in one session (shifted geometric, support 1..)."""
    return int(rng.geometric(1.0 / config.mean_session_views))


def dwell_times(config: SimConfig, rng: np.random.Generator, k: int) -> np.ndarray:
    """Visible milliseconds per viewed post; always at least one second."""
    return (1000 + rng.lognormal(np.log(config.dwell_median_ms), config.dwell_sigma, size=k)).astype(np.int64)


def simulate_behavior(participant_id: str, feed: RerankedFeed, depth: int, start: int, config: SimConfig,
                      rng: np.random.Generator, scores: Mapping[str, AapaScore]) -> LoadBehavior:
    """View the first ``depth`` content posts of ``feed`` starting at ``start``.

    Ads are scrolled past without a view event. Engagement probabilities
    are scaled up for political posts.
    """
    out = LoadBehavior(end=start)
    if depth <= 0:
        return out
    content = feed.content
    k = min(depth, len(content))
    if k == 0:
        return out
    dwell = dwell_times(config, rng, k)
    u = rng.random((k, 3))
    ends = start + np.cumsum(dwell)
    out.events.append(EngagementEvent(participant_id, EventKind.FEED_LOAD, start))
    slot = feed.survey_slot
    if slot is not None and k >= slot - 1:
        out.survey_at = int(start if slot == 1 else ends[slot - 2])
    for i in range(k):
        post = content[i].post
        at = int(ends[i])
        out.viewed.append(post.post_id)
        out.events.append(EngagementEvent(participant_id, EventKind.VIEW, at, post.post_id, int(dwell[i])))
        s = scores.get(post.post_id)
        pol = s is not None and s.is_political
        fav = config.favorite_rate * (config.political_favorite_multiplier if pol else 1.0)
        rep = config.repost_rate * (config.political_repost_multiplier if pol else 1.0)
        if u[i, 0] < fav:
            out.events.append(EngagementEvent(participant_id, EventKind.FAVORITE, at, post.post_id))
        if u[i, 1] < rep:
            out.events.append(EngagementEvent(participant_id, EventKind.REPOST, at, post.post_id))
        if u[i, 2] < config.reply_rate:
            out.events.append(EngagementEvent(participant_id, EventKind.REPLY, at, post.post_id))
    out.end = int(ends[-1])
    out.events.append(EngagementEvent(participant_id, EventKind.HEARTBEAT, out.end, visible_ms=out.end - start))
    return out
