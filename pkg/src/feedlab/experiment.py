"""Enrollment, study phases, sessions, and engagement/exposure metrics."""
from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .domain import AapaScore, Arm, Assignment, EngagementEvent, EventKind, Experiment, Participant
from .errors import MissingScore, NoViews, OutOfStudyWindow, QuotasFull
from .rerank import SESSION_GAP_MS
from .surveys import local_day


class Phase(str, enum.Enum):
    BASELINE = "Baseline"
    INTERVENTION = "Intervention"


@dataclass(frozen=True)
class StudyConfig:
    quota_reduce: int = 600
    quota_increase: int = 500
    baseline_days: int = 3
    total_days: int = 10
    min_feed_loads: int = 10
    master_seed: int = 0
    screening_threshold: float = 0.05

    def __post_init__(self):
        if not 0 < self.baseline_days < self.total_days:
            raise ValueError("baseline_days must be positive and below total_days")
        if self.quota_reduce < 0 or self.quota_increase < 0:
            raise ValueError("quotas must be nonnegative")

    def quota(self, experiment: Experiment) -> int:
        return self.quota_reduce if experiment is Experiment.REDUCE else self.quota_increase

    @property
    def intervention_days(self) -> list[int]:
        return list(range(self.baseline_days + 1, self.total_days + 1))

    @property
    def baseline_day_list(self) -> list[int]:
        return list(range(1, self.baseline_days + 1))


@dataclass
class EnrollmentState:
    """Single-writer assignment authority."""

    counts: dict = field(default_factory=lambda: {e: 0 for e in Experiment})
    assignments: dict = field(default_factory=dict)
    arrivals: int = 0


def enroll(participant: Participant, config: StudyConfig, state: EnrollmentState, now: int = 0,
           rng: Optional[np.random.Generator] = None) -> Assignment:
    """Draw an experiment (weighted by remaining quota) and a 50/50 arm.

    Without ``rng`` the draw uses ``default_rng([master_seed, arrival_index])``
    so assignments depend only on the seed and arrival order. Re-enrolling a
    participant returns the stored assignment unchanged.
    """
    existing = state.assignments.get(participant.participant_id)
    if existing is not None:
        return existing
    remaining = {e: config.quota(e) - state.counts[e] for e in Experiment}
    total = sum(max(r, 0) for r in remaining.values())
    if total <= 0:
        raise QuotasFull("both experiment quotas are full")
    if rng is None:
        rng = np.random.default_rng([config.master_seed, state.arrivals])
    u_exp, u_arm = rng.random(2)
    experiment = Experiment.REDUCE if u_exp < remaining[Experiment.REDUCE] / total else Experiment.INCREASE
    arm = Arm.TREATMENT if u_arm < 0.5 else Arm.CONTROL
    assignment = Assignment(participant.participant_id, experiment, arm, now)
    state.counts[experiment] += 1
    state.arrivals += 1
    state.assignments[participant.participant_id] = assignment
    return assignment


def study_day(at: int, enrolled_at: int, tz_offset_min: int = 0) -> int:
    """1-based study day in participant-local time; day 1 is the enrollment day."""
    return local_day(at, tz_offset_min) - local_day(enrolled_at, tz_offset_min) + 1


def phase_of(day: int, config: StudyConfig) -> Phase:
    if not 1 <= day <= config.total_days:
        raise OutOfStudyWindow(f"day {day} outside 1..{config.total_days}")
    return Phase.BASELINE if day <= config.baseline_days else Phase.INTERVENTION


@dataclass(frozen=True)
class Session:
    participant_id: str
    events: tuple[EngagementEvent, ...]
    start: int
    end: int


def _segment_one(pid: str, events: list[EngagementEvent], gap: int) -> list[Session]:
    events = sorted(events, key=lambda e: e.at)
    views = [e for e in events if e.kind is EventKind.VIEW]
    anchors = views if views else events
    times = np.fromiter((e.at for e in anchors), dtype=np.int64, count=len(anchors))
    sid = kernels.session_breaks(times, gap)
    n_sessions = int(sid[-1]) + 1
    starts = np.array([times[np.argmax(sid == k)] for k in range(n_sessions)], dtype=np.int64)
    members: list[list[EngagementEvent]] = [[] for _ in range(n_sessions)]
    anchor_ids = {id(e): int(s) for e, s in zip(anchors, sid)}
    for e in events:
        k = anchor_ids.get(id(e))
        if k is None:
            # non-view events join the latest session that started at or before them
            k = max(int(np.searchsorted(starts, e.at, side="right")) - 1, 0)
        members[k].append(e)
    out = []
    for k, evs in enumerate(members):
        anchor_times = times[sid == k]
        out.append(Session(pid, tuple(evs), int(anchor_times[0]), int(anchor_times[-1])))
    return out


def segment_sessions(events: Iterable[EngagementEvent], gap_ms: int = SESSION_GAP_MS) -> list[Session]:
    """Split each participant's events at View gaps of at least ``gap_ms``."""
    by_pid: dict[str, list[EngagementEvent]] = defaultdict(list)
    for e in events:
        by_pid[e.participant_id].append(e)
    sessions = []
    for pid in sorted(by_pid):
        sessions.extend(_segment_one(pid, by_pid[pid], gap_ms))
    return sessions


def return_rate(events: Iterable[EngagementEvent], study_days: Sequence[int], enrolled_at: int = 0,
                tz_offset_min: int = 0) -> float:
    """Sessions per day over ``study_days`` with inactive days counted as zero."""
    days = set(study_days)
    if not days:
        return 0.0
    n = sum(1 for s in segment_sessions(events)
            if study_day(s.start, enrolled_at, tz_offset_min) in days)
    return n / len(days)


@dataclass(frozen=True)
class EngagementRates:
    repost_rate: float
    favorite_rate: float
    reply_rate: float
    views: int


def engagement_rates(events: Iterable[EngagementEvent]) -> EngagementRates:
    counts = defaultdict(int)
    views = 0
    for e in events:
        if e.qualifying_view:
            views += 1
        counts[e.kind] += 1
    if views == 0:
        raise NoViews("no post was visible for at least one second")
    return EngagementRates(counts[EventKind.REPOST] / views, counts[EventKind.FAVORITE] / views,
                           counts[EventKind.REPLY] / views, views)


def time_spent_minutes(events: Iterable[EngagementEvent], study_days: Sequence[int], enrolled_at: int = 0,
                       tz_offset_min: int = 0) -> float:
    """Mean daily foreground minutes from heartbeat intervals."""
    days = set(study_days)
    if not days:
        return 0.0
    ms = sum(e.visible_ms or 0 for e in events
             if e.kind is EventKind.HEARTBEAT and study_day(e.at, enrolled_at, tz_offset_min) in days)
    return ms / 60_000.0 / len(days)


@dataclass(frozen=True)
class DailyExposure:
    participant_id: str
    day: int
    views: int
    political_fraction: float
    aapa_fraction_of_political: Optional[float]
    aapa_share: float
    mean_aapa_score: Optional[float]


def exposure_metrics(views: Iterable[EngagementEvent], scores: Mapping[str, AapaScore], enrolled_at: int = 0,
                     tz_offset_min: int = 0) -> list[DailyExposure]:
    """Per participant and day: political share, AAPA share of political, mean factor count.

    ``mean_aapa_score`` averages the factor count over political views;
    undefined ratios are ``None``.
    """
    cells: dict[tuple[str, int], list[AapaScore]] = defaultdict(list)
    for e in views:
        if not e.qualifying_view:
            continue
        score = scores.get(e.post_id)
        if score is None:
            raise MissingScore(f"viewed post {e.post_id} has no score")
        cells[(e.participant_id, study_day(e.at, enrolled_at, tz_offset_min))].append(score)
    out = []
    for (pid, day), sc in sorted(cells.items()):
        pol = [s for s in sc if s.is_political]
        n_aapa = sum(1 for s in pol if s.is_aapa)
        out.append(DailyExposure(
            pid, day, len(sc), len(pol) / len(sc),
            n_aapa / len(pol) if pol else None,
            n_aapa / len(sc),
            float(np.mean([s.count for s in pol])) if pol else None,
        ))
    return out


def completion_filter(participant_ids: Iterable[str], events: Iterable[EngagementEvent],
                      config: StudyConfig) -> set[str]:
    loads = defaultdict(int)
    for e in events:
        if e.kind is EventKind.FEED_LOAD:
            loads[e.participant_id] += 1
    return {pid for pid in participant_ids if loads[pid] >= config.min_feed_loads}


def daily_metric_rows(events: Sequence[EngagementEvent], assignment: Assignment, config: StudyConfig,
                      tz_offset_min: int = 0) -> list[tuple[str, int, str, float]]:
    """(participant_id, day, metric, value) rows for every study day, zeros included."""
    pid = assignment.participant_id
    by_day: dict[int, dict[str, float]] = {d: defaultdict(float) for d in range(1, config.total_days + 1)}
    for s in segment_sessions(events):
        d = study_day(s.start, assignment.enrolled_at, tz_offset_min)
        if d in by_day:
            by_day[d]["sessions"] += 1
    names = {EventKind.FAVORITE: "favorites", EventKind.REPOST: "reposts", EventKind.REPLY: "replies",
             EventKind.NEW_POST: "new_posts", EventKind.FEED_LOAD: "feed_loads"}
    for e in events:
        d = study_day(e.at, assignment.enrolled_at, tz_offset_min)
        if d not in by_day:
            continue
        if e.qualifying_view:
            by_day[d]["views"] += 1
        elif e.kind is EventKind.HEARTBEAT:
            by_day[d]["time_spent_min"] += (e.visible_ms or 0) / 60_000.0
        elif e.kind in names:
            by_day[d][names[e.kind]] += 1
    metrics = ["views", "sessions", "favorites", "reposts", "replies", "new_posts", "feed_loads", "time_spent_min"]
    return [(pid, d, m, float(by_day[d][m])) for d in sorted(by_day) for m in metrics]
