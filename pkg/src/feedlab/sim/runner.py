"""End-to-end study simulation driving :class:`~feedlab.study.StudyServer` in process.

Days run in lockstep: the uprank inventory snapshot is refreshed at each
day boundary, then every enrolled participant plays out that day from its
own random stream. Progress is checkpointed after each day, so a run that
stops can be resumed from the persisted logs.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..domain import N_FACTORS, Participant
from ..errors import QuotasFull
from ..experiment import Phase, StudyConfig
from ..rerank import SESSION_GAP_MS
from ..scoring.backends import LexiconOracle
from ..scoring.scorer import political_fraction
from ..store import Store
from ..study import StudyServer
from ..surveys import DAY_MS
from .behavior import session_depth, simulate_behavior
from .config import GroundTruth, SimConfig
from .content import ContentPool, FeedCursor, generate_feed_batch, screening_feed
from .population import SimParticipant, generate_population
from .response import post_survey, simulate_response

HOUR_MS = 3_600_000
BASE_MS = 19_875 * DAY_MS  # 2024-06-01T00:00Z
FETCH_LATENCY_MS = 2_000
ANSWER_DELAY_MS = 8_000


@dataclass
class ParticipantState:
    cursor: FeedCursor
    load_seq: int = 0
    dropped: bool = False
    factor_views: list = field(default_factory=lambda: [0] * N_FACTORS)
    intervention_views: int = 0

    def to_dict(self) -> dict:
        return {"positions": list(self.cursor.positions), "load_seq": self.load_seq, "dropped": self.dropped,
                "factor_views": list(self.factor_views), "intervention_views": self.intervention_views}

    @classmethod
    def from_dict(cls, d: dict, cursor: FeedCursor) -> "ParticipantState":
        cursor.positions = list(d["positions"])
        return cls(cursor, int(d["load_seq"]), bool(d["dropped"]), list(d["factor_views"]),
                   int(d["intervention_views"]))


@dataclass
class StudyBundle:
    config: SimConfig
    study_config: StudyConfig
    store: Store
    server: StudyServer
    population: list
    ground_truth: GroundTruth
    days_done: int
    root: Optional[Path] = None

    @property
    def complete(self) -> bool:
        return self.days_done >= self.config.days


def study_config_for(config: SimConfig) -> StudyConfig:
    qr, qi = config.quotas()
    return StudyConfig(quota_reduce=qr, quota_increase=qi, baseline_days=config.baseline_days,
                       total_days=config.days, master_seed=config.master_seed)


def enrolled_at(p: Participant) -> int:
    """08:00 local time on the first study day."""
    return BASE_MS + 8 * HOUR_MS - p.local_tz_offset * 60_000


class StudyRunner:
    def __init__(self, config: SimConfig, out: Optional[str | Path] = None, backend=None):
        self.config = config
        self.study_config = study_config_for(config)
        self.root = Path(out) if out is not None else None
        self.backend = backend if backend is not None else LexiconOracle()
        seed = config.master_seed
        self.population = generate_population(config, np.random.default_rng([seed, 0]))
        self.pool = ContentPool(config, np.random.default_rng([seed, 1]))
        self.truth = self.pool.truth
        self.states: dict[str, ParticipantState] = {}
        self.enrolled: list[SimParticipant] = []
        self.days_done = 0
        self.finished = False
        resume = self.root is not None and (self.root / "progress.json").exists()
        if resume:
            progress = json.loads((self.root / "progress.json").read_text(encoding="utf-8"))
            # anything written after the last checkpoint belongs to an interrupted day
            Store.truncate(self.root, progress["log_sizes"])
            self.store = Store.open(self.root)
            self.server = StudyServer.restore(self.store, self.study_config, self.backend, p0=config.survey_p0)
            self._load_progress(progress)
        else:
            if self.root is not None and self.root.exists() and any(self.root.iterdir()):
                if not (self.root / "study.json").exists():
                    raise FileExistsError(f"{self.root} is not empty and holds no study")
                # interrupted before the first checkpoint: start over
                Store.truncate(self.root, {})
            self.store = Store(self.root)
            self.server = StudyServer(self.store, self.study_config, self.backend, p0=config.survey_p0)

    # --- setup ---------------------------------------------------------------
    def screen_and_enroll(self) -> None:
        cfg = self.config
        for sp in self.population:
            rng = np.random.default_rng([cfg.master_seed, 3, sp.index])
            feed = screening_feed(sp.index, sp.political_share, cfg, rng, self.pool)
            frac = political_fraction(feed, self.backend)
            ok = frac >= self.study_config.screening_threshold
            self.store.append("screening", {"participant_id": sp.participant_id, "posts": len(feed),
                                            "political_fraction": frac, "qualified": ok})
            if not ok:
                continue
            try:
                self.server.enroll(sp.participant, enrolled_at(sp.participant))
            except QuotasFull:
                break
            self.server.record_survey(sp.participant_id, "pre", dict(sp.participant.pre_survey))
            self.enrolled.append(sp)
            self.states[sp.participant_id] = ParticipantState(FeedCursor.start(cfg.master_seed, sp.index))
        self._checkpoint()

    def _load_progress(self, progress: dict) -> None:
        self.days_done = int(progress["days_done"])
        self.finished = bool(progress.get("finished", False))
        by_id = {sp.participant_id: sp for sp in self.population}
        for pid, d in progress["states"].items():
            sp = by_id[pid]
            self.enrolled.append(sp)
            self.states[pid] = ParticipantState.from_dict(d, FeedCursor.start(self.config.master_seed, sp.index))
        self.enrolled.sort(key=lambda sp: sp.index)

    def _checkpoint(self, finished: bool = False) -> None:
        self.store.write_json("progress.json", {
            "days_done": self.days_done,
            "finished": finished,
            "log_sizes": self.store.sizes(),
            "states": {sp.participant_id: self.states[sp.participant_id].to_dict() for sp in self.enrolled},
        })

    # --- simulation ------------------------------------------------------------
    def run_day(self, day: int) -> None:
        self.server.refresh_inventory()
        for sp in self.enrolled:
            self._participant_day(sp, day)
        self.days_done = day
        self._checkpoint()

    def _participant_day(self, sp: SimParticipant, day: int) -> None:
        cfg = self.config
        state = self.states[sp.participant_id]
        pid = sp.participant_id
        rng = np.random.default_rng([cfg.master_seed, 2, sp.index, day])
        assignment = self.server.assignment(pid)
        phase = Phase.BASELINE if day <= cfg.baseline_days else Phase.INTERVENTION
        u_drop = rng.random()
        if day == cfg.baseline_days + 1 and assignment.treated and u_drop < cfg.attrition_rate:
            state.dropped = True
        if state.dropped:
            return
        effects = cfg.effects(assignment.experiment) if (assignment.treated and phase is Phase.INTERVENTION) else None
        day_start = enrolled_at(sp.participant) - 8 * HOUR_MS + (day - 1) * DAY_MS
        day_end = day_start + DAY_MS
        starts = np.sort(day_start + rng.uniform(7 * HOUR_MS, 23 * HOUR_MS, size=rng.poisson(cfg.sessions_per_day)))
        last_end = None
        aapa_today = 0
        for s in starts:
            t = int(s) if last_end is None else max(int(s), last_end + SESSION_GAP_MS)
            if t >= day_end:
                break
            remaining = session_depth(cfg, rng)
            while remaining > 0 and t < day_end:
                batch, _ = generate_feed_batch(pid, sp.political_share, cfg, rng, self.pool, state.cursor,
                                               state.load_seq, t)
                outcome = self.server.rerank(pid, state.load_seq, batch.posts, t)
                state.load_seq += 1
                beh = simulate_behavior(pid, outcome.feed, remaining, t, cfg, rng, self.truth)
                if not beh.viewed:
                    break
                flags = [self.truth[p].is_aapa for p in beh.viewed]
                if outcome.prompt is not None and beh.survey_at is not None and rng.random() < cfg.answer_probability:
                    before = aapa_today + sum(flags[:max(outcome.feed.survey_slot - 1, 0)])
                    at = beh.survey_at + ANSWER_DELAY_MS
                    response = simulate_response(sp, outcome.prompt, before, cfg, rng, effects, at)
                    self.server.answer(pid, response, at)
                aapa_today += sum(flags)
                if phase is Phase.INTERVENTION:
                    for p in beh.viewed:
                        s_ = self.truth[p]
                        state.intervention_views += 1
                        if s_.is_political:
                            for f, on in enumerate(s_.factors):
                                state.factor_views[f] += on
                self.server.ingest(pid, beh.events)
                remaining -= len(beh.viewed)
                t = beh.end + FETCH_LATENCY_MS
            last_end = t

    def finish(self) -> None:
        """Post-experiment surveys for everyone still active, then run metadata."""
        cfg = self.config
        for sp in self.enrolled:
            state = self.states[sp.participant_id]
            if state.dropped:
                continue
            a = self.server.assignment(sp.participant_id)
            rng = np.random.default_rng([cfg.master_seed, 4, sp.index])
            n = max(state.intervention_views, 1)
            fractions = [v / n for v in state.factor_views]
            answers = post_survey(sp, fractions, cfg, rng, cfg.effects(a.experiment) if a.treated else None)
            self.server.record_survey(sp.participant_id, "post", answers)
        self.store.flush()
        self.store.write_json("ground_truth.json", GroundTruth.of(cfg).to_dict())
        self.store.write_json("config.json", cfg.to_dict())

    def bundle(self) -> StudyBundle:
        return StudyBundle(self.config, self.study_config, self.store, self.server, self.population,
                           GroundTruth.of(self.config), self.days_done, self.root)


def run_study(config: SimConfig, out: Optional[str | Path] = None, stop_after_day: Optional[int] = None,
              backend=None) -> StudyBundle:
    """Simulate the full study; with ``out`` every log and table is written there.

    If ``out`` already holds a checkpoint the run resumes after its last
    completed day. ``stop_after_day`` halts early (used to exercise recovery).
    """
    runner = StudyRunner(config, out, backend)
    if runner.days_done == 0 and not runner.enrolled:
        runner.screen_and_enroll()
    last = config.days if stop_after_day is None else min(stop_after_day, config.days)
    for day in range(runner.days_done + 1, last + 1):
        runner.run_day(day)
    if runner.days_done >= config.days:
        if not runner.finished:
            runner.finish()
            runner.finished = True
            runner._checkpoint(finished=True)
        if runner.root is not None:
            from ..analysis import write_tables
            write_tables(runner.bundle(), runner.root / "tables")
            write_manifest(runner.root, config)
    return runner.bundle()


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(root: Path, config: SimConfig) -> dict:
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "seed": config.master_seed,
        "config_sha256": config.digest(),
        "files": {str(p.relative_to(root)): file_digest(p) for p in files},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return manifest
