"""Stateful study server: enrollment, per-load reranking, surveys, and event logs.

All state changes are appended to a :class:`~feedlab.store.Store`, and a
server built with :meth:`StudyServer.restore` over the same logs continues
exactly where the previous one stopped. The HTTP service and the simulator
both drive this class.
"""
from __future__ import annotations

import dataclasses
import hashlib
import logging
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import (AapaScore, Arm, Assignment, EngagementEvent, Experiment, Participant, Party, Post,
                     SurveyPrompt, SurveyResponse, assemble_scoring_text, validate_batch)
from .errors import (DuplicatePostId, EmptyBatch, MalformedBatch, StudyEnded, UnknownParticipant,
                     UnknownPrompt)
from .experiment import EnrollmentState, Phase, StudyConfig, enroll, phase_of, study_day
from .rerank import (DemotionCache, RerankedFeed, UprankInventory, aapa_positions, rerank_increased,
                     rerank_reduced, select_uprank_candidate, serve_load)
from .scoring.backends import LexiconOracle
from .scoring.scorer import DEFAULT_TIMEOUT_MS, ScoreCache, ScoringDiagnostics, content_hash, score_posts
from .store import Store
from .surveys import DEFAULT_P0, PROMPT_TTL_MS, SchedulerState, maybe_issue, record_answer

log = logging.getLogger(__name__)


def participant_key(participant_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(participant_id.encode(), digest_size=8).digest(), "big")


def load_streams(master_seed: int, participant_id: str, load_seq: int) -> tuple[np.random.Generator, ...]:
    """(slot, candidate, survey) generators for one load; identical across arms."""
    ss = np.random.SeedSequence([master_seed, participant_key(participant_id), load_seq])
    return tuple(np.random.default_rng(c) for c in ss.spawn(3))


@dataclass
class LoadOutcome:
    participant_id: str
    load_seq: int
    day: int
    phase: Phase
    feed: RerankedFeed
    prompt: Optional[SurveyPrompt]
    diagnostics: ScoringDiagnostics
    scores: dict

    def items(self) -> list[tuple[str, str]]:
        return [(it.post.post_id, it.origin.value) for it in self.feed.rendered()]


class StudyServer:
    def __init__(self, store: Store, config: StudyConfig = StudyConfig(), backend=None,
                 timeout_ms: float = DEFAULT_TIMEOUT_MS, p0: float = DEFAULT_P0,
                 prompt_ttl_ms: int = PROMPT_TTL_MS):
        self.store = store
        self.config = config
        self.backend = backend if backend is not None else LexiconOracle()
        self.timeout_ms = timeout_ms
        self.p0 = p0
        self.prompt_ttl_ms = prompt_ttl_ms
        self.participants: dict[str, Participant] = {}
        self.enrollment = EnrollmentState()
        self.schedulers: dict[str, SchedulerState] = {}
        self.caches: dict[str, DemotionCache] = {}
        self.inventory = UprankInventory()
        self.inventory_snapshot = UprankInventory()
        self._inventory_seq = 0
        self.served: dict[str, set] = defaultdict(set)
        self.post_scores: dict[str, AapaScore] = {}
        self.score_cache = ScoreCache()
        self._memo: dict[Post, tuple[int, AapaScore]] = {}
        self.event_ids: dict[str, set] = defaultdict(set)
        self.prompt_owner: dict[str, str] = {}
        self._lock = threading.RLock()
        self._plocks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._elocks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        store.write_json("study.json", dataclasses.asdict(config))

    # --- enrollment -------------------------------------------------------
    def enroll(self, participant: Participant, now: int) -> Assignment:
        with self._lock:
            known = self.enrollment.assignments.get(participant.participant_id)
            if known is not None:
                return known
            assignment = enroll(participant, self.config, self.enrollment, now)
            self.participants[participant.participant_id] = participant
            self.schedulers[participant.participant_id] = SchedulerState(
                participant.participant_id, p0=self.p0, tz_offset_min=participant.local_tz_offset)
            self.caches[participant.participant_id] = DemotionCache(participant.participant_id)
            self.store.append("participants", participant.to_dict())
            self.store.append("assignments", assignment.to_dict())
            return assignment

    def assignment(self, participant_id: str) -> Assignment:
        a = self.enrollment.assignments.get(participant_id)
        if a is None:
            raise UnknownParticipant(participant_id)
        return a

    def day_of(self, participant_id: str, now: int) -> int:
        a = self.assignment(participant_id)
        return study_day(now, a.enrolled_at, self.participants[participant_id].local_tz_offset)

    # --- reranking --------------------------------------------------------
    def refresh_inventory(self) -> None:
        """Publish the live inventory to the snapshot used for candidate selection."""
        with self._lock:
            self.inventory_snapshot = self.inventory.snapshot()
            self.store.append("inventory", {"snapshot_upto": self._inventory_seq})

    def _score(self, posts: Sequence[Post], diag: ScoringDiagnostics) -> dict[str, AapaScore]:
        # Posts already scored from a cache-eligible result skip the scorer entirely.
        # Hits count once per distinct text, the same as a score-cache lookup, so a
        # restored server (empty memo, warm cache) reports identical diagnostics.
        scores, fresh, hit_keys = {}, [], set()
        for p in posts:
            if p.is_ad:
                continue
            known = self._memo.get(p)
            if known is None:
                fresh.append(p)
            else:
                hit_keys.add(known[0])
                scores[p.post_id] = known[1]
        if fresh:
            hit_keys -= {content_hash(assemble_scoring_text(p)) for p in fresh if not p.is_ad}
        diag.cache_hits += len(hit_keys)
        if fresh:
            scores.update(score_posts(fresh, self.backend, self.score_cache, self.timeout_ms, diag))
        with self._lock:
            for p in fresh:
                s = scores[p.post_id]
                text = assemble_scoring_text(p)
                key = content_hash(text)
                cached = self.score_cache.peek(text) == s
                if cached:
                    self._memo[p] = (key, s)
                if self.post_scores.get(p.post_id) != s:
                    self.post_scores[p.post_id] = s
                    self.store.append("post_scores", {"post_id": p.post_id, "hash": key,
                                                      "cached": cached, **s.to_dict()})
        return scores

    def _record_inventory(self, batch_posts, scores, participant: Participant, now: int) -> None:
        with self._lock:
            for p in batch_posts:
                s = scores.get(p.post_id)
                if p.is_ad or s is None or not s.is_aapa:
                    continue
                self._inventory_seq += 1
                self.inventory.record(p, s, participant.participant_id, participant.party, now)
                self.store.append("inventory", {"seq": self._inventory_seq, "post": p.to_dict(), **s.to_dict(),
                                                "participant_id": participant.participant_id,
                                                "party": participant.party.value, "at": now})

    def rerank(self, participant_id: str, load_seq: int, posts: Sequence[Post], now: int) -> LoadOutcome:
        assignment = self.assignment(participant_id)
        participant = self.participants[participant_id]
        day = self.day_of(participant_id, now)
        if day > self.config.total_days:
            raise StudyEnded(f"study ended for {participant_id} (day {day})")
        if day < 1:
            raise MalformedBatch("request predates enrollment")
        try:
            batch = validate_batch(posts, participant_id, load_seq, now)
        except (EmptyBatch, DuplicatePostId, ValueError) as exc:
            raise MalformedBatch(str(exc)) from exc
        phase = phase_of(day, self.config)

        with self._plocks[participant_id]:
            diag = ScoringDiagnostics()
            scores = self._score(batch.posts, diag)
            self._record_inventory(batch.posts, scores, participant, now)
            slot_rng, cand_rng, survey_rng = load_streams(self.config.master_seed, participant_id, load_seq)
            arm = assignment.arm if phase is Phase.INTERVENTION else Arm.CONTROL
            sched = self.schedulers[participant_id]
            content_ids = {p.post_id for p in batch.content}
            if assignment.experiment is Experiment.REDUCE:
                event = bool(aapa_positions(batch, scores))
            else:
                event = bool(content_ids)
            prompt = maybe_issue(sched, now, survey_rng) if event else None
            if assignment.experiment is Experiment.REDUCE:
                feed = rerank_reduced(batch, scores, arm, slot_rng, prompt is not None)
            else:
                candidate = None
                if phase is Phase.INTERVENTION:
                    with self._lock:
                        candidate = select_uprank_candidate(self.inventory_snapshot, participant, now, cand_rng,
                                                            seen=self.served[participant_id] | content_ids)
                    if candidate is None:
                        log.info("no uprank candidate for %s load %d", participant_id, load_seq)
                feed = rerank_increased(batch, scores, arm, candidate, slot_rng, prompt is not None)
            cache = self.caches[participant_id]
            cache.begin_load(now)
            feed = serve_load(feed, cache)
            if prompt is not None:
                prompt = dataclasses.replace(prompt, feed_position=feed.survey_slot or 0)
                sched.outstanding[prompt.prompt_id] = prompt
                with self._lock:
                    self.prompt_owner[prompt.prompt_id] = participant_id
            outcome = LoadOutcome(participant_id, load_seq, day, phase, feed, prompt, diag, scores)
            self.served[participant_id].update(it.post.post_id for it in feed.content)
            self.store.append("feeds", {
                "participant_id": participant_id, "load_seq": load_seq, "at": now, "day": day,
                "phase": phase.value, "items": [list(x) for x in outcome.items()], "content": feed.content_ids,
                "survey_slot": feed.survey_slot, "prompt_id": prompt.prompt_id if prompt else None,
                "diagnostics": diag.to_dict(),
            })
            if prompt is not None:
                self.store.append("prompts", {"participant_id": participant_id, "day": day,
                                              "phase": phase.value, **prompt.to_dict()})
            self.store.append("scheduler", sched.to_dict())
            self.store.append("demotion", cache.to_dict())
        self.store.flush()
        return outcome

    # --- events and surveys --------------------------------------------------
    def ingest(self, participant_id: str, events: Sequence[EngagementEvent]) -> tuple[int, int]:
        """Append new events; returns (stored, duplicates)."""
        self.assignment(participant_id)
        for e in events:
            if e.participant_id != participant_id:
                raise MalformedBatch("event participant does not match envelope")
        # events take their own lock so ingestion never holds up a rerank
        with self._elocks[participant_id]:
            seen = self.event_ids[participant_id]
            fresh = []
            base = len(self.store.events.get(participant_id, []))
            for e in events:
                eid = e.event_id if e.event_id is not None else f"{participant_id}-auto-{base + len(fresh)}"
                if eid in seen:
                    continue
                seen.add(eid)
                rec = e.to_dict()
                rec["event_id"] = eid
                rec["seq"] = base + len(fresh)
                fresh.append(rec)
            if fresh:
                self.store.append_events(participant_id, fresh)
        self.store.flush()
        return len(fresh), len(events) - len(fresh)

    def answer(self, participant_id: str, response: SurveyResponse, now: int) -> SurveyPrompt:
        self.assignment(participant_id)
        if self.prompt_owner.get(response.prompt_id) != participant_id:
            raise UnknownPrompt(response.prompt_id)
        with self._plocks[participant_id]:
            sched = self.schedulers[participant_id]
            prompt = sched.outstanding.get(response.prompt_id)
            if prompt is None:
                raise UnknownPrompt(response.prompt_id)
            try:
                record_answer(sched, response, now, self.prompt_ttl_ms)
            finally:
                self.store.append("scheduler", sched.to_dict())
            day = self.day_of(participant_id, now)
            self.store.append("responses", {
                "participant_id": participant_id, "prompt_id": prompt.prompt_id, "kind": prompt.kind.value,
                "positive": prompt.positive, "negative": prompt.negative, "values": list(response.values),
                "answered_at": response.answered_at, "day": day,
                "phase": phase_of(min(max(day, 1), self.config.total_days), self.config).value,
            })
        self.store.flush()
        return prompt

    def record_survey(self, participant_id: str, phase: str, answers: dict) -> None:
        """Store pre-/post-experiment survey answers."""
        self.assignment(participant_id)
        self.store.append("surveys", {"participant_id": participant_id, "phase": phase, **answers})
        self.store.flush()

    # --- recovery ----------------------------------------------------------
    @classmethod
    def restore(cls, store: Store, config: StudyConfig = StudyConfig(), backend=None, **kwargs) -> "StudyServer":
        srv = cls(store, config, backend, **kwargs)
        s = store.streams
        for d in s["participants"]:
            p = Participant.from_dict(d)
            srv.participants[p.participant_id] = p
            srv.schedulers[p.participant_id] = SchedulerState(p.participant_id, p0=srv.p0,
                                                              tz_offset_min=p.local_tz_offset)
            srv.caches[p.participant_id] = DemotionCache(p.participant_id)
        for d in s["assignments"]:
            a = Assignment.from_dict(d)
            srv.enrollment.assignments[a.participant_id] = a
            srv.enrollment.counts[a.experiment] += 1
            srv.enrollment.arrivals += 1
        for d in s["post_scores"]:
            score = AapaScore.from_dict(d)
            srv.post_scores[d["post_id"]] = score
            if d.get("cached"):
                srv.score_cache.load(int(d["hash"]), score)
        mark = 0
        for d in s["inventory"]:
            if "snapshot_upto" in d:
                mark = int(d["snapshot_upto"])
        for d in s["inventory"]:
            if "seq" not in d:
                continue
            post, score = Post.from_dict(d["post"]), AapaScore.from_dict(d)
            args = (post, score, d["participant_id"], Party(d["party"]), int(d["at"]))
            srv.inventory.record(*args)
            if int(d["seq"]) <= mark:
                srv.inventory_snapshot.record(*args)
            srv._inventory_seq = max(srv._inventory_seq, int(d["seq"]))
        for d in s["scheduler"]:
            srv.schedulers[d["participant_id"]] = SchedulerState.from_dict(d)
        for d in s["demotion"]:
            srv.caches[d["participant_id"]] = DemotionCache.from_dict(d)
        for d in s["feeds"]:
            srv.served[d["participant_id"]].update(d["content"])
        for d in s["prompts"]:
            srv.prompt_owner[d["prompt_id"]] = d["participant_id"]
        for pid, evs in store.events.items():
            srv.event_ids[pid].update(e["event_id"] for e in evs)
        return srv
