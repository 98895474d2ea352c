"""In-feed survey scheduling (one decision per intervention event)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import NEGATIVE_EMOTIONS, POSITIVE_EMOTIONS, PromptKind, SurveyPrompt, SurveyResponse
from .errors import PromptExpired, UnknownPrompt

DAY_MS = 86_400_000
LOCKOUT_MS = 10 * 60_000
DEFAULT_P0 = 0.5
PROMPT_TTL_MS = 3_600_000

THERMOMETER_LABELS = {
    0: "Very cold or unfavorable feeling",
    50: "No feeling at all",
    100: "Very warm or favorable feeling",
}
EMOTION_LABELS = {0: "None at all", 25: "A little", 50: "Moderately", 75: "A lot", 100: "Extremely"}


def local_day(now: int, tz_offset_min: int = 0) -> int:
    return (now + tz_offset_min * 60_000) // DAY_MS


@dataclass
class SchedulerState:
    participant_id: str
    p0: float = DEFAULT_P0
    tz_offset_min: int = 0
    day_key: Optional[int] = None
    answered_today: int = 0
    last_answered_at: dict = field(default_factory=dict)
    last_issued_at: dict = field(default_factory=dict)
    outstanding: dict = field(default_factory=dict)
    issued_count: int = 0

    @property
    def current_probability(self) -> float:
        return self.p0 * 2.0 ** (-self.answered_today)

    def roll(self, now: int) -> None:
        day = local_day(now, self.tz_offset_min)
        if self.day_key != day:
            self.day_key = day
            self.answered_today = 0

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "p0": self.p0,
            "tz_offset_min": self.tz_offset_min,
            "day_key": self.day_key,
            "answered_today": self.answered_today,
            "last_answered_at": {k.value: v for k, v in self.last_answered_at.items()},
            "last_issued_at": {k.value: v for k, v in self.last_issued_at.items()},
            "outstanding": [p.to_dict() for p in self.outstanding.values()],
            "issued_count": self.issued_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SchedulerState":
        prompts = [SurveyPrompt.from_dict(p) for p in d.get("outstanding", [])]
        return cls(
            participant_id=d["participant_id"],
            p0=float(d.get("p0", DEFAULT_P0)),
            tz_offset_min=int(d.get("tz_offset_min", 0)),
            day_key=d.get("day_key"),
            answered_today=int(d.get("answered_today", 0)),
            last_answered_at={PromptKind(k): int(v) for k, v in d.get("last_answered_at", {}).items()},
            last_issued_at={PromptKind(k): int(v) for k, v in d.get("last_issued_at", {}).items()},
            outstanding={p.prompt_id: p for p in prompts},
            issued_count=int(d.get("issued_count", 0)),
        )

    def locked(self, kind: PromptKind, now: int) -> bool:
        # A pending (issued, unanswered) prompt also holds the lockout.
        for stamps in (self.last_answered_at, self.last_issued_at):
            t = stamps.get(kind)
            if t is not None and now - t < LOCKOUT_MS:
                return True
        return False


def maybe_issue(state: SchedulerState, now: int, rng: np.random.Generator,
                feed_position: int = 0) -> Optional[SurveyPrompt]:
    state.roll(now)
    # Fixed number of draws per call keeps matched runs on the same stream.
    u_issue, u_kind = rng.random(2)
    pos_i, neg_i = rng.integers(0, 2, size=2)
    if u_issue >= state.current_probability:
        return None
    kind = PromptKind.THERMOMETER if u_kind < 0.5 else PromptKind.EMOTION_PAIR
    if state.locked(kind, now):
        other = PromptKind.EMOTION_PAIR if kind is PromptKind.THERMOMETER else PromptKind.THERMOMETER
        if state.locked(other, now):
            return None
        kind = other
    state.issued_count += 1
    prompt_id = f"{state.participant_id}-s{state.issued_count}"
    if kind is PromptKind.EMOTION_PAIR:
        prompt = SurveyPrompt(prompt_id, kind, feed_position, now,
                              positive=POSITIVE_EMOTIONS[pos_i], negative=NEGATIVE_EMOTIONS[neg_i])
    else:
        prompt = SurveyPrompt(prompt_id, kind, feed_position, now)
    state.outstanding[prompt_id] = prompt
    state.last_issued_at[kind] = now
    return prompt


def record_answer(state: SchedulerState, response: SurveyResponse, now: int,
                  ttl_ms: int = PROMPT_TTL_MS) -> SchedulerState:
    prompt = state.outstanding.get(response.prompt_id)
    if prompt is None:
        raise UnknownPrompt(response.prompt_id)
    if now - prompt.issued_at > ttl_ms:
        del state.outstanding[response.prompt_id]
        raise PromptExpired(response.prompt_id)
    if len(response.values) != prompt.n_values:
        raise ValueError(f"{prompt.kind.value} expects {prompt.n_values} values")
    state.roll(now)
    del state.outstanding[response.prompt_id]
    state.answered_today += 1
    state.last_answered_at[prompt.kind] = now
    return state


def render_metadata(prompt: SurveyPrompt, outparty: str = "the other party") -> dict:
    if prompt.kind is PromptKind.THERMOMETER:
        return {
            "question": f"At the moment, how do you feel about {outparty}?",
            "labels": THERMOMETER_LABELS,
            "initial": None,
            "show_value": False,
        }
    return {
        "question": "How much do you feel",
        "emotions": [prompt.positive, prompt.negative],
        "labels": EMOTION_LABELS,
        "initial": None,
        "show_value": False,
    }
