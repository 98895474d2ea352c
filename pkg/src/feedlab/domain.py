"""Core value types: posts, feed batches, scores, participants and events.

Every type here is a frozen dataclass and round-trips through plain JSON
dicts (``to_dict`` / ``from_dict``) with snake_case field names, which is
the on-disk JSON Lines format.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Optional

from .errors import DuplicatePostId, EmptyBatch

N_FACTORS = 8
AAPA_THRESHOLD = 4

FACTOR_NAMES = (
    "partisan_animosity",
    "undemocratic_practices",
    "partisan_violence",
    "undemocratic_candidates",
    "opposition_to_bipartisanship",
    "social_distrust",
    "social_distance",
    "biased_evaluation_of_politicized_facts",
)

LINK_PREFIX = "Attached article's description: "
QUOTE_PREFIX = "Quoting: "
_URL_RE = re.compile(r"\s*https?://\S+")


class Party(str, enum.Enum):
    DEMOCRAT = "Democrat"
    REPUBLICAN = "Republican"

    @property
    def outparty(self) -> "Party":
        return Party.REPUBLICAN if self is Party.DEMOCRAT else Party.DEMOCRAT


class Platform(str, enum.Enum):
    BOVITZ = "BovitzLike"
    CLOUDRESEARCH = "CloudResearchLike"


class Experiment(str, enum.Enum):
    REDUCE = "Reduce"
    INCREASE = "Increase"


class Arm(str, enum.Enum):
    TREATMENT = "Treatment"
    CONTROL = "Control"


class EventKind(str, enum.Enum):
    VIEW = "View"
    FAVORITE = "Favorite"
    REPOST = "Repost"
    REPLY = "Reply"
    NEW_POST = "NewPost"
    FEED_LOAD = "FeedLoad"
    HEARTBEAT = "Heartbeat"


class PromptKind(str, enum.Enum):
    THERMOMETER = "Thermometer"
    EMOTION_PAIR = "EmotionPair"


POSITIVE_EMOTIONS = ("Excited", "Calm")
NEGATIVE_EMOTIONS = ("Angry", "Sad")


@dataclass(frozen=True)
class LinkPreview:
    title: str
    description: str


@dataclass(frozen=True)
class Post:
    post_id: str
    author_id: str
    text: str
    is_ad: bool = False
    link_preview: Optional[LinkPreview] = None
    quoted_text: Optional[str] = None
    created_at: int = 0

    def to_dict(self) -> dict:
        lp = self.link_preview
        return {
            "post_id": self.post_id,
            "author_id": self.author_id,
            "text": self.text,
            "is_ad": self.is_ad,
            "link_preview": None if lp is None else {"title": lp.title, "description": lp.description},
            "quoted_text": self.quoted_text,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Post":
        lp = d.get("link_preview")
        if lp is not None and not isinstance(lp, LinkPreview):
            lp = LinkPreview(title=lp.get("title", ""), description=lp.get("description", ""))
        return cls(
            post_id=str(d["post_id"]),
            author_id=str(d.get("author_id", "")),
            text=d.get("text", ""),
            is_ad=bool(d.get("is_ad", False)),
            link_preview=lp,
            quoted_text=d.get("quoted_text"),
            created_at=int(d.get("created_at", 0)),
        )


@dataclass(frozen=True)
class FeedBatch:
    participant_id: str
    load_seq: int
    posts: tuple[Post, ...]
    fetched_at: int = 0

    def __len__(self) -> int:
        return len(self.posts)

    @property
    def positions(self) -> list[int]:
        return list(range(1, len(self.posts) + 1))

    @property
    def content(self) -> list[Post]:
        return [p for p in self.posts if not p.is_ad]


@dataclass(frozen=True)
class AapaScore:
    factors: tuple[bool, ...] = (False,) * N_FACTORS
    is_political: bool = False
    count: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.factors) != N_FACTORS:
            raise ValueError(f"expected {N_FACTORS} factors, got {len(self.factors)}")
        if not self.is_political and any(self.factors):
            raise ValueError("non-political posts cannot express AAPA factors")
        object.__setattr__(self, "count", sum(bool(f) for f in self.factors))

    @property
    def is_aapa(self) -> bool:
        return self.count >= AAPA_THRESHOLD

    @classmethod
    def non_political(cls) -> "AapaScore":
        return cls()

    def to_dict(self) -> dict:
        return {"factors": list(self.factors), "count": self.count, "is_political": self.is_political}

    @classmethod
    def from_dict(cls, d: dict) -> "AapaScore":
        return cls(factors=tuple(bool(v) for v in d["factors"]), is_political=bool(d["is_political"]))


@dataclass(frozen=True)
class Participant:
    participant_id: str
    party: Party
    platform: Platform
    pre_survey: dict = field(default_factory=dict)
    local_tz_offset: int = 0

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "party": self.party.value,
            "platform": self.platform.value,
            "pre_survey": dict(self.pre_survey),
            "local_tz_offset": self.local_tz_offset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Participant":
        return cls(
            participant_id=str(d["participant_id"]),
            party=Party(d["party"]),
            platform=Platform(d["platform"]),
            pre_survey=dict(d.get("pre_survey", {})),
            local_tz_offset=int(d.get("local_tz_offset", 0)),
        )


@dataclass(frozen=True)
class Assignment:
    participant_id: str
    experiment: Experiment
    arm: Arm
    enrolled_at: int

    @property
    def treated(self) -> bool:
        return self.arm is Arm.TREATMENT

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "experiment": self.experiment.value,
            "arm": self.arm.value,
            "enrolled_at": self.enrolled_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Assignment":
        return cls(str(d["participant_id"]), Experiment(d["experiment"]), Arm(d["arm"]), int(d["enrolled_at"]))


@dataclass(frozen=True)
class SurveyPrompt:
    prompt_id: str
    kind: PromptKind
    feed_position: int
    issued_at: int
    positive: Optional[str] = None
    negative: Optional[str] = None

    def __post_init__(self):
        if self.kind is PromptKind.EMOTION_PAIR:
            if self.positive not in POSITIVE_EMOTIONS or self.negative not in NEGATIVE_EMOTIONS:
                raise ValueError("emotion prompts need one positive and one negative emotion")

    @property
    def n_values(self) -> int:
        return 1 if self.kind is PromptKind.THERMOMETER else 2

    def to_dict(self) -> dict:
        return {"prompt_id": self.prompt_id, "kind": self.kind.value, "feed_position": self.feed_position,
                "issued_at": self.issued_at, "positive": self.positive, "negative": self.negative}

    @classmethod
    def from_dict(cls, d: dict) -> "SurveyPrompt":
        return cls(
            prompt_id=str(d["prompt_id"]),
            kind=PromptKind(d["kind"]),
            feed_position=int(d["feed_position"]),
            issued_at=int(d["issued_at"]),
            positive=d.get("positive"),
            negative=d.get("negative"),
        )


@dataclass(frozen=True)
class SurveyResponse:
    prompt_id: str
    values: tuple[int, ...]
    answered_at: int

    def __post_init__(self):
        for v in self.values:
            if not 0 <= v <= 100:
                raise ValueError(f"survey value {v} outside [0, 100]")

    def to_dict(self) -> dict:
        return {"prompt_id": self.prompt_id, "values": list(self.values), "answered_at": self.answered_at}

    @classmethod
    def from_dict(cls, d: dict) -> "SurveyResponse":
        return cls(str(d["prompt_id"]), tuple(int(v) for v in d["values"]), int(d["answered_at"]))


@dataclass(frozen=True)
class EngagementEvent:
    participant_id: str
    kind: EventKind
    at: int
    post_id: Optional[str] = None
    visible_ms: Optional[int] = None
    event_id: Optional[str] = None

    @property
    def qualifying_view(self) -> bool:
        return self.kind is EventKind.VIEW and (self.visible_ms or 0) >= 1000

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "post_id": self.post_id,
            "kind": self.kind.value,
            "visible_ms": self.visible_ms,
            "at": self.at,
            "event_id": self.event_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EngagementEvent":
        vm = d.get("visible_ms")
        return cls(
            participant_id=str(d["participant_id"]),
            kind=EventKind(d["kind"]),
            at=int(d["at"]),
            post_id=d.get("post_id"),
            visible_ms=None if vm is None else int(vm),
            event_id=d.get("event_id"),
        )


def assemble_scoring_text(post: Post) -> str:
    """Build the text sent to the classifiers.

    Link previews replace any URLs in the body; quoted text goes last.
    """
    body = post.text
    parts = []
    if post.link_preview is not None:
        body = _URL_RE.sub("", body)
    if body:
        parts.append(body)
    if post.link_preview is not None:
        lp = post.link_preview
        parts.append(LINK_PREFIX + " ".join(s for s in (lp.title, lp.description) if s))
    if post.quoted_text is not None:
        parts.append(QUOTE_PREFIX + post.quoted_text)
    return " ".join(parts)


def validate_batch(raw: Iterable[Post], participant_id: str, load_seq: int, fetched_at: int = 0) -> FeedBatch:
    posts = tuple(raw)
    if not posts:
        raise EmptyBatch("feed batch has no posts")
    seen = set()
    for p in posts:
        if not p.post_id:
            raise ValueError("post_id must be nonempty")
        if p.post_id in seen:
            raise DuplicatePostId(p.post_id)
        seen.add(p.post_id)
    return FeedBatch(participant_id=participant_id, load_seq=load_seq, posts=posts, fetched_at=fetched_at)


def dumps_jsonl(records: Iterable[Any]) -> str:
    lines = []
    for r in records:
        d = r.to_dict() if hasattr(r, "to_dict") else r
        lines.append(json.dumps(d, sort_keys=True, separators=(",", ":"), ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def iter_jsonl(lines: Iterable[str]) -> Iterator[dict]:
    for line in lines:
        line = line.strip()
        if line:
            yield json.loads(line)
