"""Simulation configuration and the ground truth recorded with every run."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ..domain import N_FACTORS, NEGATIVE_EMOTIONS, POSITIVE_EMOTIONS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EMOTIONS = POSITIVE_EMOTIONS + NEGATIVE_EMOTIONS

# relative prevalence of each factor among political posts (v1..v8)
DEFAULT_FACTOR_WEIGHTS = (0.20, 0.06, 0.04, 0.06, 0.10, 0.12, 0.22, 0.20)


@dataclass(frozen=True)
class EffectSet:
    """Planted treatment effects for one experiment."""

    thermometer_infeed: float = 0.0
    thermometer_post: float = 0.0
    emotions: Mapping[str, float] = field(default_factory=dict)

    def emotion(self, name: str) -> float:
        return float(self.emotions.get(name, 0.0))

    def to_dict(self) -> dict:
        return {"thermometer_infeed": self.thermometer_infeed, "thermometer_post": self.thermometer_post,
                "emotions": {k: float(self.emotions.get(k, 0.0)) for k in EMOTIONS}}


def _reduce_default() -> EffectSet:
    return EffectSet(3.24, 2.11, {"Angry": -1.5, "Sad": -1.0})


def _increase_default() -> EffectSet:
    return EffectSet(-2.56, -2.48, {"Angry": 1.5, "Sad": 1.0})


@dataclass(frozen=True)
class SimConfig:
    n_participants: int = 200
    master_seed: int = 0
    democrat_share: float = 0.661
    platform_b_share: float = 0.35
    tz_offsets_min: tuple[int, ...] = (-480, -420, -360, -300, -240)
    days: int = 10
    baseline_days: int = 3

    # feed composition
    political_fraction: float = 0.32
    political_concentration: float = 10.0
    aapa_of_political: float = 0.331
    factor_weights: tuple[float, ...] = DEFAULT_FACTOR_WEIGHTS
    content_per_load: int = 30
    ads_per_load: int = 5
    pool_size: int = 6000
    classifier_noise: float = 0.0

    # behavior
    sessions_per_day: float = 1.5
    mean_session_views: float = 105.0
    dwell_median_ms: float = 9000.0
    dwell_sigma: float = 1.0
    favorite_rate: float = 0.0429
    repost_rate: float = 0.00484
    reply_rate: float = 0.002
    political_favorite_multiplier: float = 5.07 / 4.29
    political_repost_multiplier: float = 0.677 / 0.484
    answer_probability: float = 0.9
    attrition_rate: float = 0.0

    # responses
    thermometer_mean: float = 40.0
    thermometer_sd: float = 12.0
    emotion_means: Mapping[str, float] = field(
        default_factory=lambda: {"Excited": 35.0, "Calm": 50.0, "Angry": 30.0, "Sad": 25.0})
    emotion_sd: float = 10.0
    noise_sd: float = 10.0
    pre_noise_sd: float = 6.0
    dose_coefficient: float = 0.0
    factor_slopes: tuple[float, ...] = (0.0,) * N_FACTORS

    effects_reduce: EffectSet = field(default_factory=_reduce_default)
    effects_increase: EffectSet = field(default_factory=_increase_default)

    quota_ratio: tuple[int, int] = (600, 500)
    survey_p0: float = 0.5

    def __post_init__(self):
        for name in ("democrat_share", "platform_b_share", "political_fraction", "aapa_of_political",
                     "favorite_rate", "repost_rate", "reply_rate", "answer_probability", "attrition_rate",
                     "classifier_noise", "survey_p0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} must lie in [0, 1]")
        for name in ("thermometer_sd", "emotion_sd", "noise_sd", "pre_noise_sd", "dwell_sigma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_participants < 0:
            raise ValueError("n_participants must be nonnegative")
        if len(self.factor_weights) != N_FACTORS or len(self.factor_slopes) != N_FACTORS:
            raise ValueError(f"factor_weights and factor_slopes need {N_FACTORS} entries")
        if not 0 < self.baseline_days < self.days:
            raise ValueError("baseline_days must be positive and below days")
        if self.mean_session_views < 1:
            raise ValueError("mean_session_views must be at least 1")

    def effects(self, experiment) -> EffectSet:
        from ..domain import Experiment
        return self.effects_reduce if experiment is Experiment.REDUCE else self.effects_increase

    def quotas(self) -> tuple[int, int]:
        """Quotas scaled to ``n_participants`` in the configured ratio, covering everyone."""
        a, b = self.quota_ratio
        qr = -(-self.n_participants * a // (a + b))
        qi = -(-self.n_participants * b // (a + b))
        return qr, qi

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["effects_reduce"] = self.effects_reduce.to_dict()
        d["effects_increase"] = self.effects_increase.to_dict()
        d["emotion_means"] = dict(self.emotion_means)
        return d

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("effects_reduce", "effects_increase"):
            if key in kw and not isinstance(kw[key], EffectSet):
                e = kw[key]
                kw[key] = EffectSet(float(e.get("thermometer_infeed", 0.0)), float(e.get("thermometer_post", 0.0)),
                                    dict(e.get("emotions", {})))
        for key in ("tz_offsets_min", "factor_weights", "factor_slopes", "quota_ratio"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)

    @classmethod
    def from_toml(cls, path: str | Path) -> "SimConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_dict(data.get("sim", data))


@dataclass(frozen=True)
class GroundTruth:
    effects: dict
    factor_slopes: tuple[float, ...]
    dose_coefficient: float
    seed: int

    @classmethod
    def of(cls, config: SimConfig) -> "GroundTruth":
        return cls({"Reduce": config.effects_reduce.to_dict(), "Increase": config.effects_increase.to_dict()},
                   tuple(config.factor_slopes), config.dose_coefficient, config.master_seed)

    def to_dict(self) -> dict:
        return {"effects": self.effects, "factor_slopes": list(self.factor_slopes),
                "dose_coefficient": self.dose_coefficient, "seed": self.seed}
