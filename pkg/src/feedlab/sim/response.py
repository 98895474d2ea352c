"""Dose-response model for in-feed and post-experiment survey answers."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..domain import NEGATIVE_EMOTIONS, PromptKind, SurveyPrompt, SurveyResponse
from .config import EffectSet, SimConfig
from .population import SimParticipant


def clamp_score(v: float) -> int:
    return int(min(100, max(0, round(v))))


def thermometer_value(sp: SimParticipant, exposure: float, effect: float, config: SimConfig, noise: float) -> float:
    """Latent feeling, shifted by the planted effect and lowered by recent AAPA exposure."""
    return sp.thermometer + effect - config.dose_coefficient * exposure + noise


def emotion_value(sp: SimParticipant, emotion: str, exposure: float, effect: float, config: SimConfig,
                  noise: float) -> float:
    sign = 1.0 if emotion in NEGATIVE_EMOTIONS else -1.0
    return sp.emotions[emotion] + effect + sign * config.dose_coefficient * exposure + noise


def simulate_response(sp: SimParticipant, prompt: SurveyPrompt, exposure: float, config: SimConfig,
                      rng: np.random.Generator, effects: EffectSet | None = None,
                      answered_at: int = 0) -> SurveyResponse:
    """Answer an outstanding prompt; ``effects`` is None outside the treated condition."""
    z = rng.standard_normal(2) * config.noise_sd
    if prompt.kind is PromptKind.THERMOMETER:
        eff = effects.thermometer_infeed if effects else 0.0
        values = (clamp_score(thermometer_value(sp, exposure, eff, config, z[0])),)
    else:
        values = tuple(
            clamp_score(emotion_value(sp, e, exposure, effects.emotion(e) if effects else 0.0, config, z[i]))
            for i, e in enumerate((prompt.positive, prompt.negative)))
    return SurveyResponse(prompt.prompt_id, values, answered_at)


def post_survey(sp: SimParticipant, fractions: Sequence[float], config: SimConfig, rng: np.random.Generator,
                effects: EffectSet | None = None) -> dict:
    """Post-experiment thermometer and emotions; factor slopes act on per-factor view fractions."""
    z = rng.standard_normal(5) * config.noise_sd
    slope = float(np.dot(config.factor_slopes, fractions)) if len(fractions) else 0.0
    eff = effects.thermometer_post if effects else 0.0
    out = {"thermometer": float(clamp_score(sp.thermometer + eff + slope + z[0]))}
    for i, e in enumerate(sorted(sp.emotions)):
        out[e] = float(clamp_score(emotion_value(sp, e, 0.0, effects.emotion(e) if effects else 0.0, config, z[i + 1])))
    return out
