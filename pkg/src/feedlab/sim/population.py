"""Synthetic participants with latent attitudes and feed composition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import Participant, Party, Platform
from .config import EMOTIONS, SimConfig


@dataclass(frozen=True)
class SimParticipant:
    index: int
    participant: Participant
    political_share: float
    thermometer: float  # latent out-party feeling
    emotions: dict       # latent emotion levels

    @property
    def participant_id(self) -> str:
        return self.participant.participant_id


def participant_id(index: int) -> str:
    return f"P{index:05d}"


def generate_population(config: SimConfig, rng: np.random.Generator) -> list[SimParticipant]:
    """Participants with party, platform, latent states and a pre-experiment survey."""
    n = config.n_participants
    c = config.political_concentration
    a, b = config.political_fraction * c, (1.0 - config.political_fraction) * c
    out = []
    for i in range(n):
        party = Party.DEMOCRAT if rng.random() < config.democrat_share else Party.REPUBLICAN
        platform = Platform.CLOUDRESEARCH if rng.random() < config.platform_b_share else Platform.BOVITZ
        tz = int(rng.choice(config.tz_offsets_min))
        share = float(rng.beta(a, b)) if 0 < config.political_fraction < 1 else config.political_fraction
        thermo = float(rng.normal(config.thermometer_mean, config.thermometer_sd))
        emotions = {e: float(rng.normal(config.emotion_means[e], config.emotion_sd)) for e in EMOTIONS}
        pre = {"thermometer": _clamp(thermo + rng.normal(0.0, config.pre_noise_sd))}
        for e in EMOTIONS:
            pre[e] = _clamp(emotions[e] + rng.normal(0.0, config.pre_noise_sd))
        p = Participant(participant_id(i), party, platform, pre, tz)
        out.append(SimParticipant(i, p, share, thermo, emotions))
    return out


def _clamp(v: float) -> float:
    return float(min(100.0, max(0.0, round(v, 2))))
