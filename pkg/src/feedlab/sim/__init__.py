"""Synthetic populations, feeds, behavior and responses with planted effects."""
from .behavior import LoadBehavior, session_depth, simulate_behavior
from .config import EMOTIONS, EffectSet, GroundTruth, SimConfig
from .content import ContentPool, FeedCursor, generate_feed_batch, screening_feed
from .population import SimParticipant, generate_population
from .response import post_survey, simulate_response
from .runner import StudyBundle, StudyRunner, run_study, write_manifest

__all__ = [
    "LoadBehavior", "session_depth", "simulate_behavior", "EMOTIONS", "EffectSet", "GroundTruth", "SimConfig",
    "ContentPool", "FeedCursor", "generate_feed_batch", "screening_feed", "SimParticipant",
    "generate_population", "post_survey", "simulate_response", "StudyBundle", "StudyRunner", "run_study",
    "write_manifest",
]
