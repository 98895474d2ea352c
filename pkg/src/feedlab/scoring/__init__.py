from .backends import DelayedBackend, LexiconOracle, RemoteInferenceClient, ScoringBackend, load_lexicon
from .prompts import (FACTOR_DEFINITIONS, FactorPrompt, build_factor_prompt, chunk_messages,
                      parse_factor_response)
from .scorer import (ScoreCache, ScoringDiagnostics, content_hash, is_aapa, is_political,
                     political_fraction, qualifies, score_posts)

__all__ = [
    "DelayedBackend", "LexiconOracle", "RemoteInferenceClient", "ScoringBackend", "load_lexicon",
    "FACTOR_DEFINITIONS", "FactorPrompt", "build_factor_prompt", "chunk_messages",
    "parse_factor_response", "ScoreCache", "ScoringDiagnostics", "content_hash", "is_aapa",
    "is_political", "political_fraction", "qualifies", "score_posts",
]
