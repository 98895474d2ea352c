"""Two-stage scoring: political pre-filter, then eight factor prompts per chunk."""
from __future__ import annotations

import hashlib
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..domain import AAPA_THRESHOLD, N_FACTORS, AapaScore, Post, assemble_scoring_text
from ..errors import EmptyBatch
from .prompts import MAX_CHUNK, build_factor_prompt, chunk_messages, parse_factor_response

logger = logging.getLogger("feedlab.scoring")

DEFAULT_TIMEOUT_MS = 8000
SCREENING_THRESHOLD = 0.05


def content_hash(text: str) -> int:
    """Stable 64-bit hash of an assembled text (collisions tolerated)."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


class ScoreCache:
    def __init__(self):
        self._data: dict[int, AapaScore] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._data)

    def get(self, text: str) -> Optional[AapaScore]:
        key = content_hash(text)
        with self._lock:
            score = self._data.get(key)
            if score is None:
                self.misses += 1
            else:
                self.hits += 1
            return score

    def peek(self, text: str) -> Optional[AapaScore]:
        """Look up without touching the hit/miss counters."""
        with self._lock:
            return self._data.get(content_hash(text))

    def load(self, key: int, score: AapaScore) -> None:
        with self._lock:
            self._data[key] = score

    def put(self, text: str, score: AapaScore) -> AapaScore:
        with self._lock:
            return self._data.setdefault(content_hash(text), score)


@dataclass
class ScoringDiagnostics:
    cache_hits: int = 0
    cache_misses: int = 0
    requests: int = 0
    timeouts: int = 0
    events: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"cache_hits": self.cache_hits, "cache_misses": self.cache_misses,
                "requests": self.requests, "timeouts": self.timeouts}


def is_political(text: str, backend) -> bool:
    if not text.strip():
        return False
    return bool(backend.classify_political(text))


def political_fraction(posts: Sequence[Post], backend) -> float:
    content = [p for p in posts if not p.is_ad]
    if not content:
        raise EmptyBatch("no non-ad posts to screen")
    n_pol = sum(is_political(assemble_scoring_text(p), backend) for p in content)
    return n_pol / len(content)


def qualifies(fraction: float) -> bool:
    return fraction >= SCREENING_THRESHOLD


def is_aapa(score: AapaScore) -> bool:
    return score.count >= AAPA_THRESHOLD


def score_posts(posts: Iterable[Post], backend, cache: Optional[ScoreCache] = None,
                timeout_ms: float = DEFAULT_TIMEOUT_MS,
                diagnostics: Optional[ScoringDiagnostics] = None) -> dict[str, AapaScore]:
    """Score every non-ad post; returns ``post_id -> AapaScore``.

    Never raises on backend slowness: a factor prompt that misses the
    deadline leaves that factor false for its whole chunk and is logged as
    a ``Timeout`` event.
    """
    diag = diagnostics if diagnostics is not None else ScoringDiagnostics()
    texts: dict[str, str] = {}
    for p in posts:
        if not p.is_ad:
            texts[p.post_id] = assemble_scoring_text(p)

    by_text: dict[str, AapaScore] = {}
    pending: list[str] = []
    for text in dict.fromkeys(texts.values()):
        cached = cache.get(text) if cache is not None else None
        if cached is not None:
            diag.cache_hits += 1
            by_text[text] = cached
        else:
            diag.cache_misses += 1
            pending.append(text)

    political = []
    for text in pending:
        if is_political(text, backend):
            political.append(text)
        else:
            by_text[text] = AapaScore.non_political()
            if cache is not None:
                cache.put(text, by_text[text])

    if political:
        ids = [f"m{i}" for i in range(len(political))]
        items = list(zip(ids, political))
        chunks = chunk_messages(items, MAX_CHUNK)
        jobs = [(ci, f) for ci in range(len(chunks)) for f in range(N_FACTORS)]
        answers, failed = _dispatch(backend, chunks, jobs, timeout_ms, diag)
        degraded_ids = set()
        for ci in failed:
            degraded_ids.update(mid for mid, _ in chunks[ci])
        for mid, text in items:
            factors = tuple(answers.get((mid, f), False) for f in range(N_FACTORS))
            score = AapaScore(factors=factors, is_political=True)
            by_text[text] = score
            if cache is not None and mid not in degraded_ids:
                cache.put(text, score)

    return {pid: by_text[text] for pid, text in texts.items()}


def _dispatch(backend, chunks, jobs, timeout_ms, diag):
    """Run factor prompts, one per (chunk, factor) job, under a deadline."""
    answers: dict[tuple[str, int], bool] = {}
    failed_chunks: set[int] = set()
    diag.requests += len(jobs)

    def handle(ci, f, raw):
        events_before = len(diag.events)
        parsed = parse_factor_response(raw, [mid for mid, _ in chunks[ci]], diag.events)
        if len(diag.events) > events_before:
            failed_chunks.add(ci)
        for mid, yes in parsed.items():
            answers[(mid, f)] = yes

    def timed_out(ci, f):
        diag.timeouts += 1
        failed_chunks.add(ci)
        diag.events.append({"event": "Timeout", "chunk": ci, "factor": f"v{f + 1}"})
        logger.warning("Timeout: factor v%d for chunk %d exceeded %.0f ms", f + 1, ci, timeout_ms)

    if getattr(backend, "inline", False):
        for ci, f in jobs:
            t0 = time.perf_counter()
            raw = backend.complete(build_factor_prompt(f, chunks[ci]))
            if (time.perf_counter() - t0) * 1000.0 > timeout_ms:
                timed_out(ci, f)
            else:
                handle(ci, f, raw)
        return answers, failed_chunks

    wave = max(1, int(getattr(backend, "max_concurrency", len(jobs))))
    for start in range(0, len(jobs), wave):
        batch = jobs[start:start + wave]
        pool = ThreadPoolExecutor(max_workers=len(batch), thread_name_prefix="feedlab-score")
        try:
            futures = {pool.submit(backend.complete, build_factor_prompt(f, chunks[ci])): (ci, f)
                       for ci, f in batch}
            done, not_done = wait(futures, timeout=timeout_ms / 1000.0)
            for fut in futures:
                ci, f = futures[fut]
                if fut in not_done:
                    timed_out(ci, f)
                    continue
                exc = fut.exception()
                if exc is not None:
                    failed_chunks.add(ci)
                    diag.events.append({"event": "BackendError", "chunk": ci, "factor": f"v{f + 1}",
                                        "error": str(exc)})
                    logger.warning("BackendError: factor v%d chunk %d: %s", f + 1, ci, exc)
                    continue
                handle(ci, f, fut.result())
        finally:
            pool.shutdown(wait=False, cancel_futures=True)
    return answers, failed_chunks
