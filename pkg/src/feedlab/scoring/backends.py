"""Scoring backends: an offline lexicon oracle and a remote HTTP client."""
from __future__ import annotations

import itertools
import json
import os
import re
import threading
import time
from functools import lru_cache
from importlib import resources
from typing import Optional, Protocol, Sequence

from ..errors import BackendUnavailable
from .prompts import POLITICAL_PROMPT, parse_political_answer, parse_prompt


class ScoringBackend(Protocol):
    max_concurrency: int
    expected_latency_ms: float
    inline: bool

    def classify_political(self, text: str) -> bool: ...

    def complete(self, prompt: str) -> str: ...


@lru_cache(maxsize=None)
def load_lexicon() -> dict:
    with resources.files("feedlab.scoring").joinpath("lexicon.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


def _normalize(text: str) -> str:
    return text.replace("’", "'").replace("‘", "'").lower()


def _compile(phrases: Sequence[str]) -> re.Pattern:
    alts = "|".join(re.escape(p.lower()) for p in sorted(phrases, key=len, reverse=True))
    return re.compile(rf"(?<!\w)(?:{alts})(?!\w)")


class LexiconOracle:
    """Deterministic offline backend driven by per-factor phrase tables.

    It speaks the same text protocol as a remote model: it parses the factor
    prompt, matches each message against that factor's phrases and answers
    with a JSON array of YES/NO objects.
    """

    max_concurrency = 64
    expected_latency_ms = 0.0
    inline = True

    def __init__(self, lexicon: Optional[dict] = None):
        lex = lexicon or load_lexicon()
        self.political_re = _compile(lex["political"])
        self.factor_res = [_compile(lex["factors"][f"v{i + 1}"]) for i in range(8)]
        self._lock = threading.Lock()
        self.requests = 0
        self.political_requests = 0

    def is_political_text(self, text: str) -> bool:
        return bool(self.political_re.search(_normalize(text)))

    def factor_present(self, factor: int, text: str) -> bool:
        return bool(self.factor_res[factor].search(_normalize(text)))

    def factors_of(self, text: str) -> tuple[bool, ...]:
        t = _normalize(text)
        return tuple(bool(r.search(t)) for r in self.factor_res)

    def classify_political(self, text: str) -> bool:
        with self._lock:
            self.political_requests += 1
        return self.is_political_text(text)

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.requests += 1
        factor, messages = parse_prompt(prompt)
        answers = [{"id": mid, "answer": "YES" if self.factor_present(factor, msg) else "NO"}
                   for mid, msg in messages]
        return json.dumps(answers)


class DelayedBackend:
    """Wraps a backend and sleeps before answering selected factor prompts.

    ``factors`` limits the delay to those 0-based factor indices; ``release``
    can be set to end outstanding sleeps early (tests use it to avoid
    leaving threads behind).
    """

    inline = False

    def __init__(self, inner, delay_ms: float, factors: Optional[set[int]] = None):
        self.inner = inner
        self.delay_ms = delay_ms
        self.factors = factors
        self.max_concurrency = inner.max_concurrency
        self.expected_latency_ms = inner.expected_latency_ms + delay_ms
        self.release = threading.Event()

    @property
    def requests(self):
        return self.inner.requests

    def classify_political(self, text: str) -> bool:
        return self.inner.classify_political(text)

    def complete(self, prompt: str) -> str:
        factor, _ = parse_prompt(prompt)
        if self.factors is None or factor in self.factors:
            self.release.wait(self.delay_ms / 1000.0)
        return self.inner.complete(prompt)


class RemoteInferenceClient:
    """HTTP client for a hosted text model.

    Posts ``{"prompt", "seed"}`` JSON to ``SCORER_URL`` with a bearer token
    taken round-robin from ``SCORER_TOKENS``. The provider may answer with a
    JSON body carrying ``text`` / ``output`` or with a raw text body.
    """

    inline = False

    def __init__(self, url: Optional[str] = None, tokens: Optional[Sequence[str]] = None, *,
                 seed: int = 42, max_concurrency: int = 32, timeout_s: float = 30.0,
                 expected_latency_ms: float = 2000.0, transport=None):
        import httpx

        self.url = url or os.environ.get("SCORER_URL")
        if not self.url:
            raise BackendUnavailable("SCORER_URL is not set")
        if tokens is None:
            tokens = [t.strip() for t in os.environ.get("SCORER_TOKENS", "").split(",") if t.strip()]
        self._tokens = itertools.cycle(list(tokens) or [""])
        self._token_lock = threading.Lock()
        self.seed = seed
        self.max_concurrency = max_concurrency
        self.expected_latency_ms = expected_latency_ms
        limits = httpx.Limits(max_connections=max_concurrency, max_keepalive_connections=max_concurrency)
        self._client = httpx.Client(timeout=timeout_s, limits=limits, transport=transport)
        self._count_lock = threading.Lock()
        self.requests = 0
        self.political_requests = 0

    def _next_token(self) -> str:
        with self._token_lock:
            return next(self._tokens)

    def _post(self, prompt: str) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        token = self._next_token()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self._client.post(self.url, json={"prompt": prompt, "seed": self.seed}, headers=headers)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendUnavailable(str(exc)) from exc
        try:
            body = resp.json()
        except ValueError:
            return resp.text
        if isinstance(body, dict):
            for key in ("text", "output", "completion"):
                if key in body:
                    return str(body[key])
            return json.dumps(body)
        return json.dumps(body)

    def classify_political(self, text: str) -> bool:
        with self._count_lock:
            self.political_requests += 1
        return parse_political_answer(self._post(POLITICAL_PROMPT + "\n\n" + text))

    def complete(self, prompt: str) -> str:
        with self._count_lock:
            self.requests += 1
        return self._post(prompt)

    def close(self):
        self._client.close()


def measured(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, (time.perf_counter() - t0) * 1000.0
