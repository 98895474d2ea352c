"""Simulation-based power for the post-survey and in-feed estimators."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

from ..errors import NonConvergence
from .linear import ols_ate
from .lmm import lmm_ate


@dataclass(frozen=True)
class PowerVariances:
    """Pilot-scale variance settings for the thermometer outcome."""

    sigma_u: float = 15.0
    sigma_e: float = 12.0
    responses: float = 8.0
    baseline_responses: int = 4
    mu: float = 40.0
    platform_share: float = 0.35


@dataclass
class PowerResult:
    power: float
    rejections: int
    n_sims: int
    effect: float
    n: int
    alpha: float
    model: str
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return asdict(self)


def _simulate_lmm(rng: np.random.Generator, effect: float, n: int, v: PowerVariances):
    treat = rng.permutation(np.arange(n) % 2).astype(np.float64)
    platform = (rng.random(n) < v.platform_share).astype(np.float64)
    u = rng.standard_normal(n) * v.sigma_u
    base_noise = rng.standard_normal((n, v.baseline_responses)).mean(axis=1) * v.sigma_e
    baseline = v.mu + u + base_noise
    counts = 1 + rng.poisson(max(v.responses - 1.0, 0.0), size=n)
    pid = np.repeat(np.arange(n), counts)
    eps = rng.standard_normal(len(pid)) * v.sigma_e
    y = v.mu + effect * treat[pid] + u[pid] + eps
    return lmm_ate(pid, y, treat[pid], baseline[pid], platform[pid])


def _simulate_ols(rng: np.random.Generator, effect: float, n: int, v: PowerVariances):
    treat = rng.permutation(np.arange(n) % 2).astype(np.float64)
    platform = (rng.random(n) < v.platform_share).astype(np.float64)
    u = rng.standard_normal(n) * v.sigma_u
    pre = v.mu + u + rng.standard_normal(n) * v.sigma_e
    post = v.mu + effect * treat + u + rng.standard_normal(n) * v.sigma_e
    return ols_ate(post, treat, pre, platform)


_MODELS = {"lmm": _simulate_lmm, "ols": _simulate_ols}


def power_simulation(effect: float, n: int, variances: PowerVariances | None = None, n_sims: int = 1000,
                     alpha: float = 0.05, seed: int = 0, model: str = "lmm") -> PowerResult:
    """Share of simulated studies whose treatment p-value falls below ``alpha``.

    Replicate ``s`` always draws from ``default_rng([seed, s])``, so different
    effects and sample sizes share random numbers.
    """
    if n_sims < 100:
        raise ValueError("n_sims must be at least 100")
    if n < 4:
        raise ValueError("n must be at least 4")
    v = variances or PowerVariances()
    sim = _MODELS[model]
    hits = 0
    for s in range(n_sims):
        rng = np.random.default_rng([seed, s])
        try:
            res = sim(rng, effect, n, v)
        except NonConvergence as exc:
            res = exc.best
            if res is None:
                continue
        if res.pvalue("treatment") < alpha:
            hits += 1
    lo, hi = sps.binomtest(hits, n_sims).proportion_ci(0.95, method="exact")
    return PowerResult(hits / n_sims, hits, n_sims, float(effect), int(n), alpha, model, float(lo), float(hi))
