"""Randomization inference for covariate balance and attrition.

Each test recomputes its statistic under fresh draws from the assignment
mechanism actually used and reports p = (1 + #{T* >= T}) / (1 + n_draws).
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Protocol

import numpy as np

from .. import kernels
from ..errors import AllCovariatesDropped, DegenerateArm, RankDeficient
from .linear import hat_diagonal, hc2_wald

log = logging.getLogger(__name__)

DEFAULT_DRAWS = 10_000
_REL_TOL = 1e-9


class Randomizer(Protocol):
    def draw(self, rng: np.random.Generator, n: int, size: int) -> np.ndarray: ...

    def enumerate(self, n: int) -> Iterator[tuple[np.ndarray, float]]: ...


@dataclass(frozen=True)
class BernoulliRandomizer:
    """Independent coin flips with treatment probability ``p``."""

    p: float = 0.5

    def draw(self, rng, n, size):
        return (rng.random((size, n)) < self.p).astype(np.float64)

    def enumerate(self, n):
        for bits in itertools.product((0.0, 1.0), repeat=n):
            a = np.array(bits)
            k = a.sum()
            yield a, self.p ** k * (1 - self.p) ** (n - k)


@dataclass(frozen=True)
class CompleteRandomizer:
    """Exactly ``n_treated`` units treated, uniformly over subsets."""

    n_treated: int

    def draw(self, rng, n, size):
        keys = rng.random((size, n))
        ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
        return (ranks < self.n_treated).astype(np.float64)

    def enumerate(self, n):
        combos = list(itertools.combinations(range(n), self.n_treated))
        for c in combos:
            a = np.zeros(n)
            a[list(c)] = 1.0
            yield a, 1.0 / len(combos)


@dataclass
class RITestResult:
    observed: float
    n_draws: int
    p: float
    seed: Optional[int]
    statistic: str = ""
    dropped: tuple = ()


def _count_ge(draw_stats: np.ndarray, observed: float) -> int:
    if np.isinf(observed):
        return int(np.count_nonzero(draw_stats == observed))
    thresh = observed - _REL_TOL * max(1.0, abs(observed))
    return int(np.count_nonzero(draw_stats >= thresh))


def _result(observed, draw_stats, n_draws, seed, name, dropped=()):
    p = (1 + _count_ge(draw_stats, observed)) / (1 + n_draws)
    return RITestResult(float(observed), n_draws, float(p), seed, name, tuple(dropped))


def _drop_constant(X: np.ndarray, names=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    keep = np.ptp(X, axis=0) > 0 if X.shape[0] else np.zeros(X.shape[1], bool)
    labels = list(names) if names is not None else [f"x{i}" for i in range(X.shape[1])]
    dropped = [labels[i] for i in np.flatnonzero(~keep)]
    if dropped:
        log.info("dropping zero-variance covariates: %s", ", ".join(dropped))
    return X[:, keep], dropped


def _constant_rows(T: np.ndarray) -> np.ndarray:
    return np.ptp(T, axis=1) == 0


def balance_statistic(X: np.ndarray, treatment) -> float:
    design = np.column_stack([np.ones(X.shape[0]), X])
    t = np.asarray(treatment, dtype=np.float64)
    if np.ptp(t) == 0:
        return 0.0
    return hc2_wald(t, design, range(1, design.shape[1]))


def ri_covariate_balance(covariates, treatment, randomizer: Randomizer, n_draws: int = DEFAULT_DRAWS,
                         seed: Optional[int] = None, names=None) -> RITestResult:
    """Robust Wald test of treatment ~ covariates against re-randomized treatment."""
    X, dropped = _drop_constant(covariates, names)
    if X.shape[1] == 0:
        raise AllCovariatesDropped("every covariate has zero variance")
    design = np.column_stack([np.ones(X.shape[0]), X])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise RankDeficient("covariates are collinear")
    t = np.asarray(treatment, dtype=np.float64)
    h = hat_diagonal(design)
    observed = balance_statistic(X, t)
    rng = np.random.default_rng(seed)
    T = randomizer.draw(rng, len(t), n_draws)
    stats = kernels.hc2_wald_draws(design, T, h, 1)
    stats[_constant_rows(T)] = 0.0
    return _result(observed, stats, n_draws, seed, "hc2_wald", dropped)


def ri_attrition_rate(attrition, treatment, randomizer: Randomizer, n_draws: int = DEFAULT_DRAWS,
                      seed: Optional[int] = None) -> RITestResult:
    """Two-sided Welch t test of attrition rates against its reassignment distribution."""
    a = np.asarray(attrition, dtype=np.float64)
    t = np.asarray(treatment, dtype=np.float64)
    if t.sum() < 1 or t.sum() > len(t) - 1:
        raise DegenerateArm("both arms need at least one participant")
    observed = abs(float(kernels.welch_t_draws(a, t[None, :])[0]))
    rng = np.random.default_rng(seed)
    T = randomizer.draw(rng, len(t), n_draws)
    stats = np.abs(kernels.welch_t_draws(a, T))
    return _result(observed, stats, n_draws, seed, "welch_t", ())


def pattern_design(X: np.ndarray, t: np.ndarray) -> np.ndarray:
    Xc = X - X.mean(axis=0)
    return np.column_stack([np.ones(len(t)), t, Xc, Xc * t[:, None]])


def pattern_statistic(X: np.ndarray, t: np.ndarray, attrition: np.ndarray) -> float:
    """HC2-robust F statistic on the treatment-by-covariate interactions."""
    if np.ptp(t) == 0:
        return 0.0
    design = pattern_design(X, t)
    k = X.shape[1]
    if np.linalg.matrix_rank(design) < design.shape[1]:
        return 0.0
    return hc2_wald(attrition, design, range(2 + k, 2 + 2 * k)) / k


def ri_attrition_pattern(covariates, treatment, attrition, randomizer: Randomizer,
                         n_draws: int = DEFAULT_DRAWS, seed: Optional[int] = None, names=None) -> RITestResult:
    """Does attrition depend on covariates differently across arms?"""
    X = np.asarray(covariates, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] == 0:
        raise RankDeficient("no covariates, so no interactions to test")
    X, dropped = _drop_constant(X, names)
    if X.shape[1] == 0:
        raise RankDeficient("all covariates are constant")
    t = np.asarray(treatment, dtype=np.float64)
    a = np.asarray(attrition, dtype=np.float64)
    if np.linalg.matrix_rank(pattern_design(X, t)) < 2 + 2 * X.shape[1]:
        raise RankDeficient("attrition-pattern design is rank deficient")
    observed = pattern_statistic(X, t, a)
    rng = np.random.default_rng(seed)
    T = randomizer.draw(rng, len(t), n_draws)
    stats = np.array([pattern_statistic(X, row, a) for row in T])
    return _result(observed, stats, n_draws, seed, "hc2_f", dropped)


def exact_p(statistic, treatment, randomizer: Randomizer) -> float:
    """Exact randomization p-value: probability mass of assignments with T* >= T."""
    t = np.asarray(treatment, dtype=np.float64)
    observed = statistic(t)
    draws, probs = zip(*randomizer.enumerate(len(t)))
    stats = np.array([statistic(a) for a in draws])
    hits = np.zeros(len(stats), dtype=bool)
    for i in range(len(stats)):
        hits[i] = _count_ge(stats[i:i + 1], observed) == 1
    return min(1.0, math.fsum(np.asarray(probs)[hits]))
