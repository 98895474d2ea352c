"""Heterogeneous effects, per-factor dose regressions, and factor co-occurrence."""
from __future__ import annotations

import logging
from typing import Mapping, Optional, Sequence

import numpy as np

from ..domain import AapaScore
from ..errors import DegenerateDesign, DegenerateModerator, InsufficientData, RankDeficient
from .linear import RegressionResult, ate_design, fit_ols
from .lmm import fit_random_intercept

log = logging.getLogger(__name__)


def hte(outcome, treatment, moderator, pre_survey=None, platform=None, participant=None,
        moderator_name: str = "moderator") -> RegressionResult:
    """Main specification plus moderator and treatment x moderator.

    With ``participant`` given the model is the random-intercept model on
    repeated responses; otherwise OLS on one row per participant.
    """
    t = np.asarray(treatment, dtype=np.float64)
    m = np.asarray(moderator, dtype=np.float64)
    for arm in (0.0, 1.0):
        levels = np.unique(m[t == arm])
        if len(levels) < 2:
            raise DegenerateModerator(f"moderator has fewer than two levels in arm {int(arm)}")
    inter = f"treatment:{moderator_name}"
    X, names = ate_design(t, pre_survey, platform, extra={moderator_name: m, inter: t * m})
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateModerator("moderator is collinear with the design")
    y = np.asarray(outcome, dtype=np.float64)
    if participant is None:
        return fit_ols(y, X, names)
    try:
        return fit_random_intercept(y, X, participant, names)
    except DegenerateDesign as exc:
        raise DegenerateModerator(str(exc)) from exc


def _fraction_columns(fractions, n: int) -> dict[str, np.ndarray]:
    if isinstance(fractions, Mapping):
        cols = {k: np.asarray(v, dtype=np.float64) for k, v in fractions.items()}
    else:
        arr = np.asarray(fractions, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("fractions must be a mapping or an (n, factors) array")
        cols = {f"v{i + 1}": arr[:, i] for i in range(arr.shape[1])}
    for name, col in cols.items():
        if col.shape != (n,):
            raise ValueError(f"fraction column {name} has wrong length")
        if np.any(col < 0) or np.any(col > 1) or np.any(~np.isfinite(col)):
            raise ValueError(f"fraction column {name} must lie in [0, 1]")
    return cols


def factor_contribution(post_rating, pre_rating, fractions, skip_degenerate: bool = False
                        ) -> dict[str, Optional[RegressionResult]]:
    """One regression per factor: post ~ 1 + pre + fraction_vn.

    The fraction coefficient is the predicted change in the 0-100 rating if every
    viewed political post expressed that factor. With ``skip_degenerate`` a
    constant fraction column yields ``None`` instead of raising.
    """
    y = np.asarray(post_rating, dtype=np.float64)
    pre = np.asarray(pre_rating, dtype=np.float64)
    out: dict[str, Optional[RegressionResult]] = {}
    for name, col in _fraction_columns(fractions, len(y)).items():
        X = np.column_stack([np.ones(len(y)), pre, col])
        try:
            out[name] = fit_ols(y, X, ["intercept", "pre_rating", f"fraction_{name}"])
        except RankDeficient:
            if not skip_degenerate:
                raise RankDeficient(f"fraction for {name} is constant or collinear") from None
            out[name] = None
    return out


def factor_matrix(scores: Sequence) -> np.ndarray:
    rows = [s.factors if isinstance(s, AapaScore) else s for s in scores]
    return np.asarray(rows, dtype=np.float64)


def factor_cooccurrence(scores: Sequence) -> np.ndarray:
    """Pearson correlation of binary factor indicators; constant factors give NaN rows."""
    F = factor_matrix(scores)
    if F.ndim != 2 or F.shape[0] < 2:
        raise InsufficientData("need at least two scored posts")
    sd = F.std(axis=0)
    ok = sd > 0
    if not ok.all():
        log.info("constant factors left missing: %s", [i + 1 for i in np.flatnonzero(~ok)])
    k = F.shape[1]
    out = np.full((k, k), np.nan)
    if ok.any():
        sub = np.corrcoef(F[:, ok], rowvar=False)
        out[np.ix_(ok, ok)] = np.atleast_2d(sub)
    return out
