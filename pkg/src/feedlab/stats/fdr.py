"""Two-stage sharpened FDR q-values and tiered outcome adjustment."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ..errors import InvalidP, OverlappingTiers

GRID_STEP = 1e-4
GRID = np.round(np.arange(1, 10_001) * GRID_STEP, 4)


def _step_up(p_sorted: np.ndarray, level: np.ndarray) -> np.ndarray:
    """Number of BH rejections for each level (rows) given ascending p-values."""
    m = len(p_sorted)
    ranks = np.arange(1, m + 1)
    ok = p_sorted[None, :] <= level[:, None] * ranks[None, :] / m
    return np.where(ok, ranks[None, :], 0).max(axis=1)


def sharpened_fdr(pvals, variant: str = "standard") -> np.ndarray:
    """Smallest grid level q at which each hypothesis is rejected.

    Stage one runs BH at q/(1+q) and rejects r1 hypotheses. Stage two runs BH at
    q*m/(m - r1) (``variant="standard"``) or at q/(1+q)*m/(m - r1)
    (``variant="anderson"``, the published Stata routine). Hypotheses never
    rejected get q = 1.
    """
    p = np.asarray(pvals, dtype=np.float64).ravel()
    if p.size == 0:
        return p.copy()
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidP("p-values must lie in [0, 1]")
    if variant not in ("standard", "anderson"):
        raise ValueError(f"unknown variant {variant!r}")
    m = len(p)
    order = np.argsort(p, kind="stable")
    ps = p[order]
    stage1 = GRID / (1.0 + GRID)
    r1 = _step_up(ps, stage1)
    base = GRID if variant == "standard" else stage1
    with np.errstate(divide="ignore"):
        stage2 = np.where(r1 < m, base * m / np.maximum(m - r1, 1), np.inf)
    r2 = np.where(r1 >= m, m, _step_up(ps, np.minimum(stage2, 1e300)))
    q_sorted = np.ones(m)
    for rank in range(1, m + 1):
        hit = np.flatnonzero(r2 >= rank)
        if hit.size:
            q_sorted[rank - 1] = GRID[hit[0]]
    q_sorted = np.maximum.accumulate(q_sorted)
    out = np.empty(m)
    out[order] = q_sorted
    return out


def bh_rejections(pvals, level: float) -> np.ndarray:
    p = np.asarray(pvals, dtype=np.float64)
    order = np.argsort(p, kind="stable")
    r = int(_step_up(p[order], np.array([level]))[0])
    out = np.zeros(len(p), dtype=bool)
    out[order[:r]] = True
    return out


def adjust_outcome_tiers(primary: Mapping[str, float], secondary: Mapping[str, float] | None = None,
                         tertiary: Mapping[str, float] | None = None,
                         variant: str = "standard") -> dict[str, float]:
    """Primary p-values pass through; lower tiers are adjusted together with the tiers above."""
    secondary = secondary or {}
    tertiary = tertiary or {}
    keys = [set(primary), set(secondary), set(tertiary)]
    if keys[0] & keys[1] or keys[0] & keys[2] or keys[1] & keys[2]:
        raise OverlappingTiers("an outcome id appears in more than one tier")
    out = {k: float(v) for k, v in primary.items()}
    for v in list(primary.values()) + list(secondary.values()) + list(tertiary.values()):
        if not 0.0 <= float(v) <= 1.0:
            raise InvalidP(f"p-value {v} outside [0, 1]")
    if secondary:
        pooled = {**primary, **secondary}
        q = sharpened_fdr(list(pooled.values()), variant)
        out.update({k: float(v) for k, v in zip(pooled, q) if k in secondary})
    if tertiary:
        pooled = {**primary, **secondary, **tertiary}
        q = sharpened_fdr(list(pooled.values()), variant)
        out.update({k: float(v) for k, v in zip(pooled, q) if k in tertiary})
    return out


def adjust_hte(pvals: Mapping[tuple, float], variant: str = "standard") -> dict[tuple, float]:
    """Adjust interaction p-values jointly over all (moderator, outcome) pairs."""
    keys = list(pvals)
    q = sharpened_fdr([pvals[k] for k in keys], variant)
    return {k: float(v) for k, v in zip(keys, q)}
