"""Mann-Whitney U with an exact small-sample path."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import stats as sps

from .. import kernels
from ..errors import EmptySample

EXACT_MAX_N = 12


@lru_cache(maxsize=256)
def _null_cdf(n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
    counts = np.asarray(kernels.mwu_null_counts(n1, n2), dtype=np.float64)
    total = counts.sum()
    return np.cumsum(counts) / total, np.cumsum(counts[::-1])[::-1] / total


def exact_p(u: float, n1: int, n2: int) -> float:
    """Two-sided exact p = min(1, 2 * min(P(U <= u), P(U >= u)))."""
    lower, upper = _null_cdf(n1, n2)
    k = int(round(u))
    return float(min(1.0, 2.0 * min(lower[k], upper[k])))


def mann_whitney_u(x, y, method: str = "auto") -> tuple[float, float]:
    """Return (U of ``x``, two-sided p).

    ``method="auto"`` enumerates when n_x + n_y <= 12 and there are no ties and
    otherwise uses the tie- and continuity-corrected normal approximation;
    ``"exact"`` and ``"normal"`` force one path (exact requires no ties).
    """
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise EmptySample("both samples must be nonempty")
    pooled = np.concatenate([x, y])
    ranks = sps.rankdata(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    _, tie_counts = np.unique(pooled, return_counts=True)
    has_ties = bool(np.any(tie_counts > 1))
    n = n1 + n2
    if method == "exact" and has_ties:
        raise ValueError("exact path requires untied data")
    if method == "exact" or (method == "auto" and n <= EXACT_MAX_N and not has_ties):
        return u, exact_p(u, n1, n2)
    mean = n1 * n2 / 2.0
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return u, 1.0
    z = max(abs(u - mean) - 0.5, 0.0) / math.sqrt(var)
    return u, float(min(1.0, 2.0 * sps.norm.sf(z)))
