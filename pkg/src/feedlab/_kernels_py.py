"""Pure-Python/numpy implementations of the hot kernels.

Signatures match the compiled ``feedlab._kernels`` module exactly; see
:mod:`feedlab.kernels` for which one is active.
"""
from __future__ import annotations

import math

import numpy as np

EXACT_FIT_TOL = 1e-24


def reml_terms(gamma, n, sxx, sx, sxy, sy, syy):
    """Random-intercept GLS cross products for variance ratio ``gamma``.

    With ``W_i = I - c_i J`` and ``c_i = gamma / (1 + n_i gamma)`` returns
    ``(X'WX, X'Wy, y'Wy, sum_i log(1 + n_i gamma))``.
    """
    n = np.asarray(n, dtype=np.float64)
    c = gamma / (1.0 + n * gamma)
    xtwx = sxx.sum(axis=0) - np.einsum("g,gi,gj->ij", c, sx, sx)
    xtwy = sxy.sum(axis=0) - (c * sy) @ sx
    ytwy = float(syy.sum() - np.dot(c, sy * sy))
    logdet = float(np.log1p(n * gamma).sum())
    return xtwx, xtwy, ytwy, logdet


def welch_t_draws(y, draws):
    """Welch t statistic (treated minus control) for each 0/1 row of ``draws``."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(draws, dtype=np.float64)
    n1 = z.sum(axis=1)
    n0 = z.shape[1] - n1
    s1 = z @ y
    s0 = y.sum() - s1
    q1 = z @ (y * y)
    q0 = float((y * y).sum()) - q1
    out = np.zeros(z.shape[0])
    for d in range(z.shape[0]):
        out[d] = _welch(n1[d], s1[d], q1[d], n0[d], s0[d], q0[d])
    return out


def _welch(n1, s1, q1, n0, s0, q0):
    if n1 < 1 or n0 < 1:
        return 0.0
    m1, m0 = s1 / n1, s0 / n0
    v1 = max(q1 - n1 * m1 * m1, 0.0) / (n1 - 1) if n1 > 1 else 0.0
    v0 = max(q0 - n0 * m0 * m0, 0.0) / (n0 - 1) if n0 > 1 else 0.0
    se2 = v1 / n1 + v0 / n0
    diff = m1 - m0
    if se2 <= 1e-300:
        if abs(diff) < 1e-12:
            return 0.0
        return math.copysign(math.inf, diff)
    return diff / math.sqrt(se2)


def hc2_wald_draws(X, draws, h, test_start):
    """HC2-robust Wald statistic for coefficients ``test_start:`` per outcome row.

    ``X`` is fixed across draws; each row of ``draws`` is an outcome vector.
    ``h`` holds the hat-matrix diagonal of ``X``. An outcome fitted exactly by
    ``X`` with nonzero tested coefficients scores ``inf``.
    """
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(draws, dtype=np.float64)
    xtx_inv = np.linalg.inv(X.T @ X)
    A = xtx_inv @ X.T
    B = T @ A.T
    E = T - B @ X.T
    w = E * E / np.clip(1.0 - h, 1e-12, None)
    meat = np.einsum("dn,ni,nj->dij", w, X, X)
    V = xtx_inv @ meat @ xtx_inv
    b = B[:, test_start:]
    Vs = V[:, test_start:, test_start:]
    exact = (E * E).sum(axis=1) <= EXACT_FIT_TOL * (T * T).sum(axis=1)
    # an exact fit is infinite unless the tested columns explain nothing
    explained = ((b @ X[:, test_start:].T) ** 2).sum(axis=1)
    null_fit = explained <= EXACT_FIT_TOL * (T * T).sum(axis=1)
    out = np.empty(T.shape[0])
    for d in range(T.shape[0]):
        out[d] = _quad_form(Vs[d], b[d], exact[d], null_fit[d])
    return out


def _quad_form(V, b, exact_fit=False, null_fit=False):
    if not np.any(b):
        return 0.0
    if exact_fit:
        return 0.0 if null_fit else math.inf
    try:
        L = np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        val = float(b @ np.linalg.pinv(V) @ b)
    else:
        z = np.linalg.solve(L, b)
        val = float(z @ z)
    return val if np.isfinite(val) else math.inf


def mwu_null_counts(n1, n2):
    """Number of labelings giving each U = #{x > y}, for U = 0..n1*n2."""
    # f[m][k] is the count array for m x-values among the first m+k ranks.
    table = [[None] * (n2 + 1) for _ in range(n1 + 1)]
    for m in range(n1 + 1):
        for k in range(n2 + 1):
            arr = np.zeros(m * k + 1, dtype=np.int64)
            if m == 0 or k == 0:
                arr[0] = 1
            else:
                a = table[m - 1][k]
                arr[k:k + len(a)] += a
                b = table[m][k - 1]
                arr[:len(b)] += b
            table[m][k] = arr
    return table[n1][n2]


def session_breaks(times, gap):
    """Session index for each (sorted) timestamp; a gap >= ``gap`` starts a new one."""
    t = np.asarray(times, dtype=np.int64)
    if len(t) == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.concatenate(([0], (np.diff(t) >= gap).astype(np.int64)))
    return np.cumsum(starts)
