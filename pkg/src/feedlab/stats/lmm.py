"""Random-intercept linear mixed model fitted by REML.

With H = I + γZZ' (γ = σ²_u/σ²_ε) the fixed effects and σ²_ε have closed forms
for each γ, so only the one-dimensional profile deviance in log γ is searched.
Per-group sufficient statistics make every evaluation O(groups · p²).
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .. import kernels
from ..errors import DegenerateDesign, NonConvergence
from .linear import RegressionResult, ate_design

LOG_GAMMA_BOUNDS = (-12.0, 12.0)
GOLDEN_TOL = 1e-8
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class GroupedData:
    """Per-group sums needed by the profiled REML deviance."""

    def __init__(self, y, X, groups):
        y = np.asarray(y, dtype=np.float64)
        X = np.asarray(X, dtype=np.float64)
        groups = np.asarray(groups)
        order = np.argsort(groups, kind="stable")
        y, X, g = y[order], X[order], groups[order]
        starts = np.flatnonzero(np.r_[True, g[1:] != g[:-1]])
        self.n = np.diff(np.r_[starts, len(g)]).astype(np.int64)
        self.sxx = np.add.reduceat(X[:, :, None] * X[:, None, :], starts, axis=0)
        self.sx = np.add.reduceat(X, starts, axis=0)
        self.sxy = np.add.reduceat(X * y[:, None], starts, axis=0)
        self.sy = np.add.reduceat(y, starts)
        self.syy = np.add.reduceat(y * y, starts)
        self.n_obs = len(y)
        self.n_groups = len(starts)
        self.p = X.shape[1]

    def terms(self, gamma: float):
        return kernels.reml_terms(gamma, self.n, self.sxx, self.sx, self.sxy, self.sy, self.syy)

    def profile(self, gamma: float):
        """Return (deviance, beta, sigma2_e, XtWX) at variance ratio ``gamma``."""
        xx, xy, yy, logdet = self.terms(gamma)
        try:
            chol = np.linalg.cholesky(xx)
        except np.linalg.LinAlgError:
            return math.inf, None, math.nan, xx
        beta = np.linalg.solve(xx, xy)
        dof = self.n_obs - self.p
        rss = yy - float(beta @ xy)
        if dof <= 0 or not rss > 0:
            return math.inf, beta, max(rss, 0.0) / max(dof, 1), xx
        sigma2 = rss / dof
        dev = dof * math.log(sigma2) + logdet + 2.0 * float(np.sum(np.log(np.diag(chol))))
        return dev, beta, sigma2, xx

    def loglik(self, gamma: float) -> float:
        dev = self.profile(gamma)[0]
        dof = self.n_obs - self.p
        return -0.5 * (dev + dof * (1.0 + math.log(2.0 * math.pi)))


def _golden(f, lo: float, hi: float, tol: float):
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def fit_random_intercept(y, X, groups, names: Sequence[str]) -> RegressionResult:
    X = np.asarray(X, dtype=np.float64)
    if len(np.unique(np.asarray(groups))) < 2:
        raise DegenerateDesign("need at least two participants")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateDesign("fixed-effect design is rank deficient")
    data = GroupedData(y, X, groups)

    if np.all(data.n == 1):
        # the variance ratio is unidentified; the likelihood is flat and GLS equals OLS
        return _finish(data, names, 0.0)

    def dev(log_gamma: float) -> float:
        return data.profile(math.exp(log_gamma))[0]

    lo, hi = LOG_GAMMA_BOUNDS
    grid = np.arange(lo, hi + 0.5, 1.0)
    grid_dev = np.array([dev(v) for v in grid])
    if not np.any(np.isfinite(grid_dev)):
        raise NonConvergence("REML deviance is not finite anywhere on the search interval")
    k = int(np.nanargmin(np.where(np.isfinite(grid_dev), grid_dev, np.inf)))
    log_gamma, best = _golden(dev, max(lo, grid[k] - 1.0), min(hi, grid[k] + 1.0), GOLDEN_TOL)
    if grid_dev[k] < best:
        log_gamma, best = float(grid[k]), float(grid_dev[k])
    gamma = math.exp(log_gamma)
    dev0 = data.profile(0.0)[0]
    # ties (flat profiles, e.g. one response per participant) resolve to the OLS point
    if dev0 <= best + 1e-9 * max(1.0, abs(dev0)):
        gamma, best, log_gamma = 0.0, dev0, -math.inf
    result = _finish(data, names, gamma)
    if log_gamma >= hi - 1e-6:
        raise NonConvergence("variance ratio ran to the upper search bound", best=result)
    return result


def _finish(data: GroupedData, names, gamma: float) -> RegressionResult:
    dev_g, beta, sigma2, xx = data.profile(gamma)
    cov = sigma2 * np.linalg.inv(xx)
    return RegressionResult(
        names=list(names), coef=beta, se=np.sqrt(np.diag(cov)), se_robust=None,
        n_obs=data.n_obs, n_groups=data.n_groups, sigma2_u=gamma * sigma2, sigma2_e=sigma2,
        loglik=data.loglik(gamma), extra={"gamma": gamma, "deviance": dev_g},
    )


def lmm_ate(participant, y, treatment, baseline_mean=None, platform=None) -> RegressionResult:
    """In-feed effect: y_ij ~ 1 + treatment_i + baseline_i + platform_i + (1 | participant).

    Participant-level covariates are passed at observation level, aligned with ``y``.
    """
    y = np.asarray(y, dtype=np.float64)
    X, names = ate_design(treatment, baseline_mean, platform)
    if names[2:3] == ["pre_survey"]:
        names[2] = "baseline_mean"
    if len(y) != X.shape[0]:
        raise ValueError("y and covariates differ in length")
    return fit_random_intercept(y, X, participant, names)


def reml_loglik(participant, y, X, gamma: float) -> float:
    return GroupedData(y, X, participant).loglik(gamma)
