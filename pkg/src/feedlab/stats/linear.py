"""OLS with classical and HC2 standard errors, and the models built on it."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from ..errors import InsufficientData, RankDeficient

Z95 = 1.959963984540054
EXACT_FIT_TOL = 1e-24


@dataclass
class RegressionResult:
    names: list[str]
    coef: np.ndarray
    se: np.ndarray
    se_robust: Optional[np.ndarray]
    n_obs: int
    n_groups: Optional[int] = None
    sigma2_u: Optional[float] = None
    sigma2_e: Optional[float] = None
    loglik: Optional[float] = None
    se_type: str = "classical"
    extra: dict = field(default_factory=dict)

    @property
    def _se_used(self) -> np.ndarray:
        return self.se_robust if self.se_type == "HC2" and self.se_robust is not None else self.se

    @property
    def ci_low(self) -> np.ndarray:
        return self.coef - Z95 * self._se_used

    @property
    def ci_high(self) -> np.ndarray:
        return self.coef + Z95 * self._se_used

    @property
    def pvalues(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.coef / self._se_used)
        return 2.0 * sps.norm.sf(z)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def estimate(self, name: str) -> float:
        return float(self.coef[self.index(name)])

    def ci(self, name: str) -> tuple[float, float]:
        i = self.index(name)
        return float(self.ci_low[i]), float(self.ci_high[i])

    def pvalue(self, name: str) -> float:
        return float(self.pvalues[self.index(name)])

    def rows(self) -> list[dict]:
        out = []
        for i, name in enumerate(self.names):
            out.append({
                "term": name,
                "estimate": float(self.coef[i]),
                "se": float(self._se_used[i]),
                "ci_low": float(self.ci_low[i]),
                "ci_high": float(self.ci_high[i]),
                "p": float(self.pvalues[i]),
                "n_obs": self.n_obs,
                "n_groups": "" if self.n_groups is None else self.n_groups,
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = ["term", "estimate", "se", "ci_low", "ci_high", "p", "n_obs", "n_groups"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in self.rows():
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


def check_rank(X: np.ndarray) -> None:
    if X.shape[0] < X.shape[1] or np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficient(f"design matrix of shape {X.shape} is rank deficient")


def hat_diagonal(X: np.ndarray, xtx_inv: Optional[np.ndarray] = None) -> np.ndarray:
    if xtx_inv is None:
        xtx_inv = np.linalg.inv(X.T @ X)
    return np.einsum("ij,jk,ik->i", X, xtx_inv, X)


def fit_ols(y, X, names: Sequence[str], se_type: str = "classical") -> RegressionResult:
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    check_rank(X)
    n, k = X.shape
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    dof = n - k
    sigma2 = float(resid @ resid) / dof if dof > 0 else np.nan
    se = np.sqrt(np.diag(xtx_inv) * sigma2)
    h = hat_diagonal(X, xtx_inv)
    w = resid ** 2 / np.clip(1.0 - h, 1e-12, None)
    V_hc2 = xtx_inv @ (X.T * w) @ X @ xtx_inv
    return RegressionResult(list(names), beta, se, np.sqrt(np.diag(V_hc2)), n_obs=n, se_type=se_type,
                            extra={"sigma2": sigma2, "resid": resid})


def hc2_wald(y, X, test: Sequence[int]) -> float:
    """HC2-robust Wald statistic for H0: coefficients ``test`` are all zero."""
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    xtx_inv = np.linalg.pinv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    h = hat_diagonal(X, xtx_inv)
    w = resid ** 2 / np.clip(1.0 - h, 1e-12, None)
    V = xtx_inv @ (X.T * w) @ X @ xtx_inv
    idx = list(test)
    b = beta[idx]
    if not np.any(np.abs(b) > 1e-12):
        return 0.0
    if float(resid @ resid) <= EXACT_FIT_TOL * float(y @ y):
        return np.inf
    Vs = V[np.ix_(idx, idx)]
    try:
        L = np.linalg.cholesky(Vs)
    except np.linalg.LinAlgError:
        val = float(b @ np.linalg.pinv(Vs) @ b)
    else:
        z = np.linalg.solve(L, b)
        val = float(z @ z)
    return val if np.isfinite(val) else np.inf


def _column(x, n, name):
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (n,):
        raise ValueError(f"{name} must have length {n}")
    return a


def ate_design(treatment, pre_survey=None, platform=None, extra: Optional[dict] = None):
    t = np.asarray(treatment, dtype=np.float64)
    n = len(t)
    cols, names = [np.ones(n), t], ["intercept", "treatment"]
    if pre_survey is not None:
        cols.append(_column(pre_survey, n, "pre_survey"))
        names.append("pre_survey")
    if platform is not None:
        cols.append(_column(platform, n, "platform"))
        names.append("platform")
    for name, col in (extra or {}).items():
        cols.append(_column(col, n, name))
        names.append(name)
    return np.column_stack(cols), names


def ols_ate(outcome, treatment, pre_survey=None, platform=None, se_type: str = "classical") -> RegressionResult:
    """Post-experiment effect: outcome ~ 1 + treatment [+ pre_survey] [+ platform]."""
    X, names = ate_design(treatment, pre_survey, platform)
    y = _column(outcome, X.shape[0], "outcome")
    if len(y) < 4:
        raise InsufficientData("need at least 4 observations")
    return fit_ols(y, X, names, se_type)


def impute_baseline(target_pre: float, others_pre, others_baseline) -> float:
    """Predict a participant's baseline mean from their pre-survey answer.

    The line is fitted on the other participants only.
    """
    x = np.asarray(others_pre, dtype=np.float64)
    y = np.asarray(others_baseline, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("others_pre and others_baseline differ in length")
    if len(x) < 2:
        raise InsufficientData("need at least two other participants")
    X = np.column_stack([np.ones(len(x)), x])
    try:
        check_rank(X)
    except RankDeficient as exc:
        raise InsufficientData("others' pre-survey answers are all equal") from exc
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    return float(beta[0] + beta[1] * target_pre)
