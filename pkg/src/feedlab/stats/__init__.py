"""Estimators and tests for the post-survey, in-feed, attrition, and engagement analyses."""
from .effects import factor_contribution, factor_cooccurrence, hte
from .fdr import adjust_hte, adjust_outcome_tiers, sharpened_fdr
from .linear import RegressionResult, fit_ols, impute_baseline, ols_ate
from .lmm import fit_random_intercept, lmm_ate
from .mwu import mann_whitney_u
from .power import PowerResult, PowerVariances, power_simulation
from .ri import (BernoulliRandomizer, CompleteRandomizer, RITestResult, ri_attrition_pattern,
                 ri_attrition_rate, ri_covariate_balance)

__all__ = [
    "RegressionResult", "fit_ols", "ols_ate", "impute_baseline", "fit_random_intercept", "lmm_ate",
    "BernoulliRandomizer", "CompleteRandomizer", "RITestResult", "ri_covariate_balance",
    "ri_attrition_rate", "ri_attrition_pattern", "sharpened_fdr", "adjust_outcome_tiers", "adjust_hte",
    "mann_whitney_u", "hte", "factor_contribution", "factor_cooccurrence",
    "PowerVariances", "PowerResult", "power_simulation",
]
