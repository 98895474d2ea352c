"""Kernel dispatch: compiled extension when built, numpy fallback otherwise.

Set ``FEEDLAB_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("FEEDLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

reml_terms = _impl.reml_terms
welch_t_draws = _impl.welch_t_draws
hc2_wald_draws = _impl.hc2_wald_draws
mwu_null_counts = _impl.mwu_null_counts
session_breaks = _impl.session_breaks

__all__ = ["BACKEND", "reml_terms", "welch_t_draws", "hc2_wald_draws", "mwu_null_counts", "session_breaks"]
