"""Time the compiled kernels against the numpy fallback on study-sized inputs.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
checked for agreement between the two backends before it is timed.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from feedlab import _kernels_py

try:
    from feedlab import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def cases(rng: np.random.Generator) -> dict:
    n, p, g = 600, 4, 600
    counts = rng.integers(1, 20, size=g).astype(np.float64)
    sx = rng.standard_normal((g, p)) * counts[:, None]
    sxx = np.einsum("gi,gj->gij", sx, sx) / counts[:, None, None] + np.eye(p)
    sy = rng.standard_normal(g) * counts
    sxy = sx * sy[:, None] / counts[:, None]
    syy = sy * sy / counts + 1.0
    y = rng.standard_normal(n)
    draws = (rng.random((2000, n)) < 0.5).astype(np.float64)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 3))])
    h = np.einsum("ij,jk,ik->i", X, np.linalg.inv(X.T @ X), X)
    outcomes = draws[:500]
    times = np.sort(rng.integers(0, 10 * 86_400_000, size=20_000)).astype(np.int64)
    return {
        "reml_terms": (0.7, counts, sxx, sx, sxy, sy, syy),
        "welch_t_draws": (y, draws),
        "hc2_wald_draws": (X, outcomes, h, 1),
        "mwu_null_counts": (12, 12),
        "session_breaks": (times, 3_600_000),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-9, atol=1e-9)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    inputs = cases(np.random.default_rng(args.seed))
    print(f"{'kernel':<18}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, call_args in inputs.items():
        py = getattr(_kernels_py, name)
        t_py = min(timeit.repeat(lambda: py(*call_args), number=1, repeat=args.repeat)) * 1e3
        if _compiled is None:
            print(f"{name:<18}{t_py:>12.3f}{'n/a':>12}{'':>10}")
            continue
        cy = getattr(_compiled, name)
        if not _same(py(*call_args), cy(*call_args)):
            raise SystemExit(f"{name}: backends disagree")
        t_cy = min(timeit.repeat(lambda: cy(*call_args), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18}{t_py:>12.3f}{t_cy:>12.3f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
