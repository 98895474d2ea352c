import importlib
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedlab import _kernels_py, kernels

compiled = pytest.importorskip("feedlab._kernels")


def close(a, b, tol=1e-9):
    a, b = np.asarray(a, float), np.asarray(b, float)
    same_inf = np.isinf(a) == np.isinf(b)
    fin = np.isfinite(a) & np.isfinite(b)
    return bool(same_inf.all() and np.allclose(a[fin], b[fin], rtol=tol, atol=tol) and (a[~fin] == b[~fin]).all())


class TestSelection:
    def test_compiled_active(self):
        assert kernels.BACKEND == "cython"

    def test_env_forces_fallback(self):
        env = dict(os.environ, FEEDLAB_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c", "from feedlab import kernels; print(kernels.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"


class TestEquivalence:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31), st.floats(0.0, 50.0))
    def test_reml_terms(self, seed, gamma):
        rng = np.random.default_rng(seed)
        g, p = int(rng.integers(2, 30)), int(rng.integers(1, 5))
        n = rng.integers(1, 12, size=g)
        sx = rng.standard_normal((g, p))
        sxx = rng.standard_normal((g, p, p))
        sxy = rng.standard_normal((g, p))
        sy = rng.standard_normal(g)
        syy = rng.random(g) * 10
        a = _kernels_py.reml_terms(gamma, n, sxx, sx, sxy, sy, syy)
        b = compiled.reml_terms(gamma, n, sxx, sx, sxy, sy, syy)
        for x, y in zip(a, b):
            assert close(x, y)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_welch(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 40))
        y = np.round(rng.standard_normal(n), int(rng.integers(0, 3)))
        draws = (rng.random((50, n)) < 0.5).astype(float)
        draws[0] = 0.0
        draws[1, :] = 0.0
        draws[1, 0] = 1.0
        assert close(_kernels_py.welch_t_draws(y, draws), compiled.welch_t_draws(y, draws))

    def test_welch_constant_groups(self):
        y = np.array([1.0, 1.0, 2.0, 2.0])
        draws = np.array([[1, 1, 0, 0], [0, 0, 1, 1], [1, 0, 1, 0]], dtype=float)
        a = _kernels_py.welch_t_draws(y, draws)
        assert math.isinf(a[0]) and a[0] < 0 and math.isinf(a[1]) and a[1] > 0 and a[2] == 0.0
        assert close(a, compiled.welch_t_draws(y, draws))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_hc2_wald(self, seed):
        rng = np.random.default_rng(seed)
        n, p = int(rng.integers(8, 40)), int(rng.integers(2, 5))
        X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
        h = np.einsum("ij,jk,ik->i", X, np.linalg.inv(X.T @ X), X)
        T = (rng.random((20, n)) < 0.5).astype(float)
        assert close(_kernels_py.hc2_wald_draws(X, T, h, 1), compiled.hc2_wald_draws(X, T, h, 1), 1e-7)

    def test_hc2_exact_fit_and_zero(self):
        X = np.column_stack([np.ones(6), np.arange(6.0)])
        h = np.einsum("ij,jk,ik->i", X, np.linalg.inv(X.T @ X), X)
        T = np.vstack([2.0 + 3.0 * np.arange(6.0), np.full(6, 4.0)])
        a = _kernels_py.hc2_wald_draws(X, T, h, 1)
        assert math.isinf(a[0]) and a[1] == 0.0
        assert close(a, compiled.hc2_wald_draws(X, T, h, 1))

    @pytest.mark.parametrize("n1,n2", [(0, 0), (1, 0), (1, 1), (3, 5), (12, 12), (7, 2)])
    def test_mwu_counts(self, n1, n2):
        a = _kernels_py.mwu_null_counts(n1, n2)
        assert np.array_equal(a, compiled.mwu_null_counts(n1, n2))
        assert a.sum() == math.comb(n1 + n2, n1)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 10 ** 9), max_size=60), st.integers(1, 10 ** 8))
    def test_session_breaks(self, times, gap):
        t = np.sort(np.array(times, dtype=np.int64))
        assert np.array_equal(_kernels_py.session_breaks(t, gap), compiled.session_breaks(t, gap))


def test_module_reload_is_stable():
    mod = importlib.reload(kernels)
    assert mod.BACKEND in ("cython", "python")
