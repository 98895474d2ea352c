# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; numerically equivalent to ``feedlab._kernels_py``."""
import math

import numpy as np
cimport numpy as cnp
from libc.math cimport log1p, sqrt, fabs, INFINITY, isfinite

cnp.import_array()

cdef double EXACT_FIT_TOL = 1e-24


def reml_terms(double gamma, n, sxx, sx, sxy, sy, syy):
    cdef cnp.int64_t[:] nn = np.ascontiguousarray(n, dtype=np.int64)
    cdef double[:, :, :] Sxx = np.ascontiguousarray(sxx, dtype=np.float64)
    cdef double[:, :] Sx = np.ascontiguousarray(sx, dtype=np.float64)
    cdef double[:, :] Sxy = np.ascontiguousarray(sxy, dtype=np.float64)
    cdef double[:] Sy = np.ascontiguousarray(sy, dtype=np.float64)
    cdef double[:] Syy = np.ascontiguousarray(syy, dtype=np.float64)
    cdef Py_ssize_t g = Sx.shape[0], p = Sx.shape[1], i, a, b
    out_xx = np.zeros((p, p))
    out_xy = np.zeros(p)
    cdef double[:, :] XX = out_xx
    cdef double[:] XY = out_xy
    cdef double yy = 0.0, logdet = 0.0, c, syi
    for i in range(g):
        c = gamma / (1.0 + nn[i] * gamma)
        syi = Sy[i]
        for a in range(p):
            XY[a] += Sxy[i, a] - c * Sx[i, a] * syi
            for b in range(p):
                XX[a, b] += Sxx[i, a, b] - c * Sx[i, a] * Sx[i, b]
        yy += Syy[i] - c * syi * syi
        logdet += log1p(nn[i] * gamma)
    return out_xx, out_xy, yy, logdet


cdef double _welch(double n1, double s1, double q1, double n0, double s0, double q0):
    cdef double m1, m0, v1, v0, se2, diff
    if n1 < 1 or n0 < 1:
        return 0.0
    m1 = s1 / n1
    m0 = s0 / n0
    v1 = (q1 - n1 * m1 * m1) / (n1 - 1) if n1 > 1 else 0.0
    v0 = (q0 - n0 * m0 * m0) / (n0 - 1) if n0 > 1 else 0.0
    if v1 < 0:
        v1 = 0.0
    if v0 < 0:
        v0 = 0.0
    se2 = v1 / n1 + v0 / n0
    diff = m1 - m0
    if se2 <= 1e-300:
        if fabs(diff) < 1e-12:
            return 0.0
        return INFINITY if diff > 0 else -INFINITY
    return diff / sqrt(se2)


def welch_t_draws(y, draws):
    cdef double[:] Y = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[:, :] Z = np.ascontiguousarray(draws, dtype=np.float64)
    cdef Py_ssize_t d = Z.shape[0], n = Z.shape[1], r, i
    out = np.zeros(d)
    cdef double[:] O = out
    cdef double tot = 0.0, totq = 0.0, n1, s1, q1, z, yi
    for i in range(n):
        tot += Y[i]
        totq += Y[i] * Y[i]
    for r in range(d):
        n1 = 0.0
        s1 = 0.0
        q1 = 0.0
        for i in range(n):
            z = Z[r, i]
            if z != 0.0:
                yi = Y[i]
                n1 += z
                s1 += z * yi
                q1 += z * yi * yi
        O[r] = _welch(n1, s1, q1, n - n1, tot - s1, totq - q1)
    return out


cdef int _solve_spd(double[:, :] M, double[:] v, Py_ssize_t q, double[:] work) nogil:
    """In-place Cholesky of M (q x q); writes M^{-1} v into work. Returns 0 on failure."""
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(q):
        s = M[j, j]
        for k in range(j):
            s -= M[j, k] * M[j, k]
        if s <= 1e-14 * (fabs(M[j, j]) + 1e-300):
            return 0
        M[j, j] = sqrt(s)
        for i in range(j + 1, q):
            s = M[i, j]
            for k in range(j):
                s -= M[i, k] * M[j, k]
            M[i, j] = s / M[j, j]
    for i in range(q):
        s = v[i]
        for k in range(i):
            s -= M[i, k] * work[k]
        work[i] = s / M[i, i]
    for i in range(q - 1, -1, -1):
        s = work[i]
        for k in range(i + 1, q):
            s -= M[k, i] * work[k]
        work[i] = s / M[i, i]
    return 1


def hc2_wald_draws(X, draws, h, Py_ssize_t test_start):
    Xn = np.ascontiguousarray(X, dtype=np.float64)
    xtx_inv_np = np.linalg.inv(Xn.T @ Xn)
    A_np = np.ascontiguousarray(xtx_inv_np @ Xn.T)
    cdef double[:, :] Xv = Xn
    cdef double[:, :] A = A_np
    cdef double[:, :] Ci = np.ascontiguousarray(xtx_inv_np)
    cdef double[:, :] T = np.ascontiguousarray(draws, dtype=np.float64)
    cdef double[:] H = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t d = T.shape[0], n = T.shape[1], k = Xv.shape[1], q = k - test_start
    cdef Py_ssize_t r, i, a, b, c
    out = np.zeros(d)
    cdef double[:] O = out
    cdef double[:] beta = np.zeros(k)
    cdef double[:] w = np.zeros(n)
    cdef double[:, :] meat = np.zeros((k, k))
    cdef double[:, :] tmp = np.zeros((k, k))
    cdef double[:, :] Vs = np.zeros((q, q))
    cdef double[:, :] Vw = np.zeros((q, q))
    cdef double[:] bs = np.zeros(q)
    cdef double[:] work = np.zeros(q)
    cdef double e, s, lev, val, sse, sst
    cdef bint nonzero
    for r in range(d):
        sse = 0.0
        sst = 0.0
        for a in range(k):
            s = 0.0
            for i in range(n):
                s += A[a, i] * T[r, i]
            beta[a] = s
        for i in range(n):
            e = T[r, i]
            for a in range(k):
                e -= Xv[i, a] * beta[a]
            sse += e * e
            sst += T[r, i] * T[r, i]
            lev = 1.0 - H[i]
            if lev < 1e-12:
                lev = 1e-12
            w[i] = e * e / lev
        for a in range(k):
            for b in range(a, k):
                s = 0.0
                for i in range(n):
                    s += w[i] * Xv[i, a] * Xv[i, b]
                meat[a, b] = s
                meat[b, a] = s
        for a in range(k):
            for b in range(k):
                s = 0.0
                for c in range(k):
                    s += Ci[a, c] * meat[c, b]
                tmp[a, b] = s
        for a in range(q):
            for b in range(q):
                s = 0.0
                for c in range(k):
                    s += tmp[test_start + a, c] * Ci[c, test_start + b]
                Vs[a, b] = s
        nonzero = False
        for a in range(q):
            bs[a] = beta[test_start + a]
            if bs[a] != 0.0:
                nonzero = True
        if not nonzero:
            O[r] = 0.0
            continue
        if sse <= EXACT_FIT_TOL * sst:
            # exact fit: infinite unless the tested columns explain nothing
            val = 0.0
            for i in range(n):
                s = 0.0
                for a in range(q):
                    s += Xv[i, test_start + a] * bs[a]
                val += s * s
            O[r] = 0.0 if val <= EXACT_FIT_TOL * sst else INFINITY
            continue
        for a in range(q):
            for b in range(q):
                Vw[a, b] = Vs[a, b]
        if _solve_spd(Vw, bs, q, work):
            val = 0.0
            for a in range(q):
                val += bs[a] * work[a]
            O[r] = val if isfinite(val) else INFINITY
        else:
            sol = np.linalg.pinv(np.asarray(Vs)) @ np.asarray(bs)
            val = float(np.asarray(bs) @ sol)
            O[r] = val if math.isfinite(val) else math.inf
    return out


def mwu_null_counts(Py_ssize_t n1, Py_ssize_t n2):
    cdef Py_ssize_t umax = n1 * n2, m, k, u
    tab_np = np.zeros((n1 + 1, n2 + 1, umax + 1), dtype=np.int64)
    cdef cnp.int64_t[:, :, :] f = tab_np
    for m in range(n1 + 1):
        for k in range(n2 + 1):
            if m == 0 or k == 0:
                f[m, k, 0] = 1
                continue
            for u in range(m * k + 1):
                if u >= k:
                    f[m, k, u] += f[m - 1, k, u - k]
                f[m, k, u] += f[m, k - 1, u]
    return tab_np[n1, n2, :umax + 1].copy()


def session_breaks(times, cnp.int64_t gap):
    cdef cnp.int64_t[:] t = np.ascontiguousarray(times, dtype=np.int64)
    cdef Py_ssize_t n = t.shape[0], i
    out = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[:] o = out
    cdef cnp.int64_t sid = 0
    for i in range(1, n):
        if t[i] - t[i - 1] >= gap:
            sid += 1
        o[i] = sid
    return out
