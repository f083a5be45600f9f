# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_kernels_py``.

Same signatures and return values as the pure-Python module.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs, INFINITY

cnp.import_array()

cdef double ROUNDOFF = 1e-13


cdef inline double complex _conj(double complex z) nogil:
    return z.real - 1j * z.imag


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


def waterfill(gains, double P):
    cdef cnp.ndarray[double, ndim=1] g = np.ascontiguousarray(gains, dtype=np.float64)
    cdef Py_ssize_t n = g.shape[0]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.argsort(-g, kind="stable")
    cdef cnp.ndarray[double, ndim=1] powers = np.zeros(n)
    cdef double[:] inv = np.empty(n)
    cdef double[:] csum = np.empty(n)
    cdef Py_ssize_t i, active
    cdef double acc = 0.0, level
    for i in range(n):
        inv[i] = 1.0 / g[order[i]]
        acc += inv[i]
        csum[i] = acc
    active = n
    level = (P + csum[n - 1]) / n
    while active > 1 and level <= inv[active - 1]:
        active -= 1
        level = (P + csum[active - 1]) / active
    for i in range(active):
        powers[order[i]] = level - inv[i]
    return powers, float(level)


def successive_norms(H):
    cdef double complex[:, ::1] V = np.array(H, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t R = V.shape[0], M = V.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(R)
    cdef Py_ssize_t r, q, m
    cdef double complex proj
    cdef double nrm2, inv_n
    cdef signed char[:] live = np.zeros(R, dtype=np.int8)
    for r in range(R):
        for q in range(r):
            if not live[q]:
                continue
            proj = 0.0
            for m in range(M):
                proj += _conj(V[q, m]) * V[r, m]
            for m in range(M):
                V[r, m] -= proj * V[q, m]
        nrm2 = 0.0
        for m in range(M):
            nrm2 += _abs2(V[r, m])
        out[r] = nrm2
        if nrm2 > 0.0:
            live[r] = 1
            inv_n = 1.0 / sqrt(nrm2)
            for m in range(M):
                V[r, m] *= inv_n
    return out


cdef double _mac_eval(const double complex[:, ::1] h, const double[:] p,
                      const double[:] c, double complex[:, ::1] W,
                      double[:] grad, double[:] sinr) nogil:
    """W is M x K scratch; on exit grad and sinr are filled, returns objective."""
    cdef Py_ssize_t K = h.shape[0], M = h.shape[1]
    cdef Py_ssize_t k, j, m
    cdef double obj = 0.0, logA = 0.0, d, denom, scale, q
    cdef double complex cross, acc
    for m in range(M):
        for j in range(K):
            W[m, j] = _conj(h[j, m])
    for j in range(K):
        grad[j] = 0.0
    for k in range(K):
        d = 0.0
        for m in range(M):
            d += (h[k, m] * W[m, k]).real
        sinr[k] = d
        denom = 1.0 + p[k] * d
        logA += log(denom)
        obj += c[k] * logA
        if p[k] != 0.0:
            scale = p[k] / denom
            # column k is the update vector u; handle it last so it stays intact
            for j in range(K):
                if j == k:
                    continue
                acc = 0.0
                for m in range(M):
                    acc += h[j, m] * W[m, k]
                cross = _conj(acc) * scale
                for m in range(M):
                    W[m, j] -= W[m, k] * cross
            acc = 0.0
            for m in range(M):
                acc += h[k, m] * W[m, k]
            cross = _conj(acc) * scale
            for m in range(M):
                W[m, k] -= W[m, k] * cross
        if c[k] != 0.0:
            for j in range(k + 1):
                q = 0.0
                for m in range(M):
                    q += (h[j, m] * W[m, j]).real
                grad[j] += c[k] * q
    return obj


def mac_eval(h, powers, coef):
    cdef double complex[:, ::1] hv = np.ascontiguousarray(h, dtype=np.complex128)
    cdef double[:] p = np.ascontiguousarray(powers, dtype=np.float64)
    cdef double[:] c = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t K = hv.shape[0], M = hv.shape[1]
    W = np.empty((M, K), dtype=np.complex128)
    grad = np.empty(K)
    sinr = np.empty(K)
    cdef double obj = _mac_eval(hv, p, c, W, grad, sinr)
    return obj, grad, sinr


cdef void _project(double[:] y, double P, double[:] out, double[:] work) nogil:
    """Projection onto {x >= 0, sum x <= P}; work has len(y) entries."""
    cdef Py_ssize_t n = y.shape[0], i, j
    cdef double s = 0.0, v, css, theta = 0.0
    for i in range(n):
        v = y[i] if y[i] > 0.0 else 0.0
        out[i] = v
        s += v
    if s <= P:
        return
    # insertion sort descending into work
    for i in range(n):
        v = out[i]
        j = i
        while j > 0 and work[j - 1] < v:
            work[j] = work[j - 1]
            j -= 1
        work[j] = v
    css = 0.0
    for i in range(n):
        css += work[i]
        if work[i] - (css - P) / (i + 1) > 0.0:
            theta = (css - P) / (i + 1)
    for i in range(n):
        v = out[i] - theta
        out[i] = v if v > 0.0 else 0.0


cdef inline double _dot(double[:] a, double[:] b) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


cdef inline double _vmax(double[:] a) nogil:
    cdef Py_ssize_t i
    cdef double m = a[0]
    for i in range(1, a.shape[0]):
        if a[i] > m:
            m = a[i]
    return m


def weighted_mac_solve(h, coef, double P, double tol=1e-8, int max_iter=5000, x0=None):
    cdef double complex[:, ::1] hv = np.ascontiguousarray(h, dtype=np.complex128)
    cdef double[:] c = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t K = hv.shape[0], M = hv.shape[1], i
    cdef double complex[:, ::1] W = np.empty((M, K), dtype=np.complex128)
    x_arr = np.empty(K)
    cdef double[:] x = x_arr
    cdef double[:] xn = np.empty(K)
    cdef double[:] y = np.empty(K)
    cdef double[:] work = np.empty(K)
    cdef double[:] g = np.empty(K)
    cdef double[:] gn = np.empty(K)
    s_arr = np.empty(K)
    cdef double[:] s = s_arr
    cdef double[:] sn = np.empty(K)
    cdef double[:] step = np.empty(K)
    cdef double f, fn, gmax, t, gap, sy, ss, gs, lhs_tol
    cdef int it = 0
    cdef bint converged = False, stalled, moved
    if x0 is None:
        for i in range(K):
            x[i] = P / K
    else:
        y0 = np.ascontiguousarray(x0, dtype=np.float64)
        _project(y0, P, x, work)
    with nogil:
        f = _mac_eval(hv, x, c, W, g, s)
        gmax = _vmax(g)
        t = P / (K * gmax) if gmax > 0.0 else 1.0
        gap = INFINITY
        it = 0
        while it < max_iter:
            it += 1
            gap = P * (gmax if gmax > 0.0 else 0.0) - _dot(g, x)
            lhs_tol = tol * (fabs(f) if fabs(f) > 1.0 else 1.0)
            if gap <= lhs_tol:
                converged = True
                break
            stalled = False
            while True:
                for i in range(K):
                    y[i] = x[i] + t * g[i]
                _project(y, P, xn, work)
                for i in range(K):
                    step[i] = xn[i] - x[i]
                fn = _mac_eval(hv, xn, c, W, gn, sn)
                if fn >= f + 1e-4 * _dot(g, step) - ROUNDOFF * (fabs(f) if fabs(f) > 1.0 else 1.0):
                    break
                t *= 0.5
                if t < 1e-300:
                    stalled = True
                    break
            moved = False
            for i in range(K):
                if step[i] != 0.0:
                    moved = True
            if stalled or not moved:
                gap = P * (gmax if gmax > 0.0 else 0.0) - _dot(g, x)
                converged = gap <= lhs_tol
                break
            sy = 0.0
            ss = 0.0
            for i in range(K):
                sy += step[i] * (gn[i] - g[i])
                ss += step[i] * step[i]
                x[i] = xn[i]
                g[i] = gn[i]
                s[i] = sn[i]
            f = fn
            gmax = _vmax(g)
            if sy < 0.0:
                t = ss / (-sy)
            else:
                t *= 2.0
        else:
            gap = P * (gmax if gmax > 0.0 else 0.0) - _dot(g, x)
            converged = gap <= tol * (fabs(f) if fabs(f) > 1.0 else 1.0)
    return x_arr, f, s_arr, it, bool(converged), gap
