"""Pure-Python (numpy) versions of the hot kernels.

These are the reference implementations; ``_ckernels.pyx`` mirrors them line
for line. Both expose the same five functions.
"""

from __future__ import annotations

import math

import numpy as np

ROUNDOFF = 1e-13


def waterfill(gains, P):
    """KKT water-filling over parallel channels with unit noise.

    Returns ``(powers, level)`` with ``powers[i] = max(0, level - 1/gains[i])``
    and ``sum(powers) == P``.
    """
    g = np.asarray(gains, dtype=float)
    n = g.size
    order = np.argsort(-g, kind="stable")
    inv = 1.0 / g[order]
    csum = np.cumsum(inv)
    active = n
    level = (P + csum[-1]) / n
    while active > 1 and level <= inv[active - 1]:
        active -= 1
        level = (P + csum[active - 1]) / active
    powers = np.zeros(n)
    powers[order[:active]] = level - inv[:active]
    return powers, float(level)


def successive_norms(H):
    """Squared norms of each row after projecting out all earlier rows.

    Modified Gram-Schmidt over the rows of `H`, in order.
    """
    H = np.array(H, dtype=complex, copy=True)
    R = H.shape[0]
    out = np.empty(R)
    basis = []
    for r in range(R):
        v = H[r].copy()
        for q in basis:
            v -= np.vdot(q, v) * q
        nrm2 = float(np.real(np.vdot(v, v)))
        out[r] = nrm2
        if nrm2 > 0.0:
            basis.append(v / math.sqrt(nrm2))
    return out


def mac_eval(h, powers, coef):
    """Objective, gradient and per-stage SINRs of the scalar dual MAC.

    The objective is ``sum_k coef[k] * ln|A_k|`` with
    ``A_k = I + sum_{j<=k} powers[j] h_j^H h_j``. Rows of `h` are already in
    decoding order (row 0 decoded last, i.e. interference free).

    Returns
    -------
    obj : float
        Objective in nats.
    grad : np.ndarray
        Partial derivatives with respect to each power.
    sinr : np.ndarray
        ``h_k A_{k-1}^{-1} h_k^H``; user k's rate is ``ln(1 + p_k sinr_k)``.
    """
    h = np.asarray(h, dtype=complex)
    p = np.asarray(powers, dtype=float)
    c = np.asarray(coef, dtype=float)
    K = h.shape[0]
    W = h.conj().T.copy()
    grad = np.zeros(K)
    sinr = np.empty(K)
    obj = 0.0
    logA = 0.0
    for k in range(K):
        u = W[:, k].copy()
        d = float(np.real(h[k] @ u))
        sinr[k] = d
        denom = 1.0 + p[k] * d
        logA += math.log(denom)
        obj += c[k] * logA
        if p[k] != 0.0:
            cross = np.conj(h @ u)
            W -= np.outer(u, cross) * (p[k] / denom)
        if c[k] != 0.0:
            q = np.real(np.einsum("jm,mj->j", h[: k + 1], W[:, : k + 1]))
            grad[: k + 1] += c[k] * q
    return obj, grad, sinr


def project_capped_simplex(y, P):
    """Euclidean projection onto ``{x >= 0, sum(x) <= P}``."""
    x = np.maximum(np.asarray(y, dtype=float), 0.0)
    if x.sum() <= P:
        return x
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    rho = np.nonzero(u - (css - P) / j > 0)[0][-1]
    theta = (css[rho] - P) / (rho + 1)
    return np.maximum(x - theta, 0.0)


def weighted_mac_solve(h, coef, P, tol=1e-8, max_iter=5000, x0=None):
    """Maximize the scalar dual-MAC objective over ``p >= 0, sum(p) <= P``.

    Projected gradient ascent with Barzilai-Borwein steps and Armijo
    backtracking. Stops when the Frank-Wolfe duality gap, an upper bound on
    the distance to the optimum, drops below ``tol * max(1, |obj|)``.

    Returns ``(powers, obj, sinr, iterations, converged, gap)``.
    """
    h = np.asarray(h, dtype=complex)
    coef = np.asarray(coef, dtype=float)
    K = h.shape[0]
    if x0 is None:
        x = np.full(K, P / K)
    else:
        x = project_capped_simplex(x0, P)
    f, g, s = mac_eval(h, x, coef)
    gmax = g.max()
    t = P / (K * gmax) if gmax > 0 else 1.0
    converged = False
    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        gap = P * max(gmax, 0.0) - float(g @ x)
        if gap <= tol * max(1.0, abs(f)):
            converged = True
            break
        while True:
            xn = project_capped_simplex(x + t * g, P)
            step = xn - x
            fn, gn, sn = mac_eval(h, xn, coef)
            # slack for round-off in f: near the optimum f is flat to machine
            # precision while the gradient still points somewhere useful
            if fn >= f + 1e-4 * float(g @ step) - ROUNDOFF * max(1.0, abs(f)):
                break
            t *= 0.5
            if t < 1e-300:
                break
        if t < 1e-300 or not np.any(step):
            gap = P * max(gmax, 0.0) - float(g @ x)
            converged = gap <= tol * max(1.0, abs(f))
            break
        y = gn - g
        sy = float(step @ y)
        x, f, g, s = xn, fn, gn, sn
        gmax = g.max()
        if sy < 0.0:
            t = float(step @ step) / (-sy)
        else:
            t *= 2.0
    else:
        gap = P * max(gmax, 0.0) - float(g @ x)
        converged = gap <= tol * max(1.0, abs(f))
    return x, f, s, it, converged, gap
