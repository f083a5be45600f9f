"""Exact and asymptotic (weighted) sum rates for DPC, ZF and BD.

All public functions return bps/Hz (base-2 logs). Internally the dual-MAC
solvers work in nats; the conversion happens once, on the way out.

Conventions
-----------
* ``P`` is the total transmit SNR in linear scale.
* Weighted problems sort users by descending weight (ties broken by lower
  index). The user with the largest weight is decoded last in the dual MAC,
  so it sees no interference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .channel import ChannelSet, SystemDims
from .errors import DimensionError, DomainError
from .matkernel import LOG2E, logdet, logdet_nats
from .precoding import bd_effective_channels, zf_effective_gains, zfdpc_successive_projection

__all__ = [
    "PowerAllocation",
    "WeightVector",
    "AffineApprox",
    "SolverOptions",
    "DualMacResult",
    "waterfill",
    "dpc_sum_rate_uniform",
    "dpc_sum_rate_exact",
    "zf_sum_rate",
    "bd_sum_rate",
    "point_to_point_capacity",
    "weighted_sum_rate_dpc_exact",
    "weighted_sum_rate_approx",
    "weighted_parallel_kkt",
    "proportional_user_rates",
    "dual_mac_objective",
    "mac_user_rates",
    "affine_approx",
    "heuristic_powers",
    "weighted_overloaded_heuristics",
]

POLICIES = ("uniform", "waterfill")


@dataclass
class PowerAllocation:
    """Nonnegative per-stream powers that fit in the budget."""

    per_stream: np.ndarray
    budget: float
    level: Optional[float] = None

    def __post_init__(self):
        self.per_stream = np.asarray(self.per_stream, dtype=float)
        if np.any(self.per_stream < 0):
            raise DomainError("negative power in allocation")
        if self.per_stream.sum() > self.budget * (1 + 1e-9):
            raise DomainError("allocation exceeds the power budget")


@dataclass(frozen=True)
class WeightVector:
    """User weights, normalized to sum to one and sorted descending.

    ``perm[i]`` is the original index of the i-th largest weight.
    """

    mu: tuple
    perm: tuple

    @classmethod
    def from_raw(cls, mu: Sequence[float]) -> "WeightVector":
        w = np.asarray(mu, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DimensionError("weights must be a nonempty 1-D sequence")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise DomainError("weights must not all be zero")
        w = w / total
        perm = np.argsort(-w, kind="stable")
        return cls(tuple(float(x) for x in w[perm]), tuple(int(i) for i in perm))

    @property
    def K(self) -> int:
        return len(self.mu)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.mu)

    def layer_coefficients(self) -> np.ndarray:
        """``mu_k - mu_{k+1}`` with ``mu_{K+1} = 0`` (all nonnegative)."""
        w = self.values
        return w - np.append(w[1:], 0.0)

    def unsort(self, values) -> np.ndarray:
        """Map per-user values from sorted order back to original indices."""
        out = np.empty(len(values), dtype=np.asarray(values).dtype)
        out[list(self.perm)] = values
        return out


@dataclass(frozen=True)
class AffineApprox:
    """High-SNR expansion ``C(P) ~ s_inf * (log2 P - l_inf)``."""

    s_inf: float
    l_inf: float


@dataclass(frozen=True)
class SolverOptions:
    """Stopping rules for the dual-MAC optimizers.

    `tol` bounds the Frank-Wolfe duality gap relative to ``max(1, |obj|)``.
    """

    tol: float = 1e-8
    max_iter: int = 5000


@dataclass
class DualMacResult:
    """Optimum of a (weighted) dual-MAC problem.

    Attributes
    ----------
    value : float
        Objective in bps/Hz (weighted sum rate, or sum rate).
    user_rates : np.ndarray
        Per-user rates in bps/Hz, original user indices.
    allocation : list
        Per-user powers (N = 1) or ``N x N`` covariances, original indices.
    converged : bool
    iterations : int
    gap : float
        Certified bound on the suboptimality, in bps/Hz.
    order : tuple
        Users sorted by descending weight (decoded last to first).
    """

    value: float
    user_rates: np.ndarray
    allocation: list
    converged: bool
    iterations: int
    gap: float
    order: tuple = field(default_factory=tuple)

    def __float__(self) -> float:
        return float(self.value)


def _check_power(P: float) -> float:
    P = float(P)
    if not P > 0 or not math.isfinite(P):
        raise DomainError(f"P must be positive and finite, got {P}")
    return P


# --------------------------------------------------------------------------
# parallel channels
# --------------------------------------------------------------------------

def waterfill(gains, P) -> PowerAllocation:
    """KKT water-filling ``p_i = max(0, level - 1/g_i)`` with ``sum p = P``."""
    g = np.asarray(gains, dtype=float).ravel()
    if g.size == 0:
        raise DomainError("waterfill needs at least one channel")
    if np.any(g <= 0):
        raise DomainError("waterfill gains must be positive")
    P = _check_power(P)
    powers, level = kernels.waterfill(g, P)
    return PowerAllocation(powers, P, level)


def _parallel_rate(gains: np.ndarray, P: float, policy: str) -> float:
    if policy == "uniform":
        return float(np.sum(np.log2(1.0 + (P / gains.size) * gains)))
    if policy == "waterfill":
        g = gains[gains > 0]
        p = waterfill(g, P).per_stream
        return float(np.sum(np.log2(1.0 + p * g)))
    raise DomainError(f"unknown policy {policy!r}; expected one of {POLICIES}")


def point_to_point_capacity(H, P, policy: str = "waterfill") -> float:
    """Capacity of a single-user MIMO channel with CSIT."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    P = _check_power(P)
    lam = np.clip(np.linalg.eigvalsh(H @ H.conj().T), 0.0, None)
    if policy == "uniform":
        return float(np.sum(np.log2(1.0 + (P / lam.size) * lam)))
    return _parallel_rate(lam, P, policy)


# --------------------------------------------------------------------------
# sum rates
# --------------------------------------------------------------------------

def dpc_sum_rate_uniform(cs: ChannelSet, P) -> float:
    """``log2 |I + (P/KN) H^H H|`` evaluated in the ``KN x KN`` Gram form."""
    P = _check_power(P)
    H = cs.H
    KN = cs.dims.KN
    return logdet(np.eye(KN) + (P / KN) * (H @ H.conj().T))


def zf_sum_rate(cs: ChannelSet, P, policy: str = "uniform") -> float:
    """Zero-forcing sum rate over the KN parallel channels."""
    P = _check_power(P)
    gains = zf_effective_gains(cs).zf_gains
    return _parallel_rate(gains, P, policy)


def bd_sum_rate(cs: ChannelSet, P, policy: str = "uniform") -> float:
    """Block-diagonalization sum rate.

    `uniform` gives every stream ``P / KN``. `waterfill` pools the
    eigenvalues of all ``G_k G_k^H`` and water-fills across them.
    """
    P = _check_power(P)
    grams = bd_effective_channels(cs).bd_grams
    if policy == "uniform":
        KN = cs.dims.KN
        N = cs.dims.N
        return float(sum(logdet(np.eye(N) + (P / KN) * G) for G in grams))
    lam = np.concatenate([np.clip(np.linalg.eigvalsh(G), 0.0, None) for G in grams])
    return _parallel_rate(lam, P, policy)


# --------------------------------------------------------------------------
# dual MAC with matrix covariances (N > 1)
# --------------------------------------------------------------------------

def _mac_matrix_eval(Hs, Qs, coef):
    """Objective (nats), gradients and per-layer log-dets for matrix inputs."""
    M = Hs[0].shape[1]
    K = len(Hs)
    A = np.eye(M, dtype=complex)
    obj = 0.0
    logdets = np.empty(K)
    grads = [np.zeros_like(Q) for Q in Qs]
    for k in range(K):
        A = A + Hs[k].conj().T @ Qs[k] @ Hs[k]
        ld = logdet_nats(A)
        logdets[k] = ld
        obj += coef[k] * ld
        if coef[k] != 0.0:
            Ainv = np.linalg.inv(A)
            for j in range(k + 1):
                grads[j] = grads[j] + coef[k] * (Hs[j] @ Ainv @ Hs[j].conj().T)
    grads = [0.5 * (G + G.conj().T) for G in grads]
    return obj, grads, logdets


def _project_covariances(Ys, P):
    """Project Hermitian matrices onto ``{Q_k >= 0, sum tr Q_k <= P}``."""
    eigs, vecs = [], []
    for Y in Ys:
        w, V = np.linalg.eigh(0.5 * (Y + Y.conj().T))
        eigs.append(w)
        vecs.append(V)
    sizes = [w.size for w in eigs]
    lam = kernels.project_capped_simplex(np.concatenate(eigs), P)
    out, start = [], 0
    for V, n in zip(vecs, sizes):
        l = lam[start:start + n]
        start += n
        out.append((V * l) @ V.conj().T)
    return out


def _inner(As, Bs) -> float:
    return float(sum(np.real(np.vdot(a, b)) for a, b in zip(As, Bs)))


def _fw_gap(grads, Qs, P) -> float:
    lmax = max(float(np.linalg.eigvalsh(G)[-1]) for G in grads)
    return P * max(lmax, 0.0) - _inner(grads, Qs)


def _matrix_mac_solve(Hs, coef, P, opts: SolverOptions, Q0=None):
    K = len(Hs)
    N = Hs[0].shape[0]
    if Q0 is None:
        Qs = [np.eye(N, dtype=complex) * (P / (K * N)) for _ in range(K)]
    else:
        Qs = _project_covariances(Q0, P)
    f, g, lds = _mac_matrix_eval(Hs, Qs, coef)
    gmax = max(float(np.linalg.eigvalsh(G)[-1]) for G in g)
    t = P / (K * N * gmax) if gmax > 0 else 1.0
    converged = False
    gap = math.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        gap = _fw_gap(g, Qs, P)
        if gap <= opts.tol * max(1.0, abs(f)):
            converged = True
            break
        while True:
            Qn = _project_covariances([Q + t * G for Q, G in zip(Qs, g)], P)
            step = [a - b for a, b in zip(Qn, Qs)]
            fn, gn, ldn = _mac_matrix_eval(Hs, Qn, coef)
            if fn >= f + 1e-4 * _inner(g, step) - 1e-13 * max(1.0, abs(f)):
                break
            t *= 0.5
            if t < 1e-300:
                break
        ss = _inner(step, step)
        if t < 1e-300 or ss == 0.0:
            gap = _fw_gap(g, Qs, P)
            converged = gap <= opts.tol * max(1.0, abs(f))
            break
        sy = _inner(step, [a - b for a, b in zip(gn, g)])
        Qs, f, g, lds = Qn, fn, gn, ldn
        t = ss / (-sy) if sy < 0 else 2.0 * t
    else:
        gap = _fw_gap(g, Qs, P)
        converged = gap <= opts.tol * max(1.0, abs(f))
    rates = np.diff(np.concatenate([[0.0], lds]))
    return Qs, f, rates, it, converged, gap


# --------------------------------------------------------------------------
# exact DPC via the dual MAC
# --------------------------------------------------------------------------

def dual_mac_objective(cs: ChannelSet, mu, allocation) -> tuple[float, np.ndarray]:
    """Weighted dual-MAC objective and its gradient at a fixed allocation.

    Uses the concave layered form ``sum_k (mu_k - mu_{k+1}) ln|A_k|``. For
    ``N = 1`` `allocation` is a vector of per-user powers (original order)
    and the gradient is a vector; for ``N > 1`` it is a list of covariances.
    Both are returned in nats and in original user order.
    """
    wv = WeightVector.from_raw(mu)
    coef = wv.layer_coefficients()
    if cs.dims.N == 1:
        h = cs.H[list(wv.perm)]
        p = np.asarray(allocation, dtype=float)[list(wv.perm)]
        f, g, _ = kernels.mac_eval(h, p, coef)
        return f, wv.unsort(g)
    Hs = [cs.per_user[k] for k in wv.perm]
    Qs = [np.asarray(allocation[k], dtype=complex) for k in wv.perm]
    f, grads, _ = _mac_matrix_eval(Hs, Qs, coef)
    out = [None] * len(grads)
    for i, k in enumerate(wv.perm):
        out[k] = grads[i]
    return f, out


def mac_user_rates(cs: ChannelSet, mu, powers) -> np.ndarray:
    """Per-user dual-MAC rates (bps/Hz) at fixed powers, ``N = 1``.

    Users are decoded in order of increasing weight, so the largest weight
    is interference free.
    """
    if cs.dims.N != 1:
        raise DimensionError("mac_user_rates handles single-antenna users")
    wv = WeightVector.from_raw(mu)
    h = cs.H[list(wv.perm)]
    p = np.asarray(powers, dtype=float)[list(wv.perm)]
    _, _, sinr = kernels.mac_eval(h, p, np.zeros(len(p)))
    return wv.unsort(np.log2(1.0 + p * sinr))


def _solve_weighted(cs: ChannelSet, wv: WeightVector, coef, P, opts) -> DualMacResult:
    perm = list(wv.perm)
    if cs.dims.N == 1:
        h = cs.H[perm]
        x, f, sinr, it, conv, gap = kernels.weighted_mac_solve(h, coef, P, opts.tol, opts.max_iter)
        rates = np.log2(1.0 + x * sinr)
        return DualMacResult(f * LOG2E, wv.unsort(rates), [float(v) for v in wv.unsort(x)],
                             bool(conv), int(it), gap * LOG2E, tuple(perm))
    Hs = [cs.per_user[k] for k in perm]
    Qs, f, rates, it, conv, gap = _matrix_mac_solve(Hs, coef, P, opts)
    alloc = [None] * len(Qs)
    for i, k in enumerate(perm):
        alloc[k] = Qs[i]
    return DualMacResult(f * LOG2E, wv.unsort(rates * LOG2E), alloc,
                         bool(conv), int(it), gap * LOG2E, tuple(perm))


def dpc_sum_rate_exact(cs: ChannelSet, P, opts: Optional[SolverOptions] = None) -> DualMacResult:
    """Sum capacity ``max log2 |I + sum_k H_k^H Q_k H_k|`` over the dual MAC.

    Projected gradient ascent on the covariances (scalar powers when
    ``N = 1``). Never raises on slow convergence; check ``converged``.
    """
    P = _check_power(P)
    opts = opts or SolverOptions()
    K = cs.dims.K
    wv = WeightVector(tuple([1.0 / K] * K), tuple(range(K)))
    coef = np.zeros(K)
    coef[-1] = 1.0
    return _solve_weighted(cs, wv, coef, P, opts)


def weighted_sum_rate_dpc_exact(cs: ChannelSet, mu, P,
                                opts: Optional[SolverOptions] = None) -> DualMacResult:
    """Maximum of ``sum_k mu_k R_k`` over the DPC capacity region.

    `mu` is normalized and sorted internally; ``result.order`` records the
    applied permutation.
    """
    P = _check_power(P)
    opts = opts or SolverOptions()
    wv = WeightVector.from_raw(mu)
    if wv.K != cs.dims.K:
        raise DimensionError(f"{wv.K} weights for K={cs.dims.K} users")
    return _solve_weighted(cs, wv, wv.layer_coefficients(), P, opts)


# --------------------------------------------------------------------------
# proportional (mu_k P) allocation
# --------------------------------------------------------------------------

def weighted_sum_rate_approx(cs: ChannelSet, mu, P, scheme: str = "DPC",
                             evaluate: str = "decoupled") -> float:
    """Weighted sum rate when user k gets power ``mu_k P``.

    Parameters
    ----------
    scheme : {"DPC", "ZF", "BD"}
        ``DPC`` uses the successive projections ``f_k`` / ``F_k`` with users
        encoded in descending-weight order.
    evaluate : {"decoupled", "exact"}
        ``decoupled`` evaluates the high-SNR parallel-channel form
        (``sum mu_k log2(1 + mu_k P ||f_k||^2)`` and its N > 1 analogue).
        ``exact`` evaluates the true dual-MAC objective at the same powers
        (DPC only); it is the rate actually delivered by this policy.
    """
    P = _check_power(P)
    wv = WeightVector.from_raw(mu)
    if wv.K != cs.dims.K:
        raise DimensionError(f"{wv.K} weights for K={cs.dims.K} users")
    N = cs.dims.N
    scheme = scheme.upper()
    if scheme in ("DPC", "DPC_ZFDPC", "ZFDPC"):
        if evaluate == "exact":
            return _proportional_exact(cs, wv, P)
        proj = zfdpc_successive_projection(cs, wv.perm)
        total = 0.0
        for i, G in enumerate(proj.zfdpc_grams):
            m = wv.mu[i]
            if m > 0:
                total += m * logdet(np.eye(N) + (m * P / N) * G)
        return float(total)
    if evaluate != "decoupled":
        raise DomainError("evaluate='exact' is only defined for DPC")
    w = wv.unsort(np.asarray(wv.mu))
    if scheme == "ZF":
        gains = zf_effective_gains(cs).zf_gains.reshape(cs.dims.K, N)
        return float(sum(w[k] * np.sum(np.log2(1.0 + (w[k] * P / N) * gains[k]))
                         for k in range(cs.dims.K) if w[k] > 0))
    if scheme == "BD":
        grams = bd_effective_channels(cs).bd_grams
        return float(sum(w[k] * logdet(np.eye(N) + (w[k] * P / N) * grams[k])
                         for k in range(cs.dims.K) if w[k] > 0))
    raise DomainError(f"unknown scheme {scheme!r}")


def _proportional_exact(cs: ChannelSet, wv: WeightVector, P) -> float:
    coef = wv.layer_coefficients()
    if cs.dims.N == 1:
        h = cs.H[list(wv.perm)]
        f, _, _ = kernels.mac_eval(h, np.asarray(wv.mu) * P, coef)
        return f * LOG2E
    N = cs.dims.N
    Hs = [cs.per_user[k] for k in wv.perm]
    Qs = [np.eye(N, dtype=complex) * (m * P / N) for m in wv.mu]
    f, _, _ = _mac_matrix_eval(Hs, Qs, coef)
    return f * LOG2E


def proportional_user_rates(cs: ChannelSet, mu, P) -> np.ndarray:
    """Per-user dual-MAC rates (bps/Hz) when user k gets ``mu_k P``.

    Larger weights are decoded later. For ``N > 1`` the covariance is
    ``(mu_k P / N) I``.
    """
    P = _check_power(P)
    wv = WeightVector.from_raw(mu)
    if wv.K != cs.dims.K:
        raise DimensionError(f"{wv.K} weights for K={cs.dims.K} users")
    if cs.dims.N == 1:
        return mac_user_rates(cs, wv.unsort(np.asarray(wv.mu)), wv.unsort(np.asarray(wv.mu)) * P)
    N = cs.dims.N
    Hs = [cs.per_user[k] for k in wv.perm]
    Qs = [np.eye(N, dtype=complex) * (m * P / N) for m in wv.mu]
    _, _, lds = _mac_matrix_eval(Hs, Qs, np.zeros(len(Hs)))
    return wv.unsort(np.diff(np.concatenate([[0.0], lds])) * LOG2E)


def weighted_parallel_kkt(norms, mu, P) -> PowerAllocation:
    """Maximize ``sum mu_k log(1 + P_k a_k)`` subject to ``sum P_k = P``.

    When every user is active the solution is
    ``P_k = mu_k P + mu_k sum_i 1/a_i - 1/a_k``; otherwise the weakest
    users (largest ``1/(mu_k a_k)``) are switched off until the rest are
    nonnegative. `mu` must sum to one and is used in the given order.
    """
    a = np.asarray(norms, dtype=float)
    w = np.asarray(mu, dtype=float)
    if a.shape != w.shape:
        raise DimensionError("norms and weights differ in length")
    if np.any(a <= 0):
        raise DomainError("channel norms must be positive")
    P = _check_power(P)
    out = np.zeros_like(a)
    live = np.nonzero(w > 0)[0]
    # water level 1/nu: user k is active when 1/nu > 1/(mu_k a_k)
    thresh = 1.0 / (w[live] * a[live])
    order = live[np.argsort(thresh, kind="stable")]
    inv = 1.0 / a[order]
    for m in range(order.size, 0, -1):
        level = (P + inv[:m].sum()) / w[order[:m]].sum()
        if level * w[order[m - 1]] - inv[m - 1] >= 0:
            out[order[:m]] = level * w[order[:m]] - inv[:m]
            return PowerAllocation(out, P, level)
    raise DomainError("no feasible allocation")  # pragma: no cover


# --------------------------------------------------------------------------
# affine high-SNR approximation
# --------------------------------------------------------------------------

def affine_approx(scheme: str, dims: SystemDims, mode: str = "closed_form",
                  P1_db: float = 40.0, P2_db: float = 60.0,
                  trials: int = 2000, seed: int = 0) -> AffineApprox:
    """Multiplexing gain and power offset (3 dB units) of a scheme.

    ``closed_form`` uses the Wishart log-determinant means. ``numeric``
    fits a line through the ergodic uniform-power rates at two SNRs; the
    SNRs must be high because for ``M = KN`` the gap to the affine line
    decays slowly, and any slope error is amplified roughly ``C/S`` times
    in the offset.
    """
    from . import offsets

    dims.require_full()
    scheme = scheme.upper()
    if scheme not in ("DPC", "ZF", "BD"):
        raise DomainError(f"unknown scheme {scheme!r}")
    M, K, N = dims.M, dims.K, dims.N
    KN = dims.KN
    if mode == "closed_form":
        l_dpc = math.log2(KN) - LOG2E * offsets.wishart_logdet_mean(KN, M) / KN
        if scheme == "DPC":
            return AffineApprox(float(KN), float(l_dpc))
        if scheme == "ZF":
            return AffineApprox(float(KN), float(l_dpc + offsets.beta_dpc_zf(M, K, N).beta / KN))
        return AffineApprox(float(KN), float(l_dpc + offsets.beta_dpc_bd(M, K, N).beta / KN))
    if mode != "numeric":
        raise DomainError(f"unknown mode {mode!r}")
    if P2_db <= P1_db:
        raise DomainError("numeric mode needs P2_db > P1_db")
    from .matkernel import child_rng
    from .channel import sample_channel

    rate = {"DPC": dpc_sum_rate_uniform,
            "ZF": lambda c, p: zf_sum_rate(c, p, "uniform"),
            "BD": lambda c, p: bd_sum_rate(c, p, "uniform")}[scheme]
    P1, P2 = 10 ** (P1_db / 10), 10 ** (P2_db / 10)
    c1 = c2 = 0.0
    for i in range(trials):
        cs = sample_channel(dims, None, child_rng(seed, i))
        c1 += rate(cs, P1)
        c2 += rate(cs, P2)
    c1 /= trials
    c2 /= trials
    s = (c2 - c1) / math.log2(P2 / P1)
    return AffineApprox(float(s), float(math.log2(P2) - c2 / s))


# --------------------------------------------------------------------------
# more users than antennas
# --------------------------------------------------------------------------

def heuristic_powers(mu, P, M: int, strategy: str = "top_M") -> np.ndarray:
    """Powers for the two overloaded-system heuristics, original order.

    ``all_users`` gives ``mu_k P`` to everyone; ``top_M`` renormalizes the
    M largest weights and gives the rest nothing.
    """
    wv = WeightVector.from_raw(mu)
    w = np.asarray(wv.mu)
    if strategy == "all_users":
        p = w * P
    elif strategy == "top_M":
        keep = min(M, wv.K)
        p = np.zeros(wv.K)
        p[:keep] = w[:keep] / w[:keep].sum() * P
    else:
        raise DomainError(f"unknown strategy {strategy!r}")
    return wv.unsort(p)


def weighted_overloaded_heuristics(cs: ChannelSet, mu, P, strategy: str = "top_M") -> float:
    """Exact dual-MAC weighted sum rate at a heuristic power split (N = 1)."""
    if cs.dims.N != 1:
        raise DimensionError("overloaded heuristics are defined for N = 1")
    P = _check_power(P)
    p = heuristic_powers(mu, P, cs.dims.M, strategy)
    f, _ = dual_mac_objective(cs, mu, p)
    return f * LOG2E
