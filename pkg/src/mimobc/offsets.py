"""Closed-form rate and power offsets between DPC and linear precoding.

Every offset here is a finite combination of harmonic numbers, so each is
available both as a float in bps/Hz and as an exact rational number of nats
(``OffsetReport.exact``). The rational form makes identity checks exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .channel import SnrProfile, SystemDims
from .errors import DomainError

LOG2E = 1.0 / math.log(2.0)
EULER_GAMMA = 0.57721566490153286061

__all__ = [
    "OffsetReport",
    "digamma_int",
    "harmonic",
    "wishart_logdet_mean",
    "beta_dpc_zf",
    "beta_dpc_zf_bigM",
    "zf_loss_square_nats",
    "delta_dpc_zf_asymptotic",
    "beta_dpc_bd",
    "beta_bd_zf",
    "delta_bd_zf_square",
    "weighted_beta_dpc_zf",
    "offsets_unequal_snr_invariance",
]


@dataclass(frozen=True)
class OffsetReport:
    """A rate offset and the power offset it implies.

    Attributes
    ----------
    beta : float
        Rate offset in bps/Hz.
    delta : float
        Power offset in dB, ``3 * beta / slope``.
    source : str
        ``"closed_form"`` or ``"monte_carlo"``.
    dims : SystemDims
    stderr : float, optional
        Standard error of `beta` (Monte Carlo only).
    exact : Fraction, optional
        `beta` in nats as an exact rational (closed forms only).
    slope : float
        Multiplexing gain the two compared rate curves share; ``K*N`` for
        sum rates, 1 for weighted sum rates with normalized weights.
    """

    beta: float
    delta: float
    source: str
    dims: SystemDims
    stderr: Optional[float] = None
    exact: Optional[Fraction] = None
    slope: float = 1.0

    @classmethod
    def closed(cls, nats: Fraction, dims: SystemDims, slope: float) -> "OffsetReport":
        beta = LOG2E * float(nats)
        return cls(beta, 3.0 * beta / slope, "closed_form", dims, None, nats, slope)


def harmonic(m: int) -> Fraction:
    """Exact harmonic number ``1 + 1/2 + ... + 1/m`` (0 for m = 0)."""
    return sum((Fraction(1, l) for l in range(1, m + 1)), Fraction(0))


def digamma_int(m: int) -> float:
    """Digamma at a positive integer, ``psi(1) + sum_{l<m} 1/l``."""
    if int(m) != m or m < 1:
        raise DomainError(f"digamma_int needs a positive integer, got {m!r}")
    m = int(m)
    return math.fsum([-EULER_GAMMA] + [1.0 / l for l in range(1, m)])


def wishart_logdet_mean(m: int, n: int) -> float:
    """``E[ln |W|]`` for an ``m x m`` complex Wishart matrix with n d.o.f."""
    if int(m) != m or int(n) != n or m < 1:
        raise DomainError("m and n must be positive integers")
    if n < m:
        raise DomainError(f"need n >= m, got m={m}, n={n}")
    return math.fsum(digamma_int(n - l) for l in range(m))


def _dims(M: int, K: int, N: int) -> SystemDims:
    dims = SystemDims(M, K, N)
    if not dims.fully_loaded_or_under:
        raise DomainError(f"closed-form offsets need M >= K*N, got M={M}, K*N={K * N}")
    return dims


def beta_dpc_zf(M: int, K: int, N: int = 1) -> OffsetReport:
    """Expected sum-rate loss of zero-forcing relative to DPC.

    Depends on K and N only through ``K*N``; ``beta_dpc_zf(M, KN)`` is the
    same as ``beta_dpc_zf(M, K, N)``.
    """
    dims = _dims(M, K, N)
    KN = dims.KN
    nats = sum((Fraction(j, M - j) for j in range(1, KN)), Fraction(0))
    return OffsetReport.closed(nats, dims, KN)


def beta_dpc_zf_bigM(M: int) -> float:
    """Large-M growth ``M log2 M`` of the ZF loss when ``M = K``."""
    if M < 2:
        raise DomainError("beta_dpc_zf_bigM needs M >= 2")
    return M * math.log2(M)


def zf_loss_square_nats(M: int) -> Fraction:
    """``sum_{j<M} j/(M-j)``: the M = KN zero-forcing loss in nats."""
    if M < 1:
        raise DomainError("M must be positive")
    return sum((Fraction(j, M - j) for j in range(1, M)), Fraction(0))


def delta_dpc_zf_asymptotic(alpha: float) -> float:
    """Limiting ZF power penalty (dB) as ``K*N -> inf`` with ``M = alpha*K*N``."""
    if not alpha > 1:
        raise DomainError(f"alpha must exceed 1, got {alpha}")
    return -3.0 * (LOG2E + alpha * math.log2(1.0 - 1.0 / alpha))


def beta_dpc_bd(M: int, K: int, N: int) -> OffsetReport:
    """Expected sum-rate loss of block diagonalization relative to DPC."""
    dims = _dims(M, K, N)
    nats = Fraction(0)
    for k in range(K):
        for n in range(N):
            for i in range(k * N + 1, (K - 1) * N + 1):
                nats += Fraction(1, M - n - i)
    return OffsetReport.closed(nats, dims, dims.KN)


def beta_bd_zf(M: int, K: int, N: int) -> OffsetReport:
    """Expected sum-rate gain of BD over ZF for ``M = alpha*K*N``, alpha >= 1.

    Equals ``beta_dpc_zf(M, K*N) - beta_dpc_bd(M, K, N)`` exactly.
    """
    dims = _dims(M, K, N)
    KN = dims.KN
    nats = K * sum((Fraction(N - j, M - KN + j) for j in range(1, N)), Fraction(0))
    return OffsetReport.closed(nats, dims, KN)


def delta_bd_zf_square(N: int) -> float:
    """BD-over-ZF power advantage (dB) when ``M = K*N``; independent of K."""
    if int(N) != N or N < 1:
        raise DomainError("N must be a positive integer")
    s = sum((Fraction(N - j, j) for j in range(1, N)), Fraction(0))
    return 3.0 * LOG2E * float(s) / N


def weighted_beta_dpc_zf(mu: Sequence[float], M: int, K: int) -> OffsetReport:
    """Expected weighted-sum-rate loss of ZF vs DPC (single-antenna users).

    `mu` must already be sorted descending and sum to one: the weight order
    fixes the DPC encoding order, so it is not rearranged here. Weights may
    be ``Fraction`` instances, in which case ``exact`` is exact; float
    weights enter ``exact`` at their binary value.
    """
    raw = list(mu)
    w = np.array([float(m) for m in raw])
    dims = _dims(M, K, 1)
    if w.shape != (K,):
        raise DomainError(f"need {K} weights, got {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise DomainError("weights must be nonnegative and sum to one")
    if np.any(np.diff(w) > 0):
        raise DomainError("weights must be sorted in descending order")
    zetas = [harmonic(M - k) - harmonic(M - K) for k in range(1, K + 1)]
    nats_f = math.fsum(float(m) * float(z) for m, z in zip(w, zetas))
    exact = sum((Fraction(m) * z for m, z in zip(raw, zetas)), Fraction(0))
    beta = LOG2E * nats_f
    return OffsetReport(beta, 3.0 * beta, "closed_form", dims, None, exact, 1.0)


def offsets_unequal_snr_invariance(dims: SystemDims, gamma: Sequence[float], trials: int,
                                   P: float, seed: int, workers: int = 1) -> dict:
    """Monte Carlo check that the DPC-ZF and DPC-BD offsets ignore gamma.

    Returns a dict keyed by pair (``"DPC-ZF"``, ``"DPC-BD"``) with the
    estimate, its closed-form target, the deviation in standard errors and
    a ``within_3se`` flag.
    """
    from .montecarlo import run_offset_estimate

    dims.require_full()
    profile = SnrProfile(tuple(gamma))
    P_db = 10.0 * math.log10(P)
    targets = {
        "DPC-ZF": beta_dpc_zf(dims.M, dims.K, dims.N).beta,
        "DPC-BD": beta_dpc_bd(dims.M, dims.K, dims.N).beta,
    }
    out = {}
    for pair, target in targets.items():
        est = run_offset_estimate(dims, profile, P_db, trials, seed, pair, workers=workers)
        z = abs(est.beta - target) / est.stderr if est.stderr > 0 else math.inf
        out[pair] = {"estimate": est, "target": target, "z": z, "within_3se": z <= 3.0}
    return out
