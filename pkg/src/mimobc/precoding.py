"""Interference-free precoders and the effective channels they leave behind.

Every rate formula downstream consumes one of three families of quantities:

* zero-forcing gains ``|g_{k,n}|^2``, one per receive antenna;
* block-diagonalization Gram matrices ``G_k G_k^H``, one ``N x N`` per user;
* successive (ZF-DPC) projections ``f_k`` / ``F_k`` for a given encoding order.

All reported numbers are basis invariant, so any orthonormal null-space basis
gives the same result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .channel import ChannelSet
from .errors import DimensionError, InfeasiblePrecoderError, RankError
from .matkernel import nullspace_basis, numerical_rank

__all__ = [
    "Scheme",
    "PrecodingResult",
    "zf_effective_gains",
    "bd_effective_channels",
    "zfdpc_successive_projection",
]


class Scheme(str, Enum):
    ZF = "ZF"
    BD = "BD"
    ZFDPC = "ZFDPC"


@dataclass
class PrecodingResult:
    """Effective channels produced by one precoding scheme.

    Only the fields relevant to `scheme` are populated.
    """

    scheme: Scheme
    zf_gains: Optional[np.ndarray] = None
    zf_precoders: Optional[np.ndarray] = None
    bd_effective: Optional[list] = None
    bd_grams: Optional[list] = None
    zfdpc_norms: Optional[np.ndarray] = None
    zfdpc_grams: Optional[list] = None
    order: tuple = field(default_factory=tuple)


def _check_feasible(cs: ChannelSet) -> np.ndarray:
    if not cs.dims.fully_loaded_or_under:
        raise InfeasiblePrecoderError(
            f"interference-free precoding needs M >= K*N (M={cs.dims.M}, K*N={cs.dims.KN})"
        )
    H = cs.H
    if numerical_rank(H) < cs.dims.KN:
        raise RankError("concatenated channel is rank deficient")
    return H


def zf_effective_gains(cs: ChannelSet, with_precoders: bool = False) -> PrecodingResult:
    """Per-antenna zero-forcing gains.

    The precoder for row ``h_{k,n}`` of the concatenated channel is the unit
    vector along its projection onto the null space of the other ``KN - 1``
    rows. That projection has squared norm ``1 / [(H H^H)^{-1}]_{ii}``, which
    is what is computed here.
    """
    H = _check_feasible(cs)
    Ginv = np.linalg.inv(H @ H.conj().T)
    gains = 1.0 / np.real(np.diagonal(Ginv))
    res = PrecodingResult(Scheme.ZF, zf_gains=gains)
    if with_precoders:
        # columns of H^H (H H^H)^{-1} are the projected rows scaled by 1/gain
        V = H.conj().T @ Ginv
        res.zf_precoders = V / np.linalg.norm(V, axis=0, keepdims=True)
    return res


def bd_effective_channels(cs: ChannelSet) -> PrecodingResult:
    """Block-diagonalization effective channels ``G_k = H_k V_k``.

    ``V_k`` is an orthonormal basis of the null space of all other users'
    channels, so ``G_k`` is ``N x (M - (K-1)N)``.
    """
    H = _check_feasible(cs)
    K, N, M = cs.dims.K, cs.dims.N, cs.dims.M
    eff, grams = [], []
    for k in range(K):
        others = np.delete(H, np.s_[k * N:(k + 1) * N], axis=0)
        V = nullspace_basis(others, M)
        G = cs.per_user[k] @ V
        eff.append(G)
        grams.append(G @ G.conj().T)
    return PrecodingResult(Scheme.BD, bd_effective=eff, bd_grams=grams)


def _check_order(order: Optional[Sequence[int]], K: int) -> tuple:
    if order is None:
        return tuple(range(K))
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(K)):
        raise DimensionError(f"order {order} is not a permutation of range({K})")
    return order


def zfdpc_successive_projection(cs: ChannelSet, order: Optional[Sequence[int]] = None) -> PrecodingResult:
    """Project each user onto the null space of the users encoded before it.

    Parameters
    ----------
    cs : ChannelSet
    order : sequence of int, optional
        Encoding order (0-based user indices). The first user is projected
        onto nothing. Defaults to index order.

    Returns
    -------
    PrecodingResult
        ``zfdpc_norms`` holds the per-row successive gains (``||f||^2`` of
        the i-th user in `order` when ``N = 1``); ``zfdpc_grams[i]`` is
        ``F F^H`` for the i-th user in `order`.
    """
    _check_feasible(cs)
    K, N = cs.dims.K, cs.dims.N
    order = _check_order(order, K)
    Hord = np.vstack([cs.per_user[k] for k in order])
    if N == 1:
        norms = kernels.successive_norms(Hord)
        grams = [np.array([[v]], dtype=complex) for v in norms]
        return PrecodingResult(Scheme.ZFDPC, zfdpc_norms=norms, zfdpc_grams=grams, order=order)
    # H_ord = L Q^H with L lower triangular; the k-th diagonal block of L
    # carries user k's channel restricted to the complement of earlier users.
    Q, R = np.linalg.qr(Hord.conj().T, mode="reduced")
    L = R.conj().T
    grams = []
    for i in range(K):
        blk = L[i * N:(i + 1) * N, i * N:(i + 1) * N]
        grams.append(blk @ blk.conj().T)
    norms = np.abs(np.diagonal(L)) ** 2
    return PrecodingResult(Scheme.ZFDPC, zfdpc_norms=norms, zfdpc_grams=grams, order=order)
