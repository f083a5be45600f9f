"""Dense complex linear-algebra helpers shared by the higher modules.

Everything here is a pure function of its inputs. Log-determinants are
always evaluated from a triangular factorization so that Gram matrices of
large channels at high SNR never overflow.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError, NotPositiveDefiniteError

LOG2E = 1.0 / np.log(2.0)

__all__ = [
    "LOG2E",
    "as_complex_matrix",
    "qr_decompose",
    "numerical_rank",
    "nullspace_basis",
    "nullspace_projector",
    "logdet",
    "logdet_nats",
    "sample_complex_gaussian",
    "child_rng",
]


def as_complex_matrix(A, name: str = "A") -> np.ndarray:
    """Return `A` as a finite 2-D complex array or raise."""
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A[np.newaxis, :]
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def qr_decompose(A) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR decomposition ``A = Q @ R`` of a complex matrix.

    Q has orthonormal columns and R is upper triangular.
    """
    A = as_complex_matrix(A)
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError("qr_decompose needs at least one row and one column")
    Q, R = np.linalg.qr(A, mode="reduced")
    return Q, R


def _rank_cutoff(s: np.ndarray, shape: tuple[int, int]) -> float:
    if s.size == 0:
        return 0.0
    return np.finfo(float).eps * max(shape) * s[0]


def numerical_rank(A) -> int:
    """Rank with cutoff ``eps * max(shape) * s_max``."""
    A = as_complex_matrix(A)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > _rank_cutoff(s, A.shape)))


def _stack_rows(rows: Sequence, ambient_dim: int) -> np.ndarray:
    if isinstance(rows, np.ndarray) and rows.ndim == 2:
        stacked = rows.astype(complex, copy=False)
    else:
        pieces = [np.atleast_2d(np.asarray(r, dtype=complex)) for r in rows]
        if not pieces:
            return np.zeros((0, ambient_dim), dtype=complex)
        for p in pieces:
            if p.shape[1] != ambient_dim:
                raise DimensionError(
                    f"row length {p.shape[1]} does not match ambient_dim {ambient_dim}"
                )
        stacked = np.vstack(pieces)
    if stacked.shape[1] != ambient_dim:
        raise DimensionError(
            f"row length {stacked.shape[1]} does not match ambient_dim {ambient_dim}"
        )
    if not np.all(np.isfinite(stacked)):
        raise InvalidInputError("constraint rows have non-finite entries")
    return stacked


def nullspace_basis(rows: Sequence, ambient_dim: int) -> np.ndarray:
    """Orthonormal basis (as columns) of the null space of the stacked rows.

    Returns an ``ambient_dim x d`` matrix ``V`` with ``r @ V == 0`` for every
    input row ``r`` and ``V^H V = I``.
    """
    stacked = _stack_rows(rows, ambient_dim)
    if stacked.shape[0] == 0:
        return np.eye(ambient_dim, dtype=complex)
    _, s, Vh = np.linalg.svd(stacked, full_matrices=True)
    rank = int(np.sum(s > _rank_cutoff(s, stacked.shape)))
    return Vh[rank:].conj().T


def nullspace_projector(rows: Sequence, ambient_dim: int) -> np.ndarray:
    """Orthogonal projector onto the null space of `rows`.

    Parameters
    ----------
    rows : sequence of 1-D arrays, or a 2-D array
        Constraint row vectors, each of length `ambient_dim`. May be empty.
    ambient_dim : int
        Dimension of the space the rows live in.

    Returns
    -------
    np.ndarray
        Hermitian, idempotent ``ambient_dim x ambient_dim`` matrix ``P`` such
        that ``r @ P == 0`` for every row. Row vectors are projected by
        right-multiplication, ``h @ P``.
    """
    V = nullspace_basis(rows, ambient_dim)
    return V @ V.conj().T


def logdet_nats(A) -> float:
    """Natural-log determinant of a Hermitian positive definite matrix."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"logdet needs a square matrix, got {A.shape}")
    if A.shape[0] == 0:
        return 0.0
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("logdet input has non-finite entries")
    try:
        L = np.linalg.cholesky(0.5 * (A + A.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    d = np.real(np.diagonal(L))
    if np.any(d <= 0.0):
        raise NotPositiveDefiniteError("non-positive Cholesky pivot")
    return float(2.0 * np.sum(np.log(d)))


def logdet(A) -> float:
    """Base-2 log-determinant ``log2 |A|`` of a Hermitian PD matrix."""
    return logdet_nats(A) * LOG2E


def sample_complex_gaussian(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """iid circularly-symmetric complex Gaussian entries of unit variance."""
    z = rng.standard_normal((rows, cols, 2))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def child_rng(seed: int, *index: int) -> np.random.Generator:
    """Generator whose stream depends only on ``(seed, *index)``.

    Trial ``i`` of an experiment uses ``child_rng(seed, i)``; the result is
    the same no matter how trials are scheduled across workers.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.PCG64(ss))
