"""MIMO broadcast channel realizations.

A :class:`ChannelSet` holds one draw of the K user channels ``H_k`` (each
``N x M``) together with the unit-variance draw ``H~_k`` it was scaled from,
so that the same fading can be re-weighted under a different average-SNR
profile.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError
from .matkernel import as_complex_matrix, numerical_rank, sample_complex_gaussian

__all__ = ["SystemDims", "SnrProfile", "ChannelSet", "sample_channel", "concatenate",
           "split_rows", "channel_from_matrix", "dump_channel_csv", "load_channel_csv"]


@dataclass(frozen=True)
class SystemDims:
    """Transmit antennas `M`, users `K`, receive antennas per user `N`."""

    M: int
    K: int
    N: int = 1

    def __post_init__(self):
        for name in ("M", "K", "N"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v!r}")

    @property
    def KN(self) -> int:
        return self.K * self.N

    @property
    def fully_loaded_or_under(self) -> bool:
        return self.M >= self.K * self.N

    def require_full(self) -> None:
        if not self.fully_loaded_or_under:
            raise DomainError(
                f"needs M >= K*N, got M={self.M}, K*N={self.KN}"
            )


@dataclass(frozen=True)
class SnrProfile:
    """Per-user average SNR multipliers (linear scale)."""

    gamma: tuple[float, ...]

    def __post_init__(self):
        g = tuple(float(x) for x in self.gamma)
        if not g or any(not np.isfinite(x) or x <= 0 for x in g):
            raise DomainError(f"gamma entries must be positive and finite, got {g}")
        object.__setattr__(self, "gamma", g)

    @classmethod
    def symmetric(cls, K: int) -> "SnrProfile":
        return cls((1.0,) * K)

    @classmethod
    def from_db(cls, gamma_db: Sequence[float]) -> "SnrProfile":
        return cls(tuple(10.0 ** (float(x) / 10.0) for x in gamma_db))

    @property
    def K(self) -> int:
        return len(self.gamma)

    @property
    def is_symmetric(self) -> bool:
        return all(x == 1.0 for x in self.gamma)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One realization of the broadcast channel.

    Attributes
    ----------
    dims : SystemDims
    per_user : tuple of np.ndarray
        ``H_k = sqrt(gamma_k) * H~_k``, each ``N x M``.
    profile : SnrProfile
    base : tuple of np.ndarray
        The unscaled ``H~_k``.
    """

    dims: SystemDims
    per_user: tuple
    profile: SnrProfile
    base: tuple = field(repr=False)

    def __post_init__(self):
        if len(self.per_user) != self.dims.K or len(self.base) != self.dims.K:
            raise DimensionError("number of user matrices does not match K")
        for H in self.per_user:
            if H.shape != (self.dims.N, self.dims.M):
                raise DimensionError(
                    f"user matrix shape {H.shape} != ({self.dims.N}, {self.dims.M})"
                )
            H.setflags(write=False)
        for H in self.base:
            H.setflags(write=False)

    @property
    def H(self) -> np.ndarray:
        """Concatenated ``KN x M`` channel, user-major rows."""
        return concatenate(self)

    def with_profile(self, profile: SnrProfile) -> "ChannelSet":
        """Same fading draw re-scaled to a different SNR profile."""
        if profile.K != self.dims.K:
            raise DimensionError(f"profile has {profile.K} entries, K={self.dims.K}")
        per_user = tuple(np.sqrt(g) * Ht for g, Ht in zip(profile.gamma, self.base))
        return ChannelSet(self.dims, per_user, profile, self.base)

    def rank(self) -> int:
        return numerical_rank(self.H)

    def has_full_row_rank(self) -> bool:
        return self.rank() == self.dims.KN

    def __eq__(self, other):
        if not isinstance(other, ChannelSet):
            return NotImplemented
        return (self.dims == other.dims and self.profile == other.profile
                and all(np.array_equal(a, b) for a, b in zip(self.per_user, other.per_user)))


def sample_channel(dims: SystemDims, profile: SnrProfile | None, rng: np.random.Generator) -> ChannelSet:
    """Draw an iid Rayleigh realization and scale user k by ``sqrt(gamma_k)``."""
    if profile is None:
        profile = SnrProfile.symmetric(dims.K)
    if profile.K != dims.K:
        raise DimensionError(f"profile has {profile.K} entries, K={dims.K}")
    Ht = sample_complex_gaussian(rng, dims.KN, dims.M)
    base = tuple(Ht[k * dims.N:(k + 1) * dims.N].copy() for k in range(dims.K))
    per_user = tuple(np.sqrt(g) * B for g, B in zip(profile.gamma, base))
    return ChannelSet(dims, per_user, profile, base)


def concatenate(cs: ChannelSet) -> np.ndarray:
    """Stack ``H_1, ..., H_K`` into the ``KN x M`` matrix (user-major)."""
    return np.vstack(cs.per_user)


def split_rows(H: np.ndarray, K: int, N: int) -> list[np.ndarray]:
    """Inverse of :func:`concatenate`."""
    H = np.asarray(H)
    if H.shape[0] != K * N:
        raise DimensionError(f"{H.shape[0]} rows cannot be split into K={K}, N={N}")
    return [H[k * N:(k + 1) * N] for k in range(K)]


def channel_from_matrix(H, K: int | None = None, N: int = 1,
                        profile: SnrProfile | None = None) -> ChannelSet:
    """Build a ChannelSet from an explicit concatenated channel.

    `H` is taken as the unit-variance draw; `profile` (if any) scales it.
    """
    H = as_complex_matrix(H, "H")
    if K is None:
        K = H.shape[0] // N
    dims = SystemDims(H.shape[1], K, N)
    base = tuple(B.copy() for B in split_rows(H, K, N))
    if profile is None:
        profile = SnrProfile.symmetric(K)
    if profile.K != K:
        raise DimensionError(f"profile has {profile.K} entries, K={K}")
    per_user = tuple(np.sqrt(g) * B for g, B in zip(profile.gamma, base))
    return ChannelSet(dims, per_user, profile, base)


def dump_channel_csv(cs: ChannelSet, path) -> None:
    """Write the concatenated channel, one row per matrix row.

    Columns are ``re_1, im_1, ..., re_M, im_M``. The first line is a comment
    carrying ``M K N`` and the SNR profile.
    """
    path = Path(path)
    H = cs.H
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# M={cs.dims.M} K={cs.dims.K} N={cs.dims.N} gamma="
                 + ";".join(repr(g) for g in cs.profile.gamma) + "\n")
        w = csv.writer(fh)
        w.writerow([f"{part}_{m + 1}" for m in range(cs.dims.M) for part in ("re", "im")])
        for row in H:
            w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


def load_channel_csv(path) -> ChannelSet:
    """Read a file written by :func:`dump_channel_csv`."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        meta = fh.readline().lstrip("#").split()
        info = dict(item.split("=", 1) for item in meta)
        reader = csv.reader(fh)
        next(reader)
        rows = [[float(x) for x in r] for r in reader if r]
    data = np.asarray(rows)
    H = data[:, 0::2] + 1j * data[:, 1::2]
    K, N = int(info["K"]), int(info["N"])
    gamma = tuple(float(g) for g in info["gamma"].split(";"))
    profile = SnrProfile(gamma)
    per_user = tuple(B.copy() for B in split_rows(H, K, N))
    base = tuple(B / np.sqrt(g) for g, B in zip(gamma, per_user))
    return ChannelSet(SystemDims(int(info["M"]), K, N), per_user, profile, base)
