"""Seeded trial harness: ergodic rate curves, offset estimates, power gaps.

Trial ``i`` draws its channel from ``child_rng(seed, i)`` and nothing else,
so a run gives the same numbers for any worker count. Workers only compute
per-trial rows; all reductions happen in the parent in trial order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

from . import rates
from .channel import ChannelSet, SnrProfile, SystemDims, sample_channel
from .errors import DomainError, MimoBCError
from .matkernel import child_rng
from .offsets import OffsetReport

__all__ = [
    "SCHEMES",
    "WEIGHTED_SCHEMES",
    "PAIRS",
    "ExperimentSpec",
    "SummaryStats",
    "CurveCell",
    "RateCurve",
    "db_to_linear",
    "trial_channel",
    "map_trials",
    "run_rate_curve",
    "run_offset_estimate",
    "run_power_convergence",
]

SCHEMES = ("DPC_exact", "DPC_uniform", "ZF_uniform", "ZF_waterfill", "BD_uniform", "BD_waterfill")
# weighted-sum-rate curves; these need ExperimentSpec.weights
WEIGHTED_SCHEMES = ("WSR_exact", "WSR_proportional", "WSR_proportional_decoupled",
                    "WSR_zf_proportional", "WSR_bd_proportional",
                    "WSR_all_users", "WSR_top_M")
PAIRS = ("DPC-ZF", "DPC-BD", "BD-ZF")
_LINEAR = {"ZF_uniform", "ZF_waterfill", "BD_uniform", "BD_waterfill",
           "WSR_zf_proportional", "WSR_bd_proportional"}


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (float(x_db) / 10.0)


@dataclass(frozen=True)
class SummaryStats:
    """Sample mean and its standard error (``std(ddof=1) / sqrt(n)``)."""

    mean: float
    stderr: float
    trials: int

    @classmethod
    def from_samples(cls, x) -> "SummaryStats":
        x = np.asarray(x, dtype=float)
        n = x.size
        if n == 0:
            raise DomainError("no samples")
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(float(np.mean(x)), se, int(n))


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce a rate curve.

    `weights` (raw, any order) is required for the ``WSR_*`` schemes.
    """

    dims: SystemDims
    snr_grid_db: tuple
    schemes: tuple = SCHEMES
    trials: int = 100
    seed: int = 0
    profile: Optional[SnrProfile] = None
    weights: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.profile is None:
            object.__setattr__(self, "profile", SnrProfile.symmetric(self.dims.K))
        if int(self.trials) < 1:
            raise DomainError("trials must be >= 1")
        if not self.snr_grid_db:
            raise DomainError("empty SNR grid")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise DomainError("SNR grid must be strictly increasing")
        unknown = [s for s in self.schemes if s not in SCHEMES + WEIGHTED_SCHEMES]
        if unknown:
            raise DomainError(f"unknown schemes {unknown}")
        if self.profile.K != self.dims.K:
            raise DomainError(f"profile has {self.profile.K} entries, K={self.dims.K}")
        if any(s in WEIGHTED_SCHEMES for s in self.schemes):
            if self.weights is None or len(self.weights) != self.dims.K:
                raise DomainError(f"weighted schemes need {self.dims.K} weights")


@dataclass(frozen=True)
class CurveCell:
    snr_db: float
    scheme: str
    stats: Optional[SummaryStats]
    error: Optional[str] = None


@dataclass
class RateCurve:
    """Result table of `run_rate_curve`, one cell per (SNR, scheme)."""

    spec: ExperimentSpec
    cells: list = field(default_factory=list)
    samples: Optional[np.ndarray] = None

    def get(self, snr_db: float, scheme: str) -> CurveCell:
        for c in self.cells:
            if c.scheme == scheme and c.snr_db == float(snr_db):
                return c
        raise KeyError((snr_db, scheme))

    def rows(self) -> list:
        """Rows ``(snr_db, scheme, mean, stderr, trials, seed)`` sorted by (snr, scheme)."""
        out = []
        for c in sorted(self.cells, key=lambda c: (c.snr_db, c.scheme)):
            if c.stats is None:
                out.append((c.snr_db, c.scheme, math.nan, math.nan, 0, self.spec.seed))
            else:
                out.append((c.snr_db, c.scheme, c.stats.mean, c.stats.stderr,
                            c.stats.trials, self.spec.seed))
        return out


# --------------------------------------------------------------------------
# trial plumbing
# --------------------------------------------------------------------------

def trial_channel(dims: SystemDims, profile: Optional[SnrProfile], seed: int, i: int) -> ChannelSet:
    """Channel realization of trial `i`; depends only on ``(seed, i)``."""
    return sample_channel(dims, profile, child_rng(seed, i))


def _run_chunk(fn: Callable, idx: Sequence[int]) -> list:
    return [fn(i) for i in idx]


def map_trials(fn: Callable[[int], object], trials: int, workers: int = 1) -> list:
    """``[fn(0), ..., fn(trials-1)]``, optionally over a process pool.

    `fn` must be picklable when ``workers > 1``. The result list is always
    in trial order.
    """
    if workers <= 1 or trials < 2:
        return [fn(i) for i in range(trials)]
    workers = min(int(workers), trials)
    bounds = np.linspace(0, trials, 4 * workers + 1).astype(int)
    chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(partial(_run_chunk, fn), chunks))
    return [r for part in parts for r in part]


def _scheme_value(scheme: str, cs: ChannelSet, P: float, mu) -> float:
    if scheme == "DPC_exact":
        return rates.dpc_sum_rate_exact(cs, P).value
    if scheme == "DPC_uniform":
        return rates.dpc_sum_rate_uniform(cs, P)
    if scheme.startswith("ZF_"):
        return rates.zf_sum_rate(cs, P, scheme[3:])
    if scheme.startswith("BD_"):
        return rates.bd_sum_rate(cs, P, scheme[3:])
    if scheme == "WSR_exact":
        return rates.weighted_sum_rate_dpc_exact(cs, mu, P).value
    if scheme == "WSR_proportional":
        return rates.weighted_sum_rate_approx(cs, mu, P, "DPC", evaluate="exact")
    if scheme == "WSR_proportional_decoupled":
        return rates.weighted_sum_rate_approx(cs, mu, P, "DPC")
    if scheme == "WSR_zf_proportional":
        return rates.weighted_sum_rate_approx(cs, mu, P, "ZF")
    if scheme == "WSR_bd_proportional":
        return rates.weighted_sum_rate_approx(cs, mu, P, "BD")
    if scheme == "WSR_all_users":
        return rates.weighted_overloaded_heuristics(cs, mu, P, "all_users")
    if scheme == "WSR_top_M":
        return rates.weighted_overloaded_heuristics(cs, mu, P, "top_M")
    raise DomainError(f"unknown scheme {scheme!r}")  # pragma: no cover


def _curve_trial(spec: ExperimentSpec, active: tuple, i: int):
    cs = trial_channel(spec.dims, spec.profile, spec.seed, i)
    vals = np.full((len(spec.snr_grid_db), len(active)), np.nan)
    errs = {}
    for j, scheme in enumerate(active):
        for s, snr in enumerate(spec.snr_grid_db):
            try:
                vals[s, j] = _scheme_value(scheme, cs, db_to_linear(snr), spec.weights)
            except MimoBCError as exc:
                errs.setdefault(scheme, f"{type(exc).__name__}: {exc}")
                break
    return vals, errs


def _static_error(scheme: str, dims: SystemDims) -> Optional[str]:
    if scheme in _LINEAR and not dims.fully_loaded_or_under:
        return f"infeasible: {scheme} needs M >= K*N (M={dims.M}, K*N={dims.KN})"
    if scheme in ("WSR_all_users", "WSR_top_M") and dims.N != 1:
        return f"infeasible: {scheme} needs N = 1"
    return None


def run_rate_curve(spec: ExperimentSpec, workers: int = 1, keep_samples: bool = False) -> RateCurve:
    """Mean and standard error of each scheme's rate at each SNR.

    Every (SNR, scheme) cell sees the same channel realizations. Infeasible
    cells carry an error string instead of statistics.
    """
    static = {s: _static_error(s, spec.dims) for s in spec.schemes}
    active = tuple(s for s in spec.schemes if static[s] is None)
    per_trial = map_trials(partial(_curve_trial, spec, active), spec.trials, workers)
    samples = np.stack([v for v, _ in per_trial]) if active else None
    runtime_err: dict = {}
    for _, errs in per_trial:
        for k, v in errs.items():
            runtime_err.setdefault(k, v)
    curve = RateCurve(spec, samples=samples if keep_samples else None)
    for s, snr in enumerate(spec.snr_grid_db):
        for scheme in spec.schemes:
            if static[scheme] is not None:
                curve.cells.append(CurveCell(snr, scheme, None, static[scheme]))
            elif scheme in runtime_err:
                curve.cells.append(CurveCell(snr, scheme, None, runtime_err[scheme]))
            else:
                col = samples[:, s, active.index(scheme)]
                curve.cells.append(CurveCell(snr, scheme, SummaryStats.from_samples(col)))
    return curve


# --------------------------------------------------------------------------
# offsets
# --------------------------------------------------------------------------

def _pair_trial(dims, profile, P, pair, seed, i) -> float:
    cs = trial_channel(dims, profile, seed, i)
    a, b = pair.split("-")
    val = {"DPC": lambda: rates.dpc_sum_rate_uniform(cs, P),
           "ZF": lambda: rates.zf_sum_rate(cs, P, "uniform"),
           "BD": lambda: rates.bd_sum_rate(cs, P, "uniform")}
    return val[a]() - val[b]()


def run_offset_estimate(dims: SystemDims, profile: Optional[SnrProfile], P_db: float,
                        trials: int, seed: int, pair: str = "DPC-ZF",
                        workers: int = 1) -> OffsetReport:
    """Paired Monte Carlo estimate of a rate offset at finite SNR.

    Each trial contributes the difference of the two uniform-power rates on
    the same channel, which removes most of the channel-to-channel variance.
    """
    if pair not in PAIRS:
        raise DomainError(f"pair must be one of {PAIRS}, got {pair!r}")
    if not dims.fully_loaded_or_under:
        raise DomainError(f"offset estimates need M >= K*N (M={dims.M}, K*N={dims.KN})")
    if int(trials) < 1:
        raise DomainError("trials must be >= 1")
    P = db_to_linear(P_db)
    diffs = map_trials(partial(_pair_trial, dims, profile, P, pair, seed), int(trials), workers)
    st = SummaryStats.from_samples(diffs)
    return OffsetReport(st.mean, 3.0 * st.mean / dims.KN, "monte_carlo", dims,
                        st.stderr, None, float(dims.KN))


def _gap_trial(dims, profile, grid, schemes, seed, i):
    cs = trial_channel(dims, profile, seed, i)
    out = np.empty((len(grid), len(schemes)))
    for s, snr in enumerate(grid):
        P = db_to_linear(snr)
        for j, sc in enumerate(schemes):
            if sc == "DPC":
                out[s, j] = rates.dpc_sum_rate_exact(cs, P).value - rates.dpc_sum_rate_uniform(cs, P)
            elif sc == "ZF":
                out[s, j] = rates.zf_sum_rate(cs, P, "waterfill") - rates.zf_sum_rate(cs, P, "uniform")
            else:
                out[s, j] = rates.bd_sum_rate(cs, P, "waterfill") - rates.bd_sum_rate(cs, P, "uniform")
    return out


def run_power_convergence(dims: SystemDims, profile: Optional[SnrProfile], snr_grid_db,
                          trials: int, seed: int, schemes=("DPC", "ZF"),
                          workers: int = 1) -> list:
    """Mean gain of optimal over uniform power, per scheme and SNR.

    Returns rows ``(snr_db, scheme, SummaryStats)`` sorted by (snr, scheme).
    """
    grid = tuple(float(s) for s in snr_grid_db)
    schemes = tuple(schemes)
    bad = [s for s in schemes if s not in ("DPC", "ZF", "BD")]
    if bad:
        raise DomainError(f"unknown schemes {bad}")
    if not dims.fully_loaded_or_under and any(s != "DPC" for s in schemes):
        raise DomainError(f"ZF/BD need M >= K*N (M={dims.M}, K*N={dims.KN})")
    per = np.stack(map_trials(partial(_gap_trial, dims, profile, grid, schemes, seed),
                              int(trials), workers))
    rows = []
    for s, snr in enumerate(grid):
        for j, sc in sorted(enumerate(schemes), key=lambda t: t[1]):
            rows.append((snr, sc, SummaryStats.from_samples(per[:, s, j])))
    return rows
