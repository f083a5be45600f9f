"""Slotted max-weight scheduling over the MIMO broadcast channel.

Each slot the transmitter weights users by their normalized queue lengths
and serves them at either the exact weighted-sum-rate optimum or the
proportional-power approximation (user k gets ``mu_k P``). Rates in bps/Hz
are read as bits per slot.

Random streams are keyed by slot: the channel of slot t comes from
``child_rng(seed, 0, t)`` and the arrivals from ``child_rng(seed, 1, t)``.
Two runs with the same seed therefore see identical channels and arrivals
whatever the policy, which makes policy comparisons paired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Optional, Sequence

import numpy as np

from . import rates
from .channel import ChannelSet, SystemDims, sample_channel
from .errors import DomainError
from .matkernel import child_rng
from .montecarlo import SummaryStats, db_to_linear, map_trials, trial_channel

__all__ = [
    "QueueState",
    "QueueSimConfig",
    "QueueSimResult",
    "schedule_slot",
    "run_queue_sim",
    "detect_drift",
    "ergodic_sum_capacity",
    "run_load_sweep",
]

ARRIVAL_LAWS = ("poisson", "deterministic")
CHANNEL_LAWS = ("iid_per_slot", "fixed")
QUEUE_POLICIES = ("exact", "proportional")


@dataclass
class QueueState:
    """Queue lengths (bits) at the start of slot `t`."""

    q: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).copy()
        if np.any(self.q < 0) or not np.all(np.isfinite(self.q)):
            raise DomainError("queue lengths must be finite and nonnegative")


@dataclass(frozen=True)
class QueueSimConfig:
    dims: SystemDims
    P_db: float
    arrival_rates: tuple
    arrival_law: str = "poisson"
    slots: int = 10000
    policy: str = "exact"
    seed: int = 0
    channel_law: str = "iid_per_slot"
    burn_in: float = 0.1
    slot_capacity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "arrival_rates", tuple(float(x) for x in self.arrival_rates))
        if len(self.arrival_rates) != self.dims.K:
            raise DomainError(f"need {self.dims.K} arrival rates")
        if any(x < 0 or not math.isfinite(x) for x in self.arrival_rates):
            raise DomainError("arrival rates must be finite and nonnegative")
        if self.arrival_law not in ARRIVAL_LAWS:
            raise DomainError(f"arrival_law must be one of {ARRIVAL_LAWS}")
        if self.channel_law not in CHANNEL_LAWS:
            raise DomainError(f"channel_law must be one of {CHANNEL_LAWS}")
        if self.policy not in QUEUE_POLICIES:
            raise DomainError(f"policy must be one of {QUEUE_POLICIES}")
        if int(self.slots) < 1:
            raise DomainError("slots must be >= 1")
        if not 0.0 <= self.burn_in < 1.0:
            raise DomainError("burn_in must lie in [0, 1)")
        if not self.slot_capacity > 0:
            raise DomainError("slot_capacity must be positive")

    @property
    def P(self) -> float:
        return db_to_linear(self.P_db)


@dataclass
class QueueSimResult:
    """Time averages after burn-in plus the full per-slot trace.

    ``queue_trace[t]`` is the state at the start of slot t (``slots + 1``
    rows); ``rate_trace[t]`` and ``served_trace[t]`` describe slot t.
    """

    config: QueueSimConfig
    avg_queue: np.ndarray
    avg_total: float
    queue_trace: np.ndarray
    rate_trace: np.ndarray
    served_trace: np.ndarray
    arrival_trace: np.ndarray
    drift: bool
    drift_slope: float
    extra: dict = field(default_factory=dict)


def slot_rates(q: np.ndarray, cs: ChannelSet, P: float, policy: str) -> np.ndarray:
    """Per-user rates chosen by the scheduler for queue vector `q`."""
    total = float(np.sum(q))
    if total <= 0.0:
        return np.zeros(cs.dims.K)
    mu = q / total
    if policy == "exact":
        return np.asarray(rates.weighted_sum_rate_dpc_exact(cs, mu, P).user_rates, dtype=float)
    return rates.proportional_user_rates(cs, mu, P)


def schedule_slot(state: QueueState, cs: ChannelSet, cfg: QueueSimConfig,
                  arrivals: Optional[Sequence[float]] = None):
    """Serve one slot and apply ``q <- max(q - R, 0) + arrivals``.

    Returns ``(rates, next_state)``. `arrivals` defaults to none.
    """
    K = cfg.dims.K
    a = np.zeros(K) if arrivals is None else np.asarray(arrivals, dtype=float)
    R = slot_rates(state.q, cs, cfg.P, cfg.policy)
    served = np.minimum(state.q, R * cfg.slot_capacity)
    nxt = QueueState(state.q - served + a, state.t + 1)
    return R, nxt


def _arrivals(cfg: QueueSimConfig, t: int) -> np.ndarray:
    lam = np.asarray(cfg.arrival_rates)
    if cfg.arrival_law == "deterministic":
        return lam.copy()
    return child_rng(cfg.seed, 1, t).poisson(lam).astype(float)


def detect_drift(total: np.ndarray, start: int) -> tuple[bool, float]:
    """Flag sustained growth of the total queue after slot `start`.

    Fits an OLS line to the post-burn-in trace. Growth is flagged when the
    fitted rise over the window exceeds half the window's mean level, i.e.
    the queue is dominated by a trend rather than by fluctuation around a
    stationary level.
    """
    y = np.asarray(total[start:], dtype=float)
    if y.size < 3:
        return False, 0.0
    t = np.arange(y.size, dtype=float)
    slope = float(np.polyfit(t, y, 1)[0])
    rise = slope * (y.size - 1)
    level = float(np.mean(y))
    return bool(slope > 0 and rise > 0.5 * max(level, 1e-12)), slope


def run_queue_sim(cfg: QueueSimConfig, q0: Optional[Sequence[float]] = None) -> QueueSimResult:
    """Simulate ``cfg.slots`` slots starting from `q0` (default empty)."""
    K = cfg.dims.K
    P = cfg.P
    slots = int(cfg.slots)
    state = QueueState(np.zeros(K) if q0 is None else q0)
    qtr = np.empty((slots + 1, K))
    rtr = np.empty((slots, K))
    str_ = np.empty((slots, K))
    atr = np.empty((slots, K))
    qtr[0] = state.q
    fixed = sample_channel(cfg.dims, None, child_rng(cfg.seed, 0, 0)) if cfg.channel_law == "fixed" else None
    for t in range(slots):
        cs = fixed if fixed is not None else sample_channel(cfg.dims, None, child_rng(cfg.seed, 0, t))
        a = _arrivals(cfg, t)
        R = slot_rates(state.q, cs, P, cfg.policy)
        served = np.minimum(state.q, R * cfg.slot_capacity)
        state = QueueState(state.q - served + a, t + 1)
        rtr[t], str_[t], atr[t], qtr[t + 1] = R, served, a, state.q
    start = int(math.floor(cfg.burn_in * slots))
    post = qtr[start + 1:]
    total = qtr.sum(axis=1)
    drift, slope = detect_drift(total, start + 1)
    return QueueSimResult(cfg, post.mean(axis=0), float(post.sum(axis=1).mean()),
                          qtr, rtr, str_, atr, drift, slope)


def _capacity_trial(dims, P, seed, i):
    return rates.dpc_sum_rate_exact(trial_channel(dims, None, seed, i), P).value


def ergodic_sum_capacity(dims: SystemDims, P_db: float, trials: int = 2000, seed: int = 0,
                         workers: int = 1) -> SummaryStats:
    """Ergodic DPC sum capacity, used to normalize arrival rates."""
    vals = map_trials(partial(_capacity_trial, dims, db_to_linear(P_db), seed), int(trials), workers)
    return SummaryStats.from_samples(vals)


def _sweep_point(base: QueueSimConfig, cap: float, load_policy):
    load, policy = load_policy
    K = base.dims.K
    cfg = replace(base, arrival_rates=tuple([load * cap / K] * K), policy=policy)
    res = run_queue_sim(cfg)
    return res.avg_total, res.drift, res.drift_slope


def run_load_sweep(dims: SystemDims, P_db: float, loads: Sequence[float], slots: int = 10000,
                   seed: int = 0, policies: Sequence[str] = QUEUE_POLICIES,
                   arrival_law: str = "poisson", capacity_trials: int = 2000,
                   workers: int = 1) -> dict:
    """Average total queue versus symmetric load.

    ``load`` is the sum arrival rate divided by the ergodic equal-weight sum
    capacity, so saturation sits near ``load = 1``. Every run in the sweep
    uses the same seed.

    Returns a dict with ``capacity`` (SummaryStats) and ``rows``, a list of
    ``(load, policy, avg_total, drift, slope)``.
    """
    cap = ergodic_sum_capacity(dims, P_db, capacity_trials, seed)
    base = QueueSimConfig(dims, P_db, tuple([0.0] * dims.K), arrival_law, slots, "exact", seed)
    jobs = [(float(l), p) for l in loads for p in policies]
    # one job per (load, policy); map_trials hands out indices into `jobs`
    out = map_trials(partial(_sweep_job, base, cap.mean, jobs), len(jobs), workers)
    rows = [(l, p, avg, drift, slope) for (l, p), (avg, drift, slope) in zip(jobs, out)]
    return {"capacity": cap, "rows": rows}


def _sweep_job(base, cap, jobs, i):
    return _sweep_point(base, cap, jobs[i])
