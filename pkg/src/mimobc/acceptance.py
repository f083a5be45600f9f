"""Acceptance suite: nine end-to-end checks of the library.

Each check returns a `CriterionResult`. ``quick=True`` shrinks trial counts
(tolerances stay the same) so ``mimobc verify --quick`` runs in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import offsets, rates
from .channel import SystemDims, channel_from_matrix
from .matkernel import child_rng
from .montecarlo import ExperimentSpec, SummaryStats, run_offset_estimate, run_rate_curve, trial_channel
from .precoding import bd_effective_channels, zf_effective_gains, zfdpc_successive_projection

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all"]

TOL_GOLDEN = 5e-4


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number}: {self.name} -- {self.detail}"


class _Checks:
    """Accumulates named boolean checks and the first few failures."""

    def __init__(self):
        self.n = 0
        self.failed = []

    def __call__(self, ok: bool, what: str):
        self.n += 1
        if not ok:
            self.failed.append(what)

    def result(self, number: int, name: str, extra: str = "") -> CriterionResult:
        ok = not self.failed
        if ok:
            detail = f"{self.n} checks passed" + (f"; {extra}" if extra else "")
        else:
            detail = f"{len(self.failed)}/{self.n} failed: " + "; ".join(self.failed[:5])
        return CriterionResult(number, name, ok, detail)


# --------------------------------------------------------------------------
# 1-2: closed forms
# --------------------------------------------------------------------------

def golden_numbers(quick: bool = False) -> CriterionResult:
    chk = _Checks()
    table = [
        ("beta DPC-ZF (5,5,1)", offsets.beta_dpc_zf(5, 5, 1).beta, 9.2573),
        ("delta DPC-ZF (5,5,1)", offsets.beta_dpc_zf(5, 5, 1).delta, 5.554),
        ("delta DPC-ZF (10,5,1)", offsets.beta_dpc_zf(10, 5, 1).delta, 1.2607),
        ("asymptotic delta alpha=2", offsets.delta_dpc_zf_asymptotic(2.0), 1.6719),
        ("delta BD-ZF M=KN, N=2", offsets.delta_bd_zf_square(2), 2.1640),
        ("beta BD-ZF (12,4,3)", offsets.beta_bd_zf(12, 4, 3).beta, 14.4270),
        ("delta BD-ZF (12,4,3)", offsets.beta_bd_zf(12, 4, 3).delta, 3.6067),
    ]
    worst = 0.0
    for name, got, want in table:
        err = abs(got - want)
        worst = max(worst, err)
        chk(err < TOL_GOLDEN, f"{name}: {got:.6f} vs {want}")
    return chk.result(1, "closed-form golden numbers", f"max abs err {worst:.2e}")


def identities(quick: bool = False) -> CriterionResult:
    chk = _Checks()
    for M in range(1, 25):
        for K in range(1, M + 1):
            chk(offsets.beta_dpc_bd(M, K, 1).exact == offsets.beta_dpc_zf(M, K, 1).exact,
                f"BD(N=1) != ZF at M={M},K={K}")
    for alpha in (1, 2, 3):
        for N in range(1, 25):
            for K in range(1, 24 // N + 1):
                M = alpha * K * N
                zf = offsets.beta_dpc_zf(M, K * N, 1)
                bd = offsets.beta_dpc_bd(M, K, N)
                bz = offsets.beta_bd_zf(M, K, N)
                chk(zf.exact - bd.exact - bz.exact == 0, f"BD-ZF identity at {(M, K, N)}")
                for rep in (zf, bd, bz):
                    chk(abs(rep.delta - 3.0 * rep.beta / (K * N)) <= 1e-12 * max(1.0, rep.delta),
                        f"delta linkage at {(M, K, N)}")
    for M in range(2, 13):
        for K in range(1, M + 1):
            w = offsets.weighted_beta_dpc_zf([Fraction(1, K)] * K, M, K)
            chk(K * w.exact == offsets.beta_dpc_zf(M, K, 1).exact, f"equal weights at M={M},K={K}")
    return chk.result(2, "closed-form identities (exact rational)")


# --------------------------------------------------------------------------
# 3-4: Monte Carlo against closed forms
# --------------------------------------------------------------------------

def monte_carlo_offsets(quick: bool = False) -> CriterionResult:
    chk = _Checks()
    trials = 400 if quick else 2000
    notes = []
    est = run_offset_estimate(SystemDims(5, 5, 1), None, 40.0, trials, 11, "DPC-ZF")
    want = offsets.beta_dpc_zf(5, 5, 1).beta
    chk(abs(est.beta - want) <= max(3 * est.stderr, 0.1), f"DPC-ZF (5,5,1) {est.beta:.4f}+-{est.stderr:.4f}")
    notes.append(f"DPC-ZF {est.beta:.3f}+-{est.stderr:.3f}")
    est = run_offset_estimate(SystemDims(12, 4, 3), None, 40.0, trials, 12, "BD-ZF")
    want = offsets.beta_bd_zf(12, 4, 3).beta
    chk(abs(est.beta - want) <= max(3 * est.stderr, 0.2), f"BD-ZF (12,4,3) {est.beta:.4f}+-{est.stderr:.4f}")
    notes.append(f"BD-ZF {est.beta:.3f}+-{est.stderr:.3f}")
    inv = offsets.offsets_unequal_snr_invariance(SystemDims(4, 4, 1), (0.1, 0.5, 1.0, 2.0),
                                                 2000 if quick else 10000, 1e4, 13)
    for pair, r in inv.items():
        chk(r["within_3se"], f"unequal-SNR {pair} z={r['z']:.2f}")
        notes.append(f"{pair}(gamma) z={r['z']:.2f}")
    return chk.result(3, "Monte Carlo offsets vs closed form", ", ".join(notes))


def _mean_check(chk, samples, want, what):
    st = SummaryStats.from_samples(samples)
    z = abs(st.mean - want) / st.stderr
    chk(z <= 3.0, f"{what}: {st.mean:.4f} vs {want:.4f} (z={z:.2f})")
    return z


def distributional_oracles(quick: bool = False) -> CriterionResult:
    chk = _Checks()
    trials = 2000 if quick else 10000
    zs = []
    for (M, K), seed in (((4, 2), 21), ((6, 3), 22)):
        dims = SystemDims(M, K, 1)
        x = [np.mean(np.log(zf_effective_gains(trial_channel(dims, None, seed, i)).zf_gains))
             for i in range(trials)]
        zs.append(_mean_check(chk, x, offsets.digamma_int(M - K + 1), f"ZF log-gain {(M, K)}"))
    for (M, K), seed in (((4, 2), 23), ((5, 3), 24)):
        dims = SystemDims(M, K, 1)
        norms = np.array([zfdpc_successive_projection(trial_channel(dims, None, seed, i)).zfdpc_norms
                          for i in range(trials)])
        for k in range(1, K + 1):
            zs.append(_mean_check(chk, np.log(norms[:, k - 1]), offsets.digamma_int(M - k + 1),
                                  f"ZF-DPC stage {k} {(M, K)}"))
    for (M, K, N), seed in (((4, 2, 2), 25), ((6, 2, 2), 26)):
        dims = SystemDims(M, K, N)
        want = offsets.wishart_logdet_mean(N, M - (K - 1) * N)
        x = []
        for i in range(trials):
            grams = bd_effective_channels(trial_channel(dims, None, seed, i)).bd_grams
            x.append(np.mean([np.linalg.slogdet(G)[1] for G in grams]))
        zs.append(_mean_check(chk, x, want, f"BD log-det {(M, K, N)}"))
    return chk.result(4, "distributional oracles", f"max |z| = {max(zs):.2f}")


# --------------------------------------------------------------------------
# 5: optimizers
# --------------------------------------------------------------------------

def optimizer_correctness(quick: bool = False) -> CriterionResult:
    chk = _Checks()
    seeds = 30 if quick else 100
    dims = SystemDims(4, 2, 2)
    for s in range(seeds):
        cs = trial_channel(dims, None, 31, s)
        for P in (1.0, 10.0, 100.0):
            ex = rates.dpc_sum_rate_exact(cs, P)
            zu, zw = rates.zf_sum_rate(cs, P, "uniform"), rates.zf_sum_rate(cs, P, "waterfill")
            bu, bw = rates.bd_sum_rate(cs, P, "uniform"), rates.bd_sum_rate(cs, P, "waterfill")
            du = rates.dpc_sum_rate_uniform(cs, P)
            chk(ex.converged, f"DPC solver converged seed {s}")
            chk(ex.value >= du - 1e-6, f"DPC exact >= uniform seed {s} P={P}")
            chk(zw >= zu - 1e-9 and bw >= bu - 1e-9, f"waterfill >= uniform seed {s}")
            chk(zw <= bw + 1e-9 and bw <= ex.value + 1e-9, f"nesting seed {s} P={P}")
    rng = child_rng(32)
    worst = 0.0
    for s in range(seeds):
        g = rng.exponential(size=6)
        P = float(rng.uniform(0.1, 20))
        alloc = rates.waterfill(g, P)
        p, lvl = alloc.per_stream, alloc.level
        act = p > 0
        res = max(abs(p.sum() - P),
                  float(np.max(np.abs(p[act] + 1.0 / g[act] - lvl))),
                  float(np.max(np.maximum(lvl - 1.0 / g[~act], 0.0), initial=0.0)))
        worst = max(worst, res)
    chk(worst < 1e-9, f"waterfill KKT residual {worst:.2e}")
    cs = channel_from_matrix(np.eye(2))
    r = rates.weighted_sum_rate_dpc_exact(cs, (0.6, 0.4), 10.0)
    want_p = rates.weighted_parallel_kkt([1.0, 1.0], [0.6, 0.4], 10.0).per_stream
    want_v = 0.6 * math.log2(7.2) + 0.4 * math.log2(4.8)
    chk(np.max(np.abs(np.asarray(r.allocation) - want_p)) < 1e-6, f"orthogonal powers {r.allocation}")
    chk(abs(r.value - want_v) < 1e-6, f"orthogonal value {r.value}")
    gworst = 0.0
    for s in range(10):
        cs = trial_channel(SystemDims(4, 3, 1), None, 33, s)
        mu = child_rng(34, s).dirichlet(np.ones(3))
        p = child_rng(35, s).uniform(0.5, 3.0, size=3)
        _, g = rates.dual_mac_objective(cs, mu, p)
        h = 1e-5
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd = (rates.dual_mac_objective(cs, mu, p + e)[0] - rates.dual_mac_objective(cs, mu, p - e)[0]) / (2 * h)
            gworst = max(gworst, abs(fd - g[k]) / max(abs(g[k]), 1e-12))
    chk(gworst < 1e-5, f"gradient rel err {gworst:.2e}")
    return chk.result(5, "optimizer correctness", f"KKT residual {worst:.1e}, grad rel err {gworst:.1e}")


# --------------------------------------------------------------------------
# 6-9: weighted problems, harmonic loss bound, queues
# --------------------------------------------------------------------------

def weighted_gap(quick: bool = False) -> CriterionResult:
    chk = _Checks()
    spec = ExperimentSpec(SystemDims(4, 2, 1), (0.0, 10.0, 20.0, 30.0),
                          ("WSR_exact", "WSR_proportional"), 100 if quick else 500, 41,
                          weights=(0.6, 0.4))
    curve = run_rate_curve(spec, keep_samples=True)
    gap = curve.samples[:, :, 0] - curve.samples[:, :, 1]
    chk(bool(np.all(gap >= -1e-9)), "exact below proportional on some seed")
    means = gap.mean(axis=0)
    chk(bool(np.all(np.diff(means) < 0)), f"gap not strictly decreasing {means}")
    chk(means[-1] < 0.05, f"gap at 30 dB {means[-1]:.4f}")
    return chk.result(6, "weighted gap vanishes with SNR",
                      "gaps " + ", ".join(f"{m:.2e}" for m in means))


def square_loss_bound(quick: bool = False) -> CriterionResult:
    chk = _Checks()
    for M in range(1, 1001):
        S = offsets.zf_loss_square_nats(M)
        chk(float(S) <= M * math.log(M) + 1e-12, f"S_M > M ln M at M={M}")
    ratios = [float(offsets.zf_loss_square_nats(M)) / (M * math.log(M)) for M in (2 ** j for j in range(1, 11))]
    chk(all(b > a for a, b in zip(ratios, ratios[1:])), f"ratio not increasing {ratios}")
    return chk.result(7, "S_M <= M ln M and ratio increasing", f"ratio(1024) = {ratios[-1]:.4f}")


def queue_stability(quick: bool = False) -> CriterionResult:
    from .queuesim import run_load_sweep

    chk = _Checks()
    loads = (0.3, 0.6, 0.75, 0.9) if quick else (0.2, 0.4, 0.6, 0.7, 0.8, 0.9)
    sweep = run_load_sweep(SystemDims(4, 2, 1), 10.0, loads, slots=3000 if quick else 10000,
                           seed=51, capacity_trials=500 if quick else 2000)
    by = {(l, p): (avg, drift) for l, p, avg, drift, _ in sweep["rows"]}
    notes = []
    for l in loads:
        if l >= 0.8:
            continue
        ex, pr = by[(l, "exact")], by[(l, "proportional")]
        rel = abs(pr[0] - ex[0]) / ex[0]
        notes.append(f"{l}:{rel:.3f}")
        chk(rel <= 0.10, f"load {l}: proportional {pr[0]:.3f} vs exact {ex[0]:.3f}")
        chk(not ex[1] and not pr[1], f"drift detected at load {l}")
    return chk.result(8, "queue policies agree below 0.8 load",
                      f"C={sweep['capacity'].mean:.3f}; rel diff " + " ".join(notes))


def overloaded_heuristics(quick: bool = False) -> CriterionResult:
    chk = _Checks()
    mu = (0.5, 0.3, 0.2)
    spec = ExperimentSpec(SystemDims(2, 3, 1), (10.0, 20.0, 30.0),
                          ("WSR_exact", "WSR_all_users", "WSR_top_M"), 100 if quick else 500, 61,
                          weights=mu)
    curve = run_rate_curve(spec, keep_samples=True)
    x = curve.samples
    gaps = x[:, :, :1] - x[:, :, 1:]
    chk(bool(np.all(gaps >= -1e-9)), "a heuristic exceeds the exact optimum")
    means = gaps.mean(axis=0)
    chk(bool(np.all(means < 0.3)), f"mean gaps {means.ravel()}")
    for P in (10.0, 100.0, 1000.0):
        p = rates.heuristic_powers(mu, P, 2, "top_M")
        chk(np.allclose(p, [0.625 * P, 0.375 * P, 0.0], rtol=1e-12, atol=0), f"top-M powers {p}")
    return chk.result(9, "overloaded heuristics near optimal", f"max mean gap {means.max():.4f}")


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: golden_numbers,
    2: identities,
    3: monte_carlo_offsets,
    4: distributional_oracles,
    5: optimizer_correctness,
    6: weighted_gap,
    7: square_loss_bound,
    8: queue_stability,
    9: overloaded_heuristics,
}


def run_criterion(number: int, quick: bool = False) -> CriterionResult:
    return CRITERIA[number](quick=quick)


def run_all(quick: bool = False, echo: Callable[[str], None] | None = None) -> list:
    out = []
    for n in sorted(CRITERIA):
        r = run_criterion(n, quick)
        if echo is not None:
            echo(r.line())
        out.append(r)
    return out
