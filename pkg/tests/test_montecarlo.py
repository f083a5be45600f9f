import math

import numpy as np
import pytest

from mimobc import offsets, rates
from mimobc.channel import SnrProfile, SystemDims
from mimobc.errors import DomainError
from mimobc.montecarlo import (ExperimentSpec, SummaryStats, map_trials, run_offset_estimate,
                               run_power_convergence, run_rate_curve, trial_channel)

D441 = SystemDims(4, 4, 1)
SPREAD_GAMMA = SnrProfile((0.1, 0.5, 1.0, 2.0))


def test_summary_stats():
    s = SummaryStats.from_samples([1.0, 2.0, 3.0, 4.0])
    assert s.mean == 2.5 and s.trials == 4
    assert abs(s.stderr - np.std([1, 2, 3, 4], ddof=1) / 2) < 1e-15
    assert SummaryStats.from_samples([5.0]).stderr == 0.0
    with pytest.raises(DomainError):
        SummaryStats.from_samples([])


@pytest.mark.parametrize("kw", [dict(trials=0), dict(snr_grid_db=()), dict(snr_grid_db=(10, 5)),
                                dict(schemes=("MMSE",)), dict(schemes=("WSR_exact",)),
                                dict(profile=SnrProfile((1.0, 1.0)))])
def test_spec_validation(kw):
    base = dict(dims=D441, snr_grid_db=(0, 10), trials=2)
    base.update(kw)
    with pytest.raises(DomainError):
        ExperimentSpec(**base)


def test_single_trial_is_transparent():
    spec = ExperimentSpec(SystemDims(4, 2, 2), (0, 20), trials=1, seed=99)
    curve = run_rate_curve(spec)
    cs = trial_channel(spec.dims, None, 99, 0)
    P = 100.0
    assert curve.get(20, "DPC_exact").stats.mean == rates.dpc_sum_rate_exact(cs, P).value
    assert curve.get(20, "DPC_uniform").stats.mean == rates.dpc_sum_rate_uniform(cs, P)
    assert curve.get(20, "ZF_waterfill").stats.mean == rates.zf_sum_rate(cs, P, "waterfill")
    assert curve.get(20, "BD_uniform").stats.mean == rates.bd_sum_rate(cs, P, "uniform")
    assert curve.get(0, "BD_waterfill").stats.mean == rates.bd_sum_rate(cs, 1.0, "waterfill")


def test_worker_count_does_not_change_results():
    spec = ExperimentSpec(SystemDims(3, 3, 1), (0, 10, 20), trials=24, seed=5)
    a = run_rate_curve(spec, workers=1).rows()
    b = run_rate_curve(spec, workers=3).rows()
    assert a == b
    e1 = run_offset_estimate(SystemDims(4, 2, 1), None, 30, 24, 8, workers=1)
    e2 = run_offset_estimate(SystemDims(4, 2, 1), None, 30, 24, 8, workers=2)
    assert (e1.beta, e1.stderr) == (e2.beta, e2.stderr)


def test_map_trials_order():
    assert map_trials(abs, 5) == [0, 1, 2, 3, 4]
    assert map_trials(math.sqrt, 9, workers=2) == [math.sqrt(i) for i in range(9)]


def test_rows_sorted_and_complete():
    spec = ExperimentSpec(D441, (0, 20), trials=2, schemes=("ZF_uniform", "DPC_uniform"))
    rows = run_rate_curve(spec).rows()
    assert [(r[0], r[1]) for r in rows] == [(0, "DPC_uniform"), (0, "ZF_uniform"),
                                           (20, "DPC_uniform"), (20, "ZF_uniform")]
    assert all(r[4] == 2 and r[5] == 0 for r in rows)


def test_stderr_scales_as_inverse_sqrt():
    dims = SystemDims(4, 2, 1)
    se1 = run_rate_curve(ExperimentSpec(dims, (10,), ("DPC_uniform",), 2000, 1)).get(10, "DPC_uniform").stats.stderr
    se2 = run_rate_curve(ExperimentSpec(dims, (10,), ("DPC_uniform",), 8000, 1)).get(10, "DPC_uniform").stats.stderr
    assert abs(se1 / se2 - 2.0) < 0.2 * 2.0


def test_infeasible_cells_are_marked():
    spec = ExperimentSpec(SystemDims(2, 3, 1), (0, 10), trials=3,
                          schemes=("DPC_exact", "ZF_uniform", "BD_waterfill"))
    curve = run_rate_curve(spec)
    assert curve.get(10, "DPC_exact").stats is not None
    for sch in ("ZF_uniform", "BD_waterfill"):
        cell = curve.get(10, sch)
        assert cell.stats is None and "M >= K*N" in cell.error
    assert any(math.isnan(r[2]) for r in curve.rows())


def test_weighted_curve():
    spec = ExperimentSpec(SystemDims(2, 3, 1), (10,), trials=5,
                          schemes=("WSR_exact", "WSR_all_users", "WSR_top_M", "WSR_zf_proportional"),
                          weights=(0.5, 0.3, 0.2))
    c = run_rate_curve(spec, keep_samples=True)
    ex = c.samples[:, 0, 0]
    assert np.all(c.samples[:, 0, 1] <= ex + 1e-9) and np.all(c.samples[:, 0, 2] <= ex + 1e-9)
    assert c.get(10, "WSR_zf_proportional").stats is None


@pytest.mark.slow
def test_zf_offset_at_30db():
    spec = ExperimentSpec(SystemDims(5, 5, 1), (30,), ("DPC_uniform", "ZF_uniform"), 2000, 3)
    c = run_rate_curve(spec, keep_samples=True)
    d = c.samples[:, 0, 0] - c.samples[:, 0, 1]
    se = d.std(ddof=1) / math.sqrt(d.size)
    assert abs(d.mean() - 9.26) < 3 * se


def test_paired_identity():
    spec = ExperimentSpec(SystemDims(4, 2, 1), (40,), ("DPC_uniform", "ZF_uniform"), 300, 21)
    c = run_rate_curve(spec)
    est = run_offset_estimate(SystemDims(4, 2, 1), None, 40, 300, 21)
    split = c.get(40, "DPC_uniform").stats.mean - c.get(40, "ZF_uniform").stats.mean
    assert abs(est.beta - split) < 1e-12
    assert est.source == "monte_carlo" and est.stderr > 0
    assert abs(est.delta - 3 * est.beta / 2) < 1e-15


def test_offset_estimate_dpc_zf():
    est = run_offset_estimate(SystemDims(4, 2, 1), None, 40, 2000, 22)
    assert abs(est.beta - offsets.beta_dpc_zf(4, 2).beta) < 3 * est.stderr


@pytest.mark.slow
def test_offset_estimate_bd_zf_and_power_independence():
    dims = SystemDims(12, 4, 3)
    e40 = run_offset_estimate(dims, None, 40, 2000, 23, "BD-ZF")
    assert abs(e40.beta - 14.4270) < max(3 * e40.stderr, 0.2)
    a = run_offset_estimate(SystemDims(4, 2, 1), None, 40, 2000, 24)
    b = run_offset_estimate(SystemDims(4, 2, 1), None, 60, 2000, 24)
    assert abs(a.beta - b.beta) < 2 * max(a.stderr, b.stderr)


def test_offset_estimate_errors():
    with pytest.raises(DomainError):
        run_offset_estimate(D441, None, 40, 10, 0, "DPC-MMSE")
    with pytest.raises(DomainError):
        run_offset_estimate(SystemDims(2, 3, 1), None, 40, 10, 0)
    with pytest.raises(DomainError):
        run_offset_estimate(D441, None, 40, 0, 0)


def test_power_convergence():
    rows = run_power_convergence(D441, SPREAD_GAMMA, (10, 20, 30, 40), 200, 25)
    gap = {(snr, sc): st.mean for snr, sc, st in rows}
    for sc in ("DPC", "ZF"):
        seq = [gap[(s, sc)] for s in (10, 20, 30, 40)]
        assert all(v >= -1e-9 for v in seq)
        assert all(b <= a + 1e-9 for a, b in zip(seq, seq[1:]))
        assert seq[-1] < seq[0]
    assert gap[(40, "ZF")] < 0.05


def test_symmetric_profile_converges_faster():
    asym = {sc: st for snr, sc, st in run_power_convergence(D441, SPREAD_GAMMA, (20,), 300, 26)}
    sym = {sc: st for snr, sc, st in run_power_convergence(D441, None, (20,), 300, 26)}
    for sc in ("DPC", "ZF"):
        a, s = asym[sc], sym[sc]
        assert s.mean < a.mean - 2 * math.hypot(a.stderr, s.stderr)


def test_power_convergence_errors():
    with pytest.raises(DomainError):
        run_power_convergence(D441, None, (10,), 2, 0, schemes=("MMSE",))
    with pytest.raises(DomainError):
        run_power_convergence(SystemDims(2, 3, 1), None, (10,), 2, 0, schemes=("ZF",))


@pytest.mark.parametrize("mkn,mu", [((4, 2, 1), (0.6, 0.4)), ((4, 3, 1), (0.5, 0.3, 0.2))])
def test_weighted_offset_monte_carlo(mkn, mu):
    """The weighted ZF loss closed form is matched by simulation at 40 dB."""
    spec = ExperimentSpec(SystemDims(*mkn), (40,), ("WSR_exact", "WSR_zf_proportional"), 2000, 31,
                          weights=mu)
    s = run_rate_curve(spec, keep_samples=True).samples[:, 0, :]
    d = s[:, 0] - s[:, 1]
    se = d.std(ddof=1) / math.sqrt(d.size)
    assert abs(d.mean() - offsets.weighted_beta_dpc_zf(mu, mkn[0], mkn[1]).beta) < 3 * se
