import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import digamma

from mimobc import offsets
from mimobc.channel import SystemDims
from mimobc.errors import DomainError
from mimobc.matkernel import LOG2E, child_rng, sample_complex_gaussian


# --------------------------------------------------------------------------
# digamma and Wishart log-determinants
# --------------------------------------------------------------------------

def test_digamma_values():
    assert abs(offsets.digamma_int(1) + 0.5772156649) < 1e-10
    assert abs(offsets.digamma_int(2) - 0.422785) < 1e-6
    assert abs(offsets.digamma_int(4) - 1.256118) < 1e-6


@given(st.integers(1, 20000))
def test_digamma_matches_scipy(m):
    assert abs(offsets.digamma_int(m) - digamma(m)) < 1e-12 * max(1, abs(digamma(m)))


@pytest.mark.parametrize("m", [0, -1, 1.5])
def test_digamma_domain(m):
    with pytest.raises(DomainError):
        offsets.digamma_int(m)


def test_harmonic_exact():
    assert offsets.harmonic(0) == 0
    assert offsets.harmonic(3) == Fraction(11, 6)


def test_wishart_examples():
    assert abs(offsets.wishart_logdet_mean(1, 1) + 0.5772) < 1e-4
    assert abs(offsets.wishart_logdet_mean(2, 3) - 1.34557) < 1e-5
    with pytest.raises(DomainError):
        offsets.wishart_logdet_mean(3, 2)


def test_wishart_monte_carlo():
    rng = child_rng(2024)
    n = 100_000
    X = (rng.standard_normal((n, 2, 2)) + 1j * rng.standard_normal((n, 2, 2))) / math.sqrt(2)
    W = X @ np.conj(np.swapaxes(X, 1, 2))
    ld = np.linalg.slogdet(W)[1]
    se = ld.std(ddof=1) / math.sqrt(n)
    want = offsets.wishart_logdet_mean(2, 2)
    assert abs(want + 0.15443) < 1e-5
    assert abs(ld.mean() - want) < 3 * se


@pytest.mark.parametrize("M,KN", [(2, 2), (4, 2), (4, 4)])
def test_wishart_matches_gram_logdet(M, KN):
    rng = child_rng(7, M, KN)
    vals = []
    for _ in range(10_000):
        H = sample_complex_gaussian(rng, KN, M)
        vals.append(np.linalg.slogdet(H @ H.conj().T)[1])
    vals = np.array(vals)
    assert abs(vals.mean() - offsets.wishart_logdet_mean(KN, M)) < 3 * vals.std(ddof=1) / 100


# --------------------------------------------------------------------------
# DPC vs ZF
# --------------------------------------------------------------------------

def test_dpc_zf_golden():
    r = offsets.beta_dpc_zf(5, 5, 1)
    assert abs(r.beta - 9.2573) < 5e-4 and abs(r.delta - 5.554) < 5e-4
    assert abs(r.beta - 9.26) < 0.005 and abs(r.delta - 5.55) < 0.005
    assert r.source == "closed_form" and r.stderr is None and r.slope == 5
    assert abs(offsets.beta_dpc_zf(10, 5, 1).delta - 1.2607) < 5e-4
    assert offsets.beta_dpc_zf(3, 1, 1).beta == 0.0


def test_dpc_zf_depends_on_kn_only():
    for M in range(4, 13):
        assert offsets.beta_dpc_zf(M, 2, 2).exact == offsets.beta_dpc_zf(M, 4, 1).exact
        assert offsets.beta_dpc_zf(M, 1, 4).exact == offsets.beta_dpc_zf(M, 4, 1).exact


def test_dpc_zf_matches_digamma_form():
    # sum of log-Gram mean minus sum of per-stream chi-square means
    for M, KN in [(4, 4), (6, 3), (8, 5)]:
        nats = offsets.wishart_logdet_mean(KN, M) - KN * offsets.digamma_int(M - KN + 1)
        assert abs(offsets.beta_dpc_zf(M, KN).beta - LOG2E * nats) < 1e-12


def test_dpc_zf_domain():
    with pytest.raises(DomainError):
        offsets.beta_dpc_zf(3, 2, 2)


@given(st.integers(1, 30), st.integers(0, 30))
def test_power_offset_invariant(KN, extra):
    r = offsets.beta_dpc_zf(KN + extra, KN)
    assert r.delta == pytest.approx(3 * r.beta / KN, rel=1e-15, abs=1e-15)


@given(st.integers(2, 30))
def test_dpc_zf_decreases_in_m(KN):
    b = [offsets.beta_dpc_zf(M, KN).beta for M in range(KN, KN + 20)]
    assert all(y < x for x, y in zip(b, b[1:]))


def test_big_m_approximation():
    assert abs(offsets.beta_dpc_zf_bigM(5) - 11.6096) < 1e-4
    assert offsets.beta_dpc_zf_bigM(5) > offsets.beta_dpc_zf(5, 5).beta
    r2 = offsets.beta_dpc_zf(2, 2).beta / offsets.beta_dpc_zf_bigM(2)
    r64 = offsets.beta_dpc_zf(64, 64).beta / offsets.beta_dpc_zf_bigM(64)
    assert r2 < r64 < 1
    with pytest.raises(DomainError):
        offsets.beta_dpc_zf_bigM(1)


def test_big_m_bound_exact():
    for M in (1, 2, 10, 100, 250, 1000):
        assert float(offsets.zf_loss_square_nats(M)) <= M * math.log(M)


def test_big_m_bound_fast_path():
    # S_M = M * H_{M-1} - (M - 1), so the bound can be checked for every M
    H = 0.0
    for M in range(1, 1001):
        s = M * H - (M - 1)
        assert s <= M * math.log(M) + 1e-9
        H += 1.0 / M
    for M in (7, 31):
        assert offsets.zf_loss_square_nats(M) == M * offsets.harmonic(M - 1) - (M - 1)


def test_asymptotic_penalty():
    assert abs(offsets.delta_dpc_zf_asymptotic(2) - 1.6719) < 5e-4
    assert offsets.delta_dpc_zf_asymptotic(1e6) < 1e-5
    finite = offsets.beta_dpc_zf(128, 64).delta
    asym = offsets.delta_dpc_zf_asymptotic(2)
    assert finite < asym and asym - finite < 0.12
    for a in (1, 0.5):
        with pytest.raises(DomainError):
            offsets.delta_dpc_zf_asymptotic(a)


def test_asymptotic_limit_from_finite():
    # finite-KN penalties approach the asymptote from below as KN grows
    prev = 0.0
    for KN in (4, 16, 64, 256):
        d = offsets.beta_dpc_zf(3 * KN, KN).delta
        assert prev < d < offsets.delta_dpc_zf_asymptotic(3)
        prev = d


# --------------------------------------------------------------------------
# BD
# --------------------------------------------------------------------------

def test_bd_reduces_to_zf_for_single_antennas():
    for M in range(1, 10):
        for K in range(1, M + 1):
            assert offsets.beta_dpc_bd(M, K, 1).exact == offsets.beta_dpc_zf(M, K, 1).exact


def test_bd_single_user_is_zero():
    assert offsets.beta_dpc_bd(6, 1, 4).beta == 0


def test_bd_golden():
    r = offsets.beta_bd_zf(12, 4, 3)
    assert abs(r.beta - 14.4270) < 5e-4 and abs(r.delta - 3.6067) < 5e-4
    want = offsets.beta_dpc_zf(12, 12).beta - 14.4270
    assert abs(offsets.beta_dpc_bd(12, 4, 3).beta - want) < 5e-4
    assert abs(want - 21.984) < 1e-3
    assert offsets.beta_bd_zf(8, 4, 1).beta == 0


def test_offset_consistency_exact():
    for KN in range(1, 25):
        for N in range(1, KN + 1):
            if KN % N:
                continue
            K = KN // N
            for alpha in (1, 2, 3):
                M = alpha * KN
                lhs = offsets.beta_dpc_zf(M, KN).exact
                rhs = offsets.beta_dpc_bd(M, K, N).exact + offsets.beta_bd_zf(M, K, N).exact
                assert lhs == rhs
                f = (offsets.beta_dpc_zf(M, KN).beta - offsets.beta_dpc_bd(M, K, N).beta
                     - offsets.beta_bd_zf(M, K, N).beta)
                assert abs(f) < 1e-12


@pytest.mark.parametrize("N", [2, 3, 4])
def test_square_bd_gain_independent_of_k(N):
    ds = {offsets.beta_bd_zf(K * N, K, N).delta for K in (1, 2, 3, 6)}
    assert max(ds) - min(ds) < 1e-12
    assert abs(offsets.delta_bd_zf_square(N) - ds.pop()) < 1e-12


def test_square_bd_gain_n2():
    assert abs(offsets.delta_bd_zf_square(2) - 2.1640) < 5e-4
    for K in (2, 3, 6):
        assert abs(offsets.beta_bd_zf(2 * K, K, 2).delta - 2.1640) < 5e-4


def test_bd_offset_decreases_with_n():
    # fixed KN and M: more antennas per user means fewer nulls to steer
    for M, KN in [(12, 12), (24, 12), (16, 8)]:
        vals = [offsets.beta_dpc_bd(M, KN // N, N).beta for N in (1, 2, 3, 4, 6) if KN % N == 0]
        assert all(b < a for a, b in zip(vals, vals[1:]))


def test_bd_domain():
    with pytest.raises(DomainError):
        offsets.beta_dpc_bd(5, 3, 2)
    with pytest.raises(DomainError):
        offsets.beta_bd_zf(5, 3, 2)


# --------------------------------------------------------------------------
# weighted
# --------------------------------------------------------------------------

def test_weighted_examples():
    r = offsets.weighted_beta_dpc_zf([0.6, 0.4], 4, 2)
    assert abs(r.beta - 0.6 / 3 * LOG2E) < 1e-12
    assert abs(r.beta - 0.2885) < 1e-4
    assert r.slope == 1 and abs(r.delta - 3 * r.beta) < 1e-15
    ex = offsets.weighted_beta_dpc_zf([Fraction(3, 5), Fraction(2, 5)], 4, 2).exact
    assert ex == Fraction(1, 5)


@pytest.mark.parametrize("M,K", [(2, 2), (4, 3), (5, 5), (8, 3)])
def test_weighted_equal_weights(M, K):
    w = [Fraction(1, K)] * K
    r = offsets.weighted_beta_dpc_zf(w, M, K)
    assert r.exact == offsets.beta_dpc_zf(M, K).exact / K


def test_equal_weights_minimize():
    K, M = 3, 4
    eq = offsets.weighted_beta_dpc_zf([1 / 3] * 3, M, K).beta
    count = 0
    n = 13
    for a in range(n + 1):
        for b in range(n + 1 - a):
            c = n - a - b
            w = sorted([Fraction(a, n), Fraction(b, n), Fraction(c, n)], reverse=True)
            assert offsets.weighted_beta_dpc_zf(w, M, K).beta > eq
            count += 1
    assert count >= 100


def test_weighted_domain():
    with pytest.raises(DomainError):
        offsets.weighted_beta_dpc_zf([0.4, 0.6], 4, 2)
    with pytest.raises(DomainError):
        offsets.weighted_beta_dpc_zf([0.6, 0.6], 4, 2)
    with pytest.raises(DomainError):
        offsets.weighted_beta_dpc_zf([1.0], 4, 2)
    with pytest.raises(DomainError):
        offsets.weighted_beta_dpc_zf([0.5, 0.3, 0.2], 2, 3)


# --------------------------------------------------------------------------
# unequal SNR
# --------------------------------------------------------------------------

@pytest.mark.slow
def test_unequal_snr_invariance():
    dims = SystemDims(4, 4, 1)
    rep = offsets.offsets_unequal_snr_invariance(dims, (0.1, 0.5, 1, 2), 10_000, 1e4, seed=11)
    assert rep["DPC-ZF"]["within_3se"], rep["DPC-ZF"]
    assert rep["DPC-BD"]["within_3se"]


def test_unequal_snr_symmetric_and_doubled():
    dims = SystemDims(4, 2, 1)
    sym = offsets.offsets_unequal_snr_invariance(dims, (1, 1), 2000, 1e4, seed=12)
    g = offsets.offsets_unequal_snr_invariance(dims, (0.3, 1.5), 2000, 1e4, seed=12)
    g2 = offsets.offsets_unequal_snr_invariance(dims, (0.6, 3.0), 2000, 1e4, seed=12)
    for rep in (sym, g, g2):
        assert rep["DPC-ZF"]["target"] == offsets.beta_dpc_zf(4, 2).beta
        assert rep["DPC-ZF"]["within_3se"]
    a, b = g["DPC-ZF"]["estimate"], g2["DPC-ZF"]["estimate"]
    assert abs(a.beta - b.beta) < 3 * math.hypot(a.stderr, b.stderr)
