import math

import numpy as np
import pytest

from ndcrack.channel import (
    LosSet, effective_downlink_actual, effective_uplink, los_set, sample_channels,
)
from ndcrack.closedform import (
    MOMENT_TERMS, ClosedFormNotApplicable, moment_oracle, asymptotic_large_m,
    asymptotic_large_p, closed_form_baseline, closed_form_rates, expectation_terms,
    interference_term, psi1_from_t1, signal_term, structural_terms,
)
from ndcrack.ndris import identity_ndris, make_ndris, random_ndris
from ndcrack.rate import monte_carlo_rates, trial_blocks
from ndcrack.scenario import build_scenario, reference_preset


def small(m=8, n=4, k=2, seed=1, **over):
    return reference_preset(m, n, seed=seed, num_users=k, **over)


def dense_terms(s, r):
    """Signal/interference moments from dense matrices and explicit loops."""
    los = los_set(s)
    M, N, K = s.M, s.N, s.K
    P, Pt = r.matrix(), r.matrix().conj()
    a = los.a_n
    J = r.permutation_matrix()
    f = np.array([los.los_user_ris[:, k] @ P @ a for k in range(K)])
    fs = np.array([a.conj() @ Pt @ los.los_user_ris[:, k].conj() for k in range(K)])
    t1 = P @ np.outer(a, a.conj()) @ Pt
    psi1 = 0.0
    for i in range(N):
        psi1 += 2 * abs(t1[i, i]) ** 2
        for j in range(N):
            if i != j:
                psi1 += abs(t1[i, j]) ** 2
            if i < j:
                psi1 += 2 * (t1[i, i] * np.conj(t1[j, j])).real
    psi2 = np.outer(a, a.conj()) @ J
    tr2 = np.trace(psi2 @ psi2.conj().T).real
    tau = np.trace(t1)
    kap, al, c = s.rician_user_ris, s.alpha_bs_user, los.c
    E = np.empty(K)
    I = np.zeros((K, K))
    for k in range(K):
        ck, kk, ak = c[k], kap[k], al[k]
        fk2, fsk2 = abs(f[k]) ** 2, abs(fs[k]) ** 2
        gq = (kk ** 2 * M ** 2 * fk2 * fsk2 + kk * M ** 2 * N * fk2 + kk * M ** 2 * N * fsk2
              + M ** 2 * psi1 + 2 * kk * M ** 2 * (np.conj(f[k] * fs[k]) * tau).real)
        E[k] = (ck ** 2 * gq + 2 * ck * ak * M ** 2 * (kk * (f[k] * fs[k]).real + tau.real)
                + ak ** 2 * (M ** 2 + M) + ck * ak * (kk * M * fk2 + M * N)
                + ck * ak * (kk * M * fsk2 + M * N))
        for i in range(K):
            if i == k:
                continue
            ci, ki, ai = c[i], kap[i], al[i]
            fi2 = abs(fs[i]) ** 2
            I[k, i] = (ck * ci * (kk * ki * M ** 2 * fk2 * fi2 + kk * M ** 2 * N * fk2
                                  + ki * M ** 2 * N * fi2 + M ** 2 * tr2)
                       + ck * ai * (kk * M * fk2 + M * N) + ci * ak * (ki * M * fi2 + M * N)
                       + ak * ai * M)
    return E, I


def test_structural_trivial_example():
    los = LosSet(np.ones(2, complex), np.ones(3, complex), np.ones((2, 1), complex),
                 np.ones(1))
    st = structural_terms(identity_ndris(2), los, 0, 0)
    assert st.f_k == pytest.approx(2.0)
    assert st.f_star_k == pytest.approx(2.0)


def test_psi1_identity_matrix():
    assert psi1_from_t1(np.eye(2)) == pytest.approx(6.0)


def test_structural_invariants_over_random_surfaces():
    s = reference_preset(16, 12, seed=4)
    los = los_set(s)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        st = structural_terms(random_ndris(12, rng), los, 0, 1)
        assert st.psi1 >= 0
        assert st.psi2_trace == pytest.approx(144.0, rel=1e-12)
        assert abs(st.f_k) <= 12 + 1e-9
        # fourth moment of a rank-one quadratic form in CN(0, I)
        assert st.psi1 == pytest.approx(abs(st.tr_t1) ** 2 + 144.0, rel=1e-10)


def test_psi2_trace_dense_oracle():
    rng = np.random.default_rng(1)
    s = reference_preset(8, 7, seed=1)
    los = los_set(s)
    r = random_ndris(7, rng)
    psi2 = np.outer(los.a_n, los.a_n.conj()) @ r.permutation_matrix()
    assert structural_terms(r, los, 0, 1).psi2_trace == pytest.approx(
        np.trace(psi2 @ psi2.conj().T).real)


def test_terms_match_dense_oracle():
    rng = np.random.default_rng(2)
    for seed in range(5):
        s = reference_preset(12, 6, seed=seed, rician_user_ris=[0.5, 1.0, 2.0, 4.0])
        r = random_ndris(6, rng)
        E, I = expectation_terms(s, r)
        E0, I0 = dense_terms(s, r)
        assert np.allclose(E, E0, rtol=1e-10)
        assert np.allclose(I, I0, rtol=1e-10)
        assert signal_term(s, r, None, 2) == pytest.approx(E0[2], rel=1e-10)
        assert interference_term(s, r, None, 0, 3) == pytest.approx(I0[0, 3], rel=1e-10)


def test_signal_without_cascade():
    s = small()
    E, I = expectation_terms(s, random_ndris(4, np.random.default_rng(3)), cascade=False)
    a = s.alpha_bs_user
    assert np.allclose(E, a ** 2 * (64 + 8))
    assert I[0, 1] == pytest.approx(a[0] * a[1] * 8)


def test_signal_quadratic_in_direct_gain():
    s = small()
    r = random_ndris(4, np.random.default_rng(3))
    E1 = expectation_terms(s, r, cascade=False)[0]
    doubled = s.with_updates(ref_path_loss_db=s.ref_path_loss_db + 10 * math.log10(2))
    E2 = expectation_terms(doubled, r, cascade=False)[0]
    assert np.allclose(E2, 4 * E1, rtol=1e-12)


def test_interference_rayleigh_form():
    s = small(rician_user_ris=0.0)
    r = random_ndris(4, np.random.default_rng(4))
    los = los_set(s)
    M, N = 8, 4
    c, a = los.c, s.alpha_bs_user
    expected = c[0] * c[1] * M ** 2 * N ** 2 + c[0] * a[1] * M * N + c[1] * a[0] * M * N \
        + a[0] * a[1] * M
    assert interference_term(s, r, los, 0, 1) == pytest.approx(expected, rel=1e-12)


def test_interference_same_user_rejected():
    s = small()
    with pytest.raises(ValueError):
        interference_term(s, identity_ndris(4), None, 1, 1)


def test_single_user_rate():
    s = small(k=1)
    r = random_ndris(4, np.random.default_rng(5))
    E = signal_term(s, r, None, 0)
    rep = closed_form_rates(s, r)
    assert rep.sum_rate == pytest.approx(math.log2(1 + s.tx_power_w[0] * E / s.noise_power_w))


def test_baseline_is_cascade_free_limit():
    s = small(k=2)
    base = closed_form_baseline(s)
    a, P, s2 = s.alpha_bs_user, s.tx_power_w, s.noise_power_w
    E = a ** 2 * 72
    I = a[::-1] * a * 8
    expected = np.log2(1 + P * E / (P[::-1] * I + s2))
    assert np.allclose(base.per_user_rate, expected)
    far = s.with_updates(exponent_bs_ris=60.0)
    assert closed_form_rates(far, random_ndris(4, np.random.default_rng(0))).sum_rate == \
        pytest.approx(base.sum_rate, rel=1e-9)


def test_rician_bs_ris_refused():
    s = small(rician_bs_ris=4.0)
    with pytest.raises(ClosedFormNotApplicable):
        closed_form_rates(s, identity_ndris(4))
    with pytest.raises(ValueError):
        asymptotic_large_m(s, identity_ndris(4))


def test_user_relabelling():
    s = reference_preset(32, 8, seed=6)
    r = random_ndris(8, np.random.default_rng(6))
    order = np.array([2, 0, 3, 1])
    t = s.with_updates(user_positions=s.user_positions[order])
    assert np.allclose(closed_form_rates(t, r).per_user_rate,
                       closed_form_rates(s, r).per_user_rate[order])


def test_large_m_limit_independent_of_m():
    r = random_ndris(16, np.random.default_rng(7))
    a = asymptotic_large_m(reference_preset(64, 16, seed=2), r)
    b = asymptotic_large_m(reference_preset(4096, 16, seed=2), r)
    assert np.allclose(a, b, rtol=1e-12)


def test_large_m_approached():
    r = random_ndris(16, np.random.default_rng(7))
    s = reference_preset(4096, 16, seed=2)
    lim = asymptotic_large_m(s, r).sum()
    assert closed_form_rates(s, r).sum_rate == pytest.approx(lim, rel=0.01)


def test_large_m_gap_shrinks():
    r = random_ndris(16, np.random.default_rng(8))
    lim = asymptotic_large_m(reference_preset(32, 16, seed=3), r).sum()
    gaps = [abs(closed_form_rates(reference_preset(m, 16, seed=3), r).sum_rate - lim) / lim
            for m in (32, 128, 512, 2048)]
    assert np.all(np.diff(gaps) < 0)


def test_large_m_limit_grows_as_cascade_weakens():
    s = small()
    r = random_ndris(4, np.random.default_rng(3))
    far = s.with_updates(exponent_bs_ris=8.0)
    assert np.all(asymptotic_large_m(far, r) > asymptotic_large_m(s, r))


def test_large_p_limit():
    r = random_ndris(32, np.random.default_rng(9))
    s = reference_preset(128, 32, seed=4, tx_power_per_user_dbm=80.0)
    lim = asymptotic_large_p(s, r).sum()
    assert closed_form_rates(s, r).sum_rate == pytest.approx(lim, rel=0.005)
    other = s.with_updates(tx_power_per_user_dbm=10.0, noise_power_dbm=-60.0)
    assert np.allclose(asymptotic_large_p(other, r), asymptotic_large_p(s, r), rtol=1e-12)


def test_large_p_rejections():
    with pytest.raises(ValueError):
        asymptotic_large_p(small(k=1), identity_ndris(4))
    with pytest.raises(ValueError):
        asymptotic_large_p(small(tx_power_per_user_dbm=[10.0, 20.0]), identity_ndris(4))


@pytest.mark.parametrize("term", ["pair_hh", "self_hh", "self_gh_qh"])
def test_oracle_examples(term):
    s = small()
    r = random_ndris(4, np.random.default_rng(10))
    closed, sampled, se = moment_oracle(term, s, r, trials=200_000, seed=11)
    if term == "pair_hh":
        assert closed == pytest.approx(s.alpha_bs_user[0] * s.alpha_bs_user[1] * 8)
    if term == "self_hh":
        assert closed == pytest.approx(s.alpha_bs_user[0] ** 2 * 72)
    if term == "self_gh_qh":
        assert closed == 0.0
    assert abs(sampled - closed) <= 3 * se


def test_oracle_validation():
    s = small()
    with pytest.raises(ValueError):
        moment_oracle("no_such_term", s, identity_ndris(4), trials=10)
    with pytest.raises(ValueError):
        moment_oracle("pair_gq", s, identity_ndris(4), trials=10, k=1, i=1)
    assert len(MOMENT_TERMS) == 19


def test_uncorrected_signal_moment_is_biased():
    """Dropping the LoS x NLoS cross term in E|g_k q_k|^2 is detectably wrong."""
    s = small()
    r = random_ndris(4, np.random.default_rng(12))
    fixed = moment_oracle("self_gq", s, r, trials=100_000, seed=13)
    literal = moment_oracle("self_gq", s, r, trials=100_000, seed=13, drop_cross_term=True)
    assert abs(fixed.sampled_value - fixed.closed_value) <= 3 * fixed.standard_error
    assert abs(literal.sampled_value - literal.closed_value) > 10 * literal.standard_error


def _sampled_moments(s, r, trials, seed):
    """Per-trial |h_k w_i|^2 for MRT built from the uplink, actual downlink rows."""
    vals = []
    for _, n, rng in trial_blocks(seed, trials, 8192):
        ch = sample_channels(s, rng, n)
        G = np.abs(effective_downlink_actual(ch, r) @ effective_uplink(ch, r).conj()) ** 2
        vals.append(G)
    return np.concatenate(vals)


def test_end_to_end_moments_small_instance():
    s = small(m=8, n=4, k=2, seed=3)
    r = random_ndris(4, np.random.default_rng(14))
    G = _sampled_moments(s, r, 200_000, seed=15)
    E, I = expectation_terms(s, r)
    mean, se = G.mean(axis=0), G.std(axis=0, ddof=1) / np.sqrt(G.shape[0])
    for k in range(2):
        assert abs(mean[k, k] - E[k]) <= 3 * se[k, k]
        assert abs(mean[k, 1 - k] - I[k, 1 - k]) <= 3 * se[k, 1 - k]


def test_closed_form_tracks_monte_carlo():
    s = reference_preset(128, 32, seed=0)
    r = random_ndris(32, np.random.default_rng(16))
    cf = closed_form_rates(s, r).sum_rate
    mc = monte_carlo_rates(s, r, "mrt", 2000, seed=17).sum_rate
    assert abs(mc - cf) / mc <= 0.07
