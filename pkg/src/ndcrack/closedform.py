"""Closed-form ergodic-rate approximation under MRT with a LoS BS-RIS link.

The rate of user k is approximated by ``log2(1 + P_k E_k / (sum_i P_i I_ki + s2))``
where ``E_k`` and ``I_ki`` are exact second moments of the signal and
interference amplitudes over the Rayleigh/Rician fading. Every moment is
built from a handful of structural quantities of the surface (see
:class:`StructuralTerms`).

The signal moment ``E|g_k q_k|^2`` keeps the LoS x NLoS cross term
``2 kappa Re{conj(f_k f*_k) Tr(t1)}``. It does not vanish because the uplink
and downlink NLoS projections are correlated through ``Tr(t1)``.
``drop_cross_term=True`` omits it, for comparison with derivations that
neglect it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .channel import LosSet, los_set, sample_channels
from .ndris import NdRis
from .rate import RateReport, trial_blocks
from .scenario import Scenario

ORACLE_BLOCK = 8192


class ClosedFormNotApplicable(ValueError):
    """The closed form only covers a line-of-sight BS-RIS channel."""


@dataclass(frozen=True)
class StructuralTerms:
    """Surface-dependent constants of the rate expressions for users ``k`` and ``i``.

    ``f_k = hbar_k Phi* a_N``, ``f_star_k = a_N^H Phi~ hbar_k^H`` and
    ``f_i = a_N^H Phi~ hbar_i^H``; ``t1 = Phi* a_N a_N^H Phi~``.
    """

    f_k: complex
    f_star_k: complex
    f_i: complex
    t1: np.ndarray
    psi1: float
    psi2_trace: float
    tr_t1: complex


def psi1_from_t1(t1: np.ndarray) -> float:
    """``E|h t1 h^H|^2`` for ``h ~ CN(0, I)``, as the explicit three-sum formula."""
    d = np.diagonal(t1)
    off = np.abs(t1) ** 2
    np.fill_diagonal(off, 0.0)
    iu, ju = np.triu_indices(d.size, k=1)
    return float(2.0 * np.sum(np.abs(d) ** 2)
                 + np.sum(off)
                 + 2.0 * np.sum(np.real(d[iu] * np.conj(d[ju]))))


def _row_times_conj(x: np.ndarray, ris: NdRis) -> np.ndarray:
    """Row vector(s) ``x @ (J Phi^H)``."""
    return x[..., ris.perm] * np.conj(ris.theta)


def _surface_terms(ris: NdRis, los: LosSet):
    """Vectorised ``f``, ``f*`` (length K), ``t1``, ``Psi1``, ``Tr(Psi2 Psi2^H)``."""
    if ris.n != los.a_n.size:
        raise ValueError(f"surface has {ris.n} elements, scenario expects {los.a_n.size}")
    a_n = los.a_n
    hbar_rows = los.los_user_ris.T
    col = ris.apply(a_n)                              # Phi* a_N
    row = _row_times_conj(a_n.conj(), ris)            # a_N^H Phi~
    f = hbar_rows @ col
    f_star = hbar_rows.conj() @ row
    t1 = np.outer(col, row)
    psi2 = np.outer(a_n, a_n.conj()[ris.perm])        # a_N a_N^H J
    return f, f_star, t1, psi1_from_t1(t1), float(np.sum(np.abs(psi2) ** 2))


def structural_terms(ris: NdRis, los: LosSet, user_k: int, user_i: int) -> StructuralTerms:
    f, fs, t1, psi1, psi2 = _surface_terms(ris, los)
    return StructuralTerms(complex(f[user_k]), complex(fs[user_k]), complex(fs[user_i]),
                           t1, psi1, psi2, complex(np.trace(t1)))


def _require_los(scenario: Scenario) -> None:
    if not scenario.los_bs_ris:
        raise ClosedFormNotApplicable(
            "closed form assumes a line-of-sight BS-RIS channel "
            f"(got Rician factor {scenario.rician_bs_ris}); use Monte Carlo instead")


def expectation_terms(scenario: Scenario, ris: NdRis, los: Optional[LosSet] = None,
                      drop_cross_term: bool = False, cascade: bool = True):
    """Signal moments ``E`` (K,) and interference moments ``I`` (K, K), zero diagonal.

    ``cascade=False`` evaluates the system with no surface present.
    """
    _require_los(scenario)
    s = scenario
    los = los if los is not None else los_set(s)
    M, N = float(s.M), float(s.N)
    kap = s.rician_user_ris
    a = s.alpha_bs_user
    c = los.c if cascade else np.zeros(s.K)
    f, fs, t1, psi1, psi2 = _surface_terms(ris, los)
    tau = np.trace(t1)
    f2, fs2 = np.abs(f) ** 2, np.abs(fs) ** 2

    gq = (kap ** 2 * M ** 2 * f2 * fs2 + kap * M ** 2 * N * (f2 + fs2) + M ** 2 * psi1)
    if not drop_cross_term:
        gq = gq + 2.0 * kap * M ** 2 * np.real(np.conj(f * fs) * tau)
    signal = (c ** 2 * gq
              + 2.0 * c * a * M ** 2 * (kap * np.real(f * fs) + np.real(tau))
              + a ** 2 * (M ** 2 + M)
              + c * a * (kap * M * f2 + M * N)
              + c * a * (kap * M * fs2 + M * N))

    ck, ci = c[:, None], c[None, :]
    kk, ki = kap[:, None], kap[None, :]
    ak, ai = a[:, None], a[None, :]
    fk2, fi2 = f2[:, None], fs2[None, :]
    interference = (ck * ci * (kk * ki * M ** 2 * fk2 * fi2 + kk * M ** 2 * N * fk2
                               + ki * M ** 2 * N * fi2 + M ** 2 * psi2)
                    + ck * ai * (kk * M * fk2 + M * N)
                    + ci * ak * (ki * M * fi2 + M * N)
                    + ak * ai * M)
    np.fill_diagonal(interference, 0.0)
    return signal, interference


def signal_term(scenario: Scenario, ris: NdRis, los: Optional[LosSet], k: int,
                drop_cross_term: bool = False) -> float:
    """``E|h_k w_k|^2`` under MRT, in closed form."""
    return float(expectation_terms(scenario, ris, los, drop_cross_term)[0][k])


def interference_term(scenario: Scenario, ris: NdRis, los: Optional[LosSet], k: int,
                      i: int) -> float:
    """``E|h_k w_i|^2`` under MRT for ``i != k``, in closed form."""
    if k == i:
        raise ValueError("interference term needs two distinct users")
    return float(expectation_terms(scenario, ris, los)[1][k, i])


def _report(rates: np.ndarray, sinrs: np.ndarray) -> RateReport:
    K = rates.size
    return RateReport(rates, float(rates.sum()), sinrs, 0, np.zeros(K), 0.0)


def closed_form_rates(scenario: Scenario, ris: NdRis, los: Optional[LosSet] = None,
                      drop_cross_term: bool = False, cascade: bool = True) -> RateReport:
    """Closed-form MRT rates (bit/s/Hz) for a fixed surface."""
    E, I = expectation_terms(scenario, ris, los, drop_cross_term, cascade)
    P = scenario.tx_power_w
    eta = P * E / (I @ P + scenario.noise_power_w)
    return _report(np.log2(1.0 + eta), eta)


def closed_form_baseline(scenario: Scenario) -> RateReport:
    """Closed-form MRT rates with no surface present."""
    from .ndris import identity_ndris
    return closed_form_rates(scenario, identity_ndris(scenario.N), cascade=False)


def asymptotic_terms(scenario: Scenario, ris: NdRis, los: Optional[LosSet] = None,
                     drop_cross_term: bool = False):
    """The ``M^2`` parts of the signal and interference moments, divided by ``M^2``."""
    _require_los(scenario)
    s = scenario
    los = los if los is not None else los_set(s)
    N = float(s.N)
    kap, a, c = s.rician_user_ris, s.alpha_bs_user, los.c
    f, fs, t1, psi1, psi2 = _surface_terms(ris, los)
    tau = np.trace(t1)
    f2, fs2 = np.abs(f) ** 2, np.abs(fs) ** 2
    gq = kap ** 2 * f2 * fs2 + kap * N * (f2 + fs2) + psi1
    if not drop_cross_term:
        gq = gq + 2.0 * kap * np.real(np.conj(f * fs) * tau)
    signal = c ** 2 * gq + 2.0 * c * a * (kap * np.real(f * fs) + np.real(tau)) + a ** 2
    interference = (c[:, None] * c[None, :]
                    * (kap[:, None] * kap[None, :] * f2[:, None] * fs2[None, :]
                       + kap[:, None] * N * f2[:, None] + kap[None, :] * N * fs2[None, :]
                       + psi2))
    np.fill_diagonal(interference, 0.0)
    return signal, interference


def asymptotic_large_m(scenario: Scenario, ris: NdRis, los: Optional[LosSet] = None,
                       drop_cross_term: bool = False) -> np.ndarray:
    """Per-user rate limit as the number of BS antennas grows without bound."""
    E, I = asymptotic_terms(scenario, ris, los, drop_cross_term)
    P = scenario.tx_power_w
    with np.errstate(divide="ignore"):
        return np.log2(1.0 + P * E / (I @ P))


def asymptotic_large_p(scenario: Scenario, ris: NdRis, los: Optional[LosSet] = None,
                       drop_cross_term: bool = False) -> np.ndarray:
    """Per-user rate limit as the (equal) transmit power grows without bound."""
    P = scenario.tx_power_w
    if not np.all(P == P[0]):
        raise ValueError("power limit requires equal per-user transmit power")
    if scenario.K < 2:
        raise ValueError("power limit is unbounded for a single user")
    E, I = expectation_terms(scenario, ris, los, drop_cross_term)
    return np.log2(1.0 + E / I.sum(axis=1))


# Individual moments -------------------------------------------------------------

class OracleResult(NamedTuple):
    closed_value: float
    sampled_value: float
    standard_error: float


MOMENT_TERMS = (
    "pair_gq", "pair_gq_los_los", "pair_gq_los_nlos", "pair_gq_nlos_los", "pair_gq_nlos_nlos", "pair_gh", "pair_hq", "pair_hh",
    "self_gq", "self_gq_los_los", "self_gq_los_nlos", "self_gq_nlos_los", "self_gq_nlos_nlos", "self_gq_mean", "self_gq_hh", "self_gh", "self_hq",
    "self_gh_qh", "self_hh",
)
"""Identifiers of the individually checkable moments.

``pair_*`` terms involve users ``k != i`` and ``self_*`` terms user ``k``
alone. ``pair_gq`` is ``E|g_k q_i|^2`` and ``pair_gq_<a>_<b>`` its unscaled
parts built from the LoS or NLoS component of each factor; ``pair_gh`` is
``E|g_k h_bi^H|^2``, ``pair_hq`` is ``E|h_bk q_i|^2`` and ``pair_hh`` is
``E|h_bk h_bi^H|^2``. ``self_gq`` is ``E|g_k q_k|^2`` with parts
``self_gq_<a>_<b>``; ``self_gq_mean`` is ``E Re{g_k q_k}``, ``self_gq_hh``
is ``E Re{g_k q_k h_bk h_bk^H}``, ``self_gh`` is ``E|g_k h_bk^H|^2``,
``self_hq`` is ``E|h_bk q_k|^2``, ``self_gh_qh`` is the vanishing
``E Re{g_k h_bk^H q_k^H h_bk^H}`` and ``self_hh`` is ``E|h_bk h_bk^H|^2``.
"""


def _closed_moment(term, s, los, ris, k, i, drop_cross_term):
    M, N = float(s.M), float(s.N)
    f, fs, t1, psi1, psi2 = _surface_terms(ris, los)
    tau = np.trace(t1)
    kk, ki = s.rician_user_ris[k], s.rician_user_ris[i]
    ak, ai = s.alpha_bs_user[k], s.alpha_bs_user[i]
    ck, ci = los.c[k], los.c[i]
    fk2, fsk2, fi2 = abs(f[k]) ** 2, abs(fs[k]) ** 2, abs(fs[i]) ** 2
    ffs = f[k] * fs[k]
    parts = {
        "pair_gq_los_los": kk * ki * M ** 2 * fk2 * fi2,
        "pair_gq_los_nlos": kk * M ** 2 * N * fk2,
        "pair_gq_nlos_los": ki * M ** 2 * N * fi2,
        "pair_gq_nlos_nlos": M ** 2 * psi2,
        "self_gq_los_los": kk ** 2 * M ** 2 * fk2 * fsk2,
        "self_gq_los_nlos": kk * M ** 2 * N * fk2,
        "self_gq_nlos_los": kk * M ** 2 * N * fsk2,
        "self_gq_nlos_nlos": M ** 2 * psi1,
    }
    if term in parts:
        return parts[term]
    if term == "pair_gq":
        return ck * ci * (parts["pair_gq_los_los"] + parts["pair_gq_los_nlos"] + parts["pair_gq_nlos_los"] + parts["pair_gq_nlos_nlos"])
    if term == "self_gq":
        gq = parts["self_gq_los_los"] + parts["self_gq_los_nlos"] + parts["self_gq_nlos_los"] + parts["self_gq_nlos_nlos"]
        if not drop_cross_term:
            gq += 2.0 * kk * M ** 2 * np.real(np.conj(ffs) * tau)
        return ck ** 2 * gq
    mean_gq = ck * M * (kk * np.real(ffs) + np.real(tau))
    return {
        "pair_gh": ai * ck * (kk * M * fk2 + M * N),
        "pair_hq": ak * ci * (ki * M * fi2 + M * N),
        "pair_hh": ak * ai * M,
        "self_gq_mean": mean_gq,
        "self_gq_hh": ak * M * mean_gq,
        "self_gh": ak * ck * (kk * M * fk2 + M * N),
        "self_hq": ak * ck * (kk * M * fsk2 + M * N),
        "self_gh_qh": 0.0,
        "self_hh": ak ** 2 * (M ** 2 + M),
    }[term]


def _sampled_moment(term, ch, ris, k, i, kappa):
    """Per-trial values of the quantity whose mean the term claims."""
    Hbr = np.swapaxes(ch.bs_ris, -1, -2)          # N x M, path loss included
    Hbar = ch.bs_ris_los.T                        # N x M, unit amplitude

    def g(row, H):                                # row @ Phi* @ H
        return np.einsum("...n,...nm->...m", row[..., ris.perm] * ris.theta, H)

    def q(row, H):                                # H^H @ Phi~ @ row^H
        col = ris.apply_conj(np.conj(row)[..., None])[..., 0]
        return np.einsum("...n,...nm->...m", col, H.conj())

    def dot(x, y):
        return np.sum(x * y, axis=-1)

    if term in _COMPONENTS:
        a, b, same = _COMPONENTS[term]
        o = k if same else i
        g_parts = (np.sqrt(kappa[k]) * g(ch.user_ris_los[..., :, k], Hbar),
                   g(ch.user_ris_nlos[..., :, k], Hbar))
        q_parts = (np.sqrt(kappa[o]) * q(ch.user_ris_los[..., :, o], Hbar),
                   q(ch.user_ris_nlos[..., :, o], Hbar))
        return np.abs(dot(g_parts[a], q_parts[b])) ** 2

    hbk, hbi = ch.direct[..., :, k], ch.direct[..., :, i]
    hrk, hri = ch.user_ris[..., :, k], ch.user_ris[..., :, i]
    gk, qk, qi = g(hrk, Hbr), q(hrk, Hbr), q(hri, Hbr)
    if term == "pair_gq":
        return np.abs(dot(gk, qi)) ** 2
    if term == "pair_gh":
        return np.abs(dot(gk, hbi.conj())) ** 2
    if term == "pair_hq":
        return np.abs(dot(hbk, qi)) ** 2
    if term == "pair_hh":
        return np.abs(dot(hbk, hbi.conj())) ** 2
    if term == "self_gq":
        return np.abs(dot(gk, qk)) ** 2
    if term == "self_gq_mean":
        return np.real(dot(gk, qk))
    if term == "self_gq_hh":
        return np.real(dot(gk, qk) * dot(hbk, hbk.conj()))
    if term == "self_gh":
        return np.abs(dot(gk, hbk.conj())) ** 2
    if term == "self_hq":
        return np.abs(dot(hbk, qk)) ** 2
    if term == "self_gh_qh":
        return np.real(dot(gk, hbk.conj()) * dot(qk.conj(), hbk.conj()))
    return np.abs(dot(hbk, hbk.conj())) ** 2      # self_hh


# (LoS/NLoS part of g, LoS/NLoS part of q, same user for both)
_COMPONENTS = {
    "pair_gq_los_los": (0, 0, False), "pair_gq_los_nlos": (0, 1, False), "pair_gq_nlos_los": (1, 0, False), "pair_gq_nlos_nlos": (1, 1, False),
    "self_gq_los_los": (0, 0, True), "self_gq_los_nlos": (0, 1, True), "self_gq_nlos_los": (1, 0, True), "self_gq_nlos_nlos": (1, 1, True),
}
_PAIR_TERMS = {"pair_gq", "pair_gq_los_los", "pair_gq_los_nlos", "pair_gq_nlos_los", "pair_gq_nlos_nlos", "pair_gh", "pair_hq", "pair_hh"}


def moment_oracle(term_id: str, scenario: Scenario, ris: NdRis, trials: int = 100_000,
                         seed=0, k: int = 0, i: int = 1, drop_cross_term: bool = False,
                         block_size: int = ORACLE_BLOCK) -> OracleResult:
    """Compare one closed-form moment against its sample mean over fresh fading.

    Returns the closed value, the sample mean and the standard error of the
    mean, so that a caller can test agreement in standard-error units.
    """
    if term_id not in MOMENT_TERMS:
        raise ValueError(f"unknown term {term_id!r}; choose from {', '.join(MOMENT_TERMS)}")
    _require_los(scenario)
    s = scenario
    if not (0 <= k < s.K) or not (0 <= i < s.K):
        raise ValueError(f"user indices must lie in 0..{s.K - 1}")
    if term_id in _PAIR_TERMS and k == i:
        raise ValueError(f"{term_id} involves two distinct users")
    los = los_set(s)
    closed = float(_closed_moment(term_id, s, los, ris, k, i, drop_cross_term))
    values = np.empty(trials)
    for b, n, rng in trial_blocks(seed, trials, block_size):
        ch = sample_channels(s, rng, n, los=los)
        start = b * block_size
        values[start:start + n] = _sampled_moment(term_id, ch, ris, k, i, s.rician_user_ris)
    se = values.std(ddof=1) / np.sqrt(trials) if trials > 1 else float("inf")
    return OracleResult(closed, float(values.mean()), float(se))
