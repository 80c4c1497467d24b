"""Monte Carlo SINR and ergodic-rate evaluation.

Randomness is organised in fixed-size trial blocks: block ``b`` always draws
from the ``b``-th child of ``SeedSequence(seed)``. A result therefore depends
only on ``(seed, trials)``, never on the order in which blocks are evaluated,
and shorter runs are prefixes of longer ones.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from .channel import (LosSet, effective_downlink_actual, effective_uplink, los_set,
                      sample_channels)
from .ndris import NdRis, identity_ndris
from .precoding import Precoder, build_precoder, leakage
from .scenario import Scenario

TRIAL_BLOCK = 250
DEFAULT_TRIALS = 2000


@dataclass(frozen=True)
class RateReport:
    """Per-user ergodic rates in bit/s/Hz.

    ``standard_error`` is per user; ``sum_rate_se`` is the standard error of
    the per-trial sum. Closed-form reports carry ``trials == 0`` and zero
    errors. ``max_leakage`` is the worst interference-to-signal power ratio
    seen over all trials (NaN when not measured).
    """

    per_user_rate: np.ndarray
    sum_rate: float
    per_user_sinr_mean: np.ndarray
    trials: int
    standard_error: np.ndarray
    sum_rate_se: float = 0.0
    max_leakage: float = float("nan")


def trial_blocks(seed, trials: int, block_size: int = TRIAL_BLOCK
                 ) -> Iterator[Tuple[int, int, np.random.Generator]]:
    """Yield ``(block_index, n_trials, generator)`` covering ``trials`` trials."""
    if trials < 1:
        raise ValueError("need at least one trial")
    n_blocks = -(-trials // block_size)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    for b, ss in enumerate(children):
        n = min(block_size, trials - b * block_size)
        yield b, n, np.random.default_rng(ss)


def sinr(h_actual_down: np.ndarray, w: Precoder, sigma2: float) -> np.ndarray:
    """Per-user SINR ``P_k|h_k w_k|^2 / (sum_{i!=k} P_i|h_k w_i|^2 + sigma2)``.

    ``h_actual_down`` is ``K x M`` (or batched); rows are the true downlink
    channels of the users.
    """
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    G = np.abs(h_actual_down @ w.matrix) ** 2 * w.power_alloc
    signal = np.diagonal(G, axis1=-2, axis2=-1)
    interference = G.sum(axis=-1) - signal
    return signal / (interference + sigma2)


def _simulate(scenario: Scenario, ris: Optional[NdRis], kind: str, trials: int, seed,
              block_size: int, los: Optional[LosSet]) -> RateReport:
    s = scenario
    los = los if los is not None else los_set(s)
    cascade = ris is not None
    surface = ris if cascade else identity_ndris(s.N)
    rates = np.empty((trials, s.K))
    sinrs = np.empty((trials, s.K))
    worst = 0.0
    for b, n, rng in trial_blocks(seed, trials, block_size):
        ch = sample_channels(s, rng, n, los=los, cascade=cascade)
        h_up = effective_uplink(ch, surface)
        h_dn = effective_downlink_actual(ch, surface)
        w = build_precoder(kind, h_up, s.tx_power_w)
        eta = sinr(h_dn, w, s.noise_power_w)
        sl = slice(b * block_size, b * block_size + n)
        sinrs[sl] = eta
        rates[sl] = np.log2(1.0 + eta)
        worst = max(worst, float(np.max(leakage(h_dn, w.matrix))))
    per_user = rates.mean(axis=0)
    ddof = 1 if trials > 1 else 0
    se = rates.std(axis=0, ddof=ddof) / np.sqrt(trials)
    sum_se = rates.sum(axis=1).std(ddof=ddof) / np.sqrt(trials)
    return RateReport(per_user, float(per_user.sum()), sinrs.mean(axis=0), trials, se,
                      float(sum_se), worst)


def monte_carlo_rates(scenario: Scenario, ris: NdRis, kind: str = "mrt",
                      trials: int = DEFAULT_TRIALS, seed=0, block_size: int = TRIAL_BLOCK,
                      los: Optional[LosSet] = None) -> RateReport:
    """Ergodic rates under the attack, estimated as the mean of ``log2(1 + sinr)``.

    Each trial draws fresh fading, forms the uplink the BS estimates, builds
    the precoder for the assumed reciprocal downlink and evaluates the SINR
    on the actual downlink.
    """
    if ris.n != scenario.N:
        raise ValueError(f"surface has {ris.n} elements, scenario expects {scenario.N}")
    return _simulate(scenario, ris, kind, trials, seed, block_size, los)


def baseline_rates(scenario: Scenario, kind: str = "mrt", trials: int = DEFAULT_TRIALS,
                   seed=0, block_size: int = TRIAL_BLOCK) -> RateReport:
    """Same pipeline with no surface present (BS-RIS link removed).

    With equal seeds the direct-link fading matches ``monte_carlo_rates``.
    """
    return _simulate(scenario, None, kind, trials, seed, block_size, None)


def reduction(attacked: float, baseline: float) -> float:
    """Fractional sum-rate loss ``1 - attacked / baseline``."""
    return 1.0 - attacked / baseline
