"""Walk through one attack on the reference deployment.

Builds the scenario, draws a random non-diagonal surface, and compares the
no-attack rate with the attacked rate under MRT and ZF. The closed-form
MRT approximation is printed next to its Monte Carlo counterpart.

Run with ``python3 demos/attack_walkthrough.py``.
"""
import numpy as np

from ndcrack import (baseline_rates, closed_form_rates, is_reciprocal, monte_carlo_rates,
                     random_ndris, reference_preset)

TRIALS = 1000

scn = reference_preset(128, 32, seed=0)
ris = random_ndris(scn.N, np.random.default_rng(1))
print(f"M={scn.M} N={scn.N} K={scn.K}, surface reciprocal: {is_reciprocal(ris)}")

for kind in ("mrt", "zf"):
    base = baseline_rates(scn, kind, TRIALS).sum_rate
    hit = monte_carlo_rates(scn, ris, kind, TRIALS)
    print(f"{kind.upper():>3}: no attack {base:6.2f}  attacked {hit.sum_rate:6.2f} "
          f"+/- {hit.sum_rate_se:.2f} bit/s/Hz  ({1 - hit.sum_rate / base:.0%} lost)")

cf = closed_form_rates(scn, ris)
print(f"closed-form MRT sum rate {cf.sum_rate:.2f} bit/s/Hz")
