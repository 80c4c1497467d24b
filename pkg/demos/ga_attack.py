"""Optimise the surface with the genetic algorithm and compare schemes.

The GA minimises the closed-form MRT sum rate; each resulting surface is
then scored by Monte Carlo under ZF, together with a random surface and
the two heuristics. Takes a few seconds.
"""
import numpy as np

from ndcrack import baseline_rates, monte_carlo_rates, random_ndris, reference_preset
from ndcrack.optimize import GaParams, ha1, ha2, run_ga

scn = reference_preset(128, 32, seed=0)
params = GaParams.for_scenario(scn, seed=0)
res = run_ga(scn, params)
print(f"GA stopped at epoch {res.stopped_epoch}, plateau from epoch {res.converged_epoch}")

rng = np.random.default_rng(3)
schemes = {
    "random": random_ndris(scn.N, rng),
    "ha1": ha1(scn, rng),
    "ha2": ha2(scn, params, rng),
    "ga": res.best,
}
base = baseline_rates(scn, "zf", 500).sum_rate
print(f"no attack {base:6.2f} bit/s/Hz")
for name, ris in schemes.items():
    rate = monte_carlo_rates(scn, ris, "zf", 500).sum_rate
    print(f"{name:>9} {rate:6.2f} bit/s/Hz  ({1 - rate / base:.0%} lost)")
