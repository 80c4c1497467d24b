"""Acceptance criteria 1-10, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the terminal
summary) and then asserts the criterion at its stated tolerance.
"""
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ndcrack.channel import effective_downlink_actual, effective_uplink, sample_channels
from ndcrack.closedform import MOMENT_TERMS, closed_form_rates, moment_oracle
from ndcrack.ndris import quantize, random_ndris, random_symmetric_ndris, validate_permutation
from ndcrack.optimize import GaParams, crossover, crossover_permutations, ha2, mutate, run_ga
from ndcrack.precoding import leakage, zf
from ndcrack.rate import baseline_rates, monte_carlo_rates
from ndcrack.scenario import reference_preset


def report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def surfaces(n, count, seed, bits=None):
    return [random_ndris(n, np.random.default_rng([seed, d]), bits) for d in range(count)]


def mean_mc(scn, rs, kind, trials, seed=0):
    return float(np.mean([monte_carlo_rates(scn, r, kind, trials, seed).sum_rate for r in rs]))


def mean_cf(scn, rs):
    return float(np.mean([closed_form_rates(scn, r).sum_rate for r in rs]))


def test_criterion_01_closed_form_matches_monte_carlo():
    limits = {32: 0.10, 64: 0.07, 128: 0.07}
    rs = surfaces(32, 20, seed=1)
    gaps = {}
    for m in limits:
        scn = reference_preset(m, 32)
        mc = mean_mc(scn, rs, "mrt", 500)
        gaps[m] = abs(mc - mean_cf(scn, rs)) / mc
    ok = all(gaps[m] <= limits[m] for m in limits)
    report(1, ok, "  ".join(f"M={m} gap={g:.2%} (<= {limits[m]:.0%})" for m, g in gaps.items()))


def test_criterion_02_moment_oracles():
    worst, failures = 0.0, []
    for m, n, k in [(8, 4, 2), (16, 8, 4)]:
        scn = reference_preset(m, n, seed=2, num_users=k)
        r = random_ndris(n, np.random.default_rng(m))
        for t, term in enumerate(MOMENT_TERMS):
            res = moment_oracle(term, scn, r, trials=200_000, seed=[m, t])
            # deterministic terms have zero spread; allow rounding only
            tol = max(3 * res.standard_error, 1e-9 * abs(res.closed_value))
            z = abs(res.sampled_value - res.closed_value) / tol * 3
            worst = max(worst, z)
            if z > 3:
                failures.append(f"{term}@M={m}")
    report(2, not failures, f"{2 * len(MOMENT_TERMS)} checks, worst {worst:.2f} SE"
           + (f", failing {failures}" if failures else ""))


def test_criterion_03_rayleigh_reduction():
    scn = reference_preset(128, 32, rician_user_ris=0.0)
    rs = surfaces(32, 50, seed=3)
    out, ok = [], True
    for kind, target in [("mrt", 0.32), ("zf", 0.83)]:
        base = baseline_rates(scn, kind, 500).sum_rate
        red = 1 - mean_mc(scn, rs, kind, 500) / base
        ok &= abs(red - target) <= 0.08
        out.append(f"{kind} reduction {red:.1%} (target {target:.0%} +/- 8 pp)")
    report(3, ok, "  ".join(out))


def test_criterion_04_large_surface_reduction():
    scn = reference_preset(128, 512)
    base = baseline_rates(scn, "mrt", 200).sum_rate
    red = 1 - mean_mc(scn, surfaces(512, 10, seed=4), "mrt", 200) / base
    report(4, red >= 0.70, f"N=512 MRT reduction {red:.1%} (>= 70%)")


def test_criterion_05_large_m_saturation():
    rs = surfaces(32, 10, seed=5)
    a, b = reference_preset(1024, 32), reference_preset(2048, 32)
    changes = [abs(closed_form_rates(a, r).sum_rate - closed_form_rates(b, r).sum_rate)
               / closed_form_rates(b, r).sum_rate for r in rs]
    report(5, max(changes) <= 0.02, f"max change M=1024 vs 2048 {max(changes):.3%} (<= 2%)")


def test_criterion_06_power_saturation():
    rs = surfaces(32, 10, seed=6)
    lo, hi = (reference_preset(128, 32, tx_power_per_user_dbm=p) for p in (50.0, 70.0))
    cf = max(abs(closed_form_rates(lo, r).sum_rate - closed_form_rates(hi, r).sum_rate)
             / closed_form_rates(lo, r).sum_rate for r in rs)
    z20, z40 = (mean_mc(reference_preset(128, 32, tx_power_per_user_dbm=p), rs, "zf", 500)
                for p in (20.0, 40.0))
    zf_change = abs(z40 - z20) / z20
    report(6, cf <= 0.01 and zf_change <= 0.10,
           f"closed form 50->70 dBm max change {cf:.3%} (<= 1%)  "
           f"ZF Monte Carlo 20->40 dBm {zf_change:.3%} (<= 10%)")


def test_criterion_07_ga_behaviour():
    converged, monotone, results = 0, True, {}
    for seed in range(10):
        scn = reference_preset(128, 32, seed=seed)
        res = run_ga(scn, GaParams(seed=seed, initial_pool=100))
        monotone &= bool(np.all(np.diff(res.best_fitness_history) >= 0))
        converged += res.converged_epoch is not None and res.converged_epoch <= 160
        results[seed] = res
    scn = reference_preset(128, 32, seed=0)
    base = baseline_rates(scn, "zf", 500).sum_rate
    ga_rate = monte_carlo_rates(scn, results[0].best, "zf", 500).sum_rate
    params = GaParams(initial_pool=100)
    ha2_rs = [ha2(scn, params, np.random.default_rng([7, d])) for d in range(10)]
    ha2_rate = mean_mc(scn, ha2_rs, "zf", 500)
    ha2_red = 1 - ha2_rate / base
    ok = (monotone and converged >= 8 and ga_rate <= 0.25 * base and ga_rate < ha2_rate
          and ha2_red >= 0.70)
    report(7, ok, f"monotone={monotone} converged<=160: {converged}/10 (>= 8)  "
           f"ZF: GA {ga_rate / base:.1%} of baseline (<= 25%), HA2 reduction {ha2_red:.1%} "
           f"(>= 70%), GA < HA2: {ga_rate < ha2_rate}")


def test_criterion_08_one_bit_equivalence():
    out, ok = [], True
    for n in (32, 128):
        scn = reference_preset(128, n)
        rs = surfaces(n, 50, seed=8)
        for kind in ("mrt", "zf"):
            cont = mean_mc(scn, rs, kind, 500)
            onebit = mean_mc(scn, [quantize(r, 1) for r in rs], kind, 500)
            rel = abs(onebit - cont) / cont
            ok &= rel <= 0.10
            out.append(f"N={n} {kind} {rel:.2%}")
    report(8, ok, "1-bit vs continuous: " + "  ".join(out) + " (<= 10%)")


def test_criterion_09_symmetric_surfaces_are_reciprocal():
    scn = reference_preset(128, 32)
    rng = np.random.default_rng(9)
    worst_gap, worst_leak = 0.0, 0.0
    for _ in range(1000):
        r = random_symmetric_ndris(32, rng)
        ch = sample_channels(scn, rng)
        up = effective_uplink(ch, r)
        down = effective_downlink_actual(ch, r)
        worst_gap = max(worst_gap, np.linalg.norm(down - up.T) / np.linalg.norm(down))
        worst_leak = max(worst_leak, float(leakage(down, zf(up).matrix)))
    report(9, worst_gap <= 1e-12 and worst_leak <= 1e-9,
           f"max downlink mismatch {worst_gap:.1e} (<= 1e-12)  "
           f"max ZF leakage {worst_leak:.1e} (<= 1e-9)")


def test_criterion_10_crossover_fidelity():
    ca, cb = crossover_permutations([2, 1, 3, 5, 4], [3, 4, 1, 5, 2], [1])
    example = ca.tolist() == [2, 4, 3, 5, 1] and cb.tolist() == [3, 1, 4, 5, 2]
    params = GaParams()
    rng = np.random.default_rng(10)
    pop = [random_ndris(16, rng) for _ in range(8)]
    valid = True
    for _ in range(10_000):
        a, b = rng.integers(8, size=2)
        child = mutate(crossover(pop[a], pop[b], params, rng), params, rng)
        try:
            validate_permutation(child.perm)
        except ValueError:
            valid = False
            break
        pop[rng.integers(8)] = child
    report(10, example and valid, f"worked example {'exact' if example else 'differs'}  "
           f"10^4 cycles valid={valid}")
