"""Genetic search over surface configurations, plus heuristic baselines.

A chromosome is an :class:`~ndcrack.ndris.NdRis`: N permutation genes and N
phase genes. The default objective is the closed-form MRT sum rate, which the
attacker wants as small as possible, so fitness is its reciprocal.

Baselines
---------
``ha1``
    Random permutation; phases chosen by coordinate descent to minimise the
    line-of-sight cascade strength ``M * sum_k |f_k|^2``.
``ha2``
    Random frozen phases; permutation chosen by the same GA with fitness
    ``1 / strength``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from .channel import LosSet, los_set
from .closedform import _surface_terms, closed_form_rates
from .ndris import NdRis, make_ndris, phase_grid, random_ndris, random_phases
from .scenario import Scenario


@dataclass(frozen=True)
class GaParams:
    """GA sizes and operator counts.

    ``population = elites + couples + mutants``. ``perm_cross_points`` and
    ``phase_cross_points`` are the crossover points per couple;
    ``perm_mut_points`` and ``phase_mut_points`` the mutation points per
    mutant. Convergence is declared at epoch ``e`` when the best fitness at
    ``e + patience`` exceeds that at ``e`` by no more than ``tol`` (relative).
    """

    population: int = 50
    elites: int = 5
    couples: int = 35
    mutants: int = 10
    initial_pool: int = 100
    perm_cross_points: int = 3
    phase_cross_points: int = 5
    perm_mut_points: int = 3
    phase_mut_points: int = 3
    max_epochs: int = 300
    patience: int = 20
    tol: float = 1e-6
    seed: int = 0
    resolution_bits: Optional[int] = None

    def __post_init__(self):
        counts = (self.population, self.elites, self.couples, self.mutants, self.initial_pool,
                  self.perm_cross_points, self.phase_cross_points, self.perm_mut_points,
                  self.phase_mut_points, self.max_epochs, self.patience)
        if any(int(c) != c or c < 0 for c in counts):
            raise ValueError("GA counts must be non-negative integers")
        if self.population != self.elites + self.couples + self.mutants:
            raise ValueError(
                f"population {self.population} != elites {self.elites} + couples "
                f"{self.couples} + mutants {self.mutants}")
        if self.population < 1 or self.initial_pool < self.population:
            raise ValueError("need 1 <= population <= initial_pool")
        if self.tol < 0:
            raise ValueError("tol must be non-negative")

    def check_size(self, n: int) -> None:
        points = (self.perm_cross_points, self.phase_cross_points,
                  self.perm_mut_points, self.phase_mut_points)
        if max(points) > n:
            raise ValueError(f"operator points {points} exceed surface size {n}")

    @classmethod
    def for_scenario(cls, scenario: Scenario, **overrides) -> "GaParams":
        """Defaults with an initial pool of 100 for free-space BS-RIS loss, 300 otherwise."""
        overrides.setdefault("initial_pool", 100 if scenario.exponent_bs_ris == 2.0 else 300)
        return cls(**overrides)


@dataclass(frozen=True)
class Individual:
    chromosome: NdRis
    fitness: float


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    best_fitness: float
    best_sum_rate: float
    mean_fitness: float


@dataclass
class GaResult:
    """Outcome of :func:`run_ga`.

    ``history[0]`` describes the filtered initial population. ``best_sum_rate``
    holds ``1 / best_fitness``, i.e. the minimised objective. ``converged_epoch``
    is ``None`` when the stopping rule never fired.
    """

    best: NdRis
    best_fitness: float
    history: List[EpochRecord] = field(default_factory=list)
    converged_epoch: Optional[int] = None
    stopped_epoch: int = 0
    initial_best_fitness: float = float("nan")

    @property
    def best_fitness_history(self) -> np.ndarray:
        return np.array([h.best_fitness for h in self.history])


Objective = Callable[[NdRis], float]


def sum_rate_objective(scenario: Scenario, los: Optional[LosSet] = None) -> Objective:
    los = los if los is not None else los_set(scenario)
    return lambda r: closed_form_rates(scenario, r, los).sum_rate


def fitness(scenario: Scenario, r: NdRis, los: Optional[LosSet] = None) -> float:
    """Reciprocal of the closed-form MRT sum rate."""
    return 1.0 / closed_form_rates(scenario, r, los).sum_rate


def los_strength(scenario: Scenario, r: NdRis, los: Optional[LosSet] = None) -> float:
    """``sum_k ||hbar_k Phi* Hbar_br||^2 = M * sum_k |f_k|^2`` (unit-amplitude LoS)."""
    los = los if los is not None else los_set(scenario)
    f = _surface_terms(r, los)[0]
    return float(scenario.M * np.sum(np.abs(f) ** 2))


def roulette_probabilities(fitnesses) -> np.ndarray:
    fit = np.asarray(fitnesses, dtype=float)
    if fit.size == 0 or np.any(~(fit > 0)) or np.any(~np.isfinite(fit)):
        raise ValueError("roulette selection needs finite positive fitness values")
    return fit / fit.sum()


def roulette_select(fitnesses, count: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``count`` draws with replacement, proportional to fitness."""
    return rng.choice(len(fitnesses), size=count, replace=True,
                      p=roulette_probabilities(fitnesses))


def crossover_permutations(perm_a, perm_b, points):
    """Swap-with-repair crossover at the given positions.

    At position ``p`` each parent takes the other's value; the value it gives
    up moves to where the incoming value used to be, so both stay bijective.
    """
    a = np.array(perm_a, copy=True)
    b = np.array(perm_b, copy=True)
    for p in points:
        va, vb = a[p], b[p]
        if va == vb:
            continue
        ja = int(np.flatnonzero(a == vb)[0])
        jb = int(np.flatnonzero(b == va)[0])
        a[p], a[ja] = vb, va
        b[p], b[jb] = va, vb
    return a, b


def crossover(parent_a: NdRis, parent_b: NdRis, params: GaParams,
              rng: np.random.Generator, freeze_phases: bool = False) -> NdRis:
    """Cross two chromosomes and return one of the two offspring at random."""
    n = parent_a.n
    if parent_b.n != n:
        raise ValueError("parents differ in surface size")
    pa, pb = crossover_permutations(
        parent_a.perm, parent_b.perm,
        rng.choice(n, size=params.perm_cross_points, replace=False))
    qa = np.array(parent_a.phases, copy=True)
    qb = np.array(parent_b.phases, copy=True)
    if not freeze_phases:
        pts = rng.choice(n, size=params.phase_cross_points, replace=False)
        qa[pts], qb[pts] = parent_b.phases[pts], parent_a.phases[pts]
    bits = parent_a.resolution_bits
    if rng.integers(2) == 0:
        return make_ndris(pa, qa, bits)
    return make_ndris(pb, qb, bits)


def mutate(r: NdRis, params: GaParams, rng: np.random.Generator,
           freeze_phases: bool = False) -> NdRis:
    """Swap ``perm_mut_points`` genes with random partners; redraw ``phase_mut_points`` phases."""
    n = r.n
    perm = np.array(r.perm, copy=True)
    phases = np.array(r.phases, copy=True)
    if n > 1:
        for p in rng.choice(n, size=params.perm_mut_points, replace=False):
            q = (p + rng.integers(1, n)) % n       # uniform over the other positions
            perm[p], perm[q] = perm[q], perm[p]
    if not freeze_phases and params.phase_mut_points:
        pts = rng.choice(n, size=params.phase_mut_points, replace=False)
        phases[pts] = random_phases(pts.size, rng, r.resolution_bits)
    return make_ndris(perm, phases, r.resolution_bits)


def _converged_at(best: List[float], patience: int, tol: float) -> Optional[int]:
    e = len(best) - 1 - patience
    if e >= 0 and best[e + patience] <= best[e] * (1.0 + tol):
        return e
    return None


def run_ga(scenario: Scenario, params: GaParams, objective: Optional[Objective] = None,
           initial_phases: Optional[np.ndarray] = None) -> GaResult:
    """Minimise ``objective`` (default: closed-form sum rate) over surfaces.

    With ``initial_phases`` the phases are frozen to that vector and only the
    permutation evolves.
    """
    n = scenario.N
    params.check_size(n)
    rng = np.random.default_rng(params.seed)
    objective = objective if objective is not None else sum_rate_objective(scenario)
    frozen = initial_phases is not None
    bits = params.resolution_bits

    def evaluate(r):
        return Individual(r, 1.0 / objective(r))

    def spawn():
        if frozen:
            return make_ndris(rng.permutation(n), initial_phases, bits)
        return random_ndris(n, rng, bits)

    pool = [evaluate(spawn()) for _ in range(params.initial_pool)]
    pool.sort(key=lambda ind: -ind.fitness)
    population = pool[: params.population]

    result = GaResult(population[0].chromosome, population[0].fitness,
                      initial_best_fitness=population[0].fitness)
    best_trace = []

    def record(epoch):
        fit = np.array([ind.fitness for ind in population])
        b = population[0].fitness
        best_trace.append(b)
        result.history.append(EpochRecord(epoch, b, 1.0 / b, float(fit.mean())))

    record(0)
    epoch = 0
    for epoch in range(1, params.max_epochs + 1):
        fit = np.array([ind.fitness for ind in population])
        elites = population[: params.elites]
        parents = roulette_select(fit, 2 * params.couples, rng)
        children = [evaluate(crossover(population[a].chromosome, population[b].chromosome,
                                       params, rng, frozen))
                    for a, b in parents.reshape(-1, 2)]
        donors = rng.choice(len(population), size=params.mutants, replace=False)
        mutants = [evaluate(mutate(population[d].chromosome, params, rng, frozen))
                   for d in donors]
        population = sorted(elites + children + mutants, key=lambda ind: -ind.fitness)
        record(epoch)
        conv = _converged_at(best_trace, params.patience, params.tol)
        if conv is not None:
            result.converged_epoch = conv
            break
    result.stopped_epoch = epoch
    result.best = population[0].chromosome
    result.best_fitness = population[0].fitness
    return result


def ha1(scenario: Scenario, rng: np.random.Generator, resolution_bits: Optional[int] = None,
        tol: float = 1e-8, max_sweeps: int = 1000, los: Optional[LosSet] = None) -> NdRis:
    """Random permutation; phases from cyclic coordinate descent on the LoS strength.

    With ``f_k = sum_n b_kn theta_n`` and ``b_kn = hbar_k[perm[n]] a_N[n]``, each
    coordinate update sets ``theta_n`` to the unit (or grid) value minimising
    ``Re{theta_n s_n}`` where ``s_n = sum_k b_kn conj(f_k - b_kn theta_n)``.
    """
    los = los if los is not None else los_set(scenario)
    n = scenario.N
    perm = rng.permutation(n)
    phases = random_phases(n, rng, resolution_bits)
    B = los.los_user_ris[perm, :].T * los.a_n          # K x N
    theta = np.exp(1j * phases)
    grid = None if resolution_bits is None else np.exp(1j * phase_grid(resolution_bits))
    f = B @ theta
    obj = float(np.sum(np.abs(f) ** 2))
    for _ in range(max_sweeps):
        for j in range(n):
            rest = f - B[:, j] * theta[j]
            s = np.sum(B[:, j] * np.conj(rest))
            if abs(s) == 0.0:
                continue
            if grid is None:
                new = -np.conj(s) / abs(s)
            else:
                new = grid[np.argmin(np.real(grid * s))]
            theta[j] = new
            f = rest + B[:, j] * new
        new_obj = float(np.sum(np.abs(f) ** 2))
        done = obj - new_obj <= tol * max(obj, np.finfo(float).tiny)
        obj = new_obj
        if done:
            break
    phases = np.angle(theta)
    if grid is not None:
        phases = phase_grid(resolution_bits)[
            np.argmin(np.abs(theta[:, None] - grid[None, :]), axis=1)]
    return make_ndris(perm, phases, resolution_bits)


def ha2(scenario: Scenario, params: GaParams, rng: np.random.Generator,
        los: Optional[LosSet] = None) -> NdRis:
    """Random frozen phases; permutation evolved to minimise the LoS strength."""
    los = los if los is not None else los_set(scenario)
    phases = random_phases(scenario.N, rng, params.resolution_bits)
    seeded = GaParams(**{**params.__dict__, "seed": int(rng.integers(2 ** 63))})
    res = run_ga(scenario, seeded, lambda r: los_strength(scenario, r, los),
                 initial_phases=phases)
    return res.best


def write_ga_log(result: GaResult, path) -> None:
    """One CSV row per epoch: epoch, best_fitness, best_sum_rate, mean_fitness."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "best_fitness", "best_sum_rate", "mean_fitness"])
            for h in result.history:
                w.writerow([h.epoch, repr(h.best_fitness), repr(h.best_sum_rate),
                            repr(h.mean_fitness)])
    except OSError as exc:
        raise OSError(f"cannot write GA log to {path}: {exc}") from exc
