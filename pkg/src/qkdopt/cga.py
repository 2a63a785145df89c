"""Continuous genetic algorithm over normalized budget-split genes.

A chromosome is a pair of genes in ``[-1, 1]`` encoding the two free budget
components (estimation and correctness shares); the secrecy share is whatever
the total leaves over.  Selection is elitist and softmax-weighted, crossover
blends genes convexly, and mutation adds clipped Gaussian noise.  Infeasible
splits are not errors: they score the worst-fitness marker ``-inf`` and are
simply never selected while anything feasible exists.

Determinism: every run consumes a single ``numpy`` generator in a fixed
stream order — one uniform block for initialization, then per generation all
pairing draws, all crossover draws, one uniform block and one normal block
for mutation (and, only when a generation must be re-seeded, one uniform
block).  Fitness evaluation draws nothing, so identical seeds give identical
results regardless of how evaluations are scheduled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .budget import EpsilonBudget, Family, GeneBounds, map_gene, reconstruct_sec

__all__ = [
    "WORST_FITNESS",
    "CgaConfig",
    "Chromosome",
    "OptimizationResult",
    "initialize",
    "evaluate",
    "select",
    "softmax_probabilities",
    "pair",
    "crossover",
    "mutate",
    "run",
    "run_genetic",
]

logger = logging.getLogger(__name__)

#: Ordered sentinel below any finite rate; the score of an infeasible split.
WORST_FITNESS = float("-inf")

#: Per-gene probability that crossover blends instead of copying the mother.
_CROSSOVER_PROB = 0.5


@dataclass(frozen=True)
class CgaConfig:
    """Hyperparameters of the genetic search.

    Defaults follow the tuning used for all shipped experiments: population
    200, 300 generations, half the population eligible as parents, every
    parent surviving, and a 50% per-gene mutation probability with noise
    spread 0.2 on the normalized scale.
    """

    population: int = 200
    iterations: int = 300
    mutation_rate: float = 0.5
    parent_rate: float = 0.5
    survival_rate: float = 1.0
    mutation_sigma: float = 0.2
    rng_seed: int | None = None

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must hold at least two chromosomes")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not (0.0 <= self.mutation_rate <= 1.0):
            raise ValueError("mutation_rate must lie in [0, 1]")
        if not (0.0 < self.parent_rate <= 1.0):
            raise ValueError("parent_rate must lie in (0, 1]")
        if not (0.0 <= self.survival_rate <= 1.0):
            raise ValueError("survival_rate must lie in [0, 1]")
        if self.mutation_sigma <= 0.0:
            raise ValueError("mutation_sigma must be positive")
        if self.n_parents < 2:
            raise ValueError(
                "parent_rate too small: the parent pool must keep at least "
                f"two of {self.population} chromosomes"
            )

    @property
    def n_parents(self) -> int:
        return math.floor(self.population * self.parent_rate)

    @property
    def n_survivors(self) -> int:
        return max(1, math.floor(self.n_parents * self.survival_rate))


@dataclass(frozen=True)
class Chromosome:
    """A candidate split in gene space, with its score once evaluated."""

    genes: tuple[float, float]
    fitness: float | None = None
    feasible: bool | None = None


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of one genetic run.

    ``fitness_history`` records the best fitness of each generation's
    evaluated population; elitism makes it non-decreasing.  ``evaluations``
    counts chromosome scorings (population size times generations);
    ``reseeds`` counts generations whose parent pool collapsed below two
    feasible chromosomes and had to be re-drawn.
    """

    best_genes: tuple[float, float]
    best_fitness: float
    best_budget: EpsilonBudget | None
    fitness_history: list[float] = field(repr=False)
    evaluations: int = 0
    reseeds: int = 0


def initialize(config: CgaConfig, rng: np.random.Generator) -> list[Chromosome]:
    """Draw the starting population uniformly over the gene square."""
    genes = rng.uniform(-1.0, 1.0, size=(config.population, 2))
    return [Chromosome(genes=(float(g[0]), float(g[1]))) for g in genes]


def evaluate(
    population: Sequence[Chromosome],
    total_eps: float,
    family: Family,
    rate_fn: Callable[[EpsilonBudget], float],
) -> list[Chromosome]:
    """Score every chromosome by mapping genes to a budget and rating it.

    Genes map linearly onto ``[component floor, total_eps]``; splits whose
    secrecy remainder falls below the floor, and budgets on which
    ``rate_fn`` raises a domain error, receive :data:`WORST_FITNESS` so that
    selection discards them without aborting the run.
    """
    bounds = GeneBounds.for_total(total_eps)
    out = []
    for chrom in population:
        eps_pe = map_gene(chrom.genes[0], bounds)
        eps_cor = map_gene(chrom.genes[1], bounds)
        budget = reconstruct_sec(total_eps, eps_pe, eps_cor, family)
        if budget is None:
            out.append(replace(chrom, fitness=WORST_FITNESS, feasible=False))
            continue
        try:
            rate = rate_fn(budget)
        except (ValueError, ArithmeticError, OverflowError):
            out.append(replace(chrom, fitness=WORST_FITNESS, feasible=False))
            continue
        if math.isnan(rate):
            rate = WORST_FITNESS
        out.append(replace(chrom, fitness=rate, feasible=rate > WORST_FITNESS))
    return out


def _sorted_by_fitness(population: Sequence[Chromosome]) -> list[Chromosome]:
    """Best first; equal fitness keeps the original (stable) order."""
    return sorted(population, key=lambda c: -c.fitness)


def select(
    population: Sequence[Chromosome], config: CgaConfig
) -> tuple[list[Chromosome], list[Chromosome]]:
    """Return ``(parent pool, survivors)`` — the fitness-ranked prefixes."""
    ranked = _sorted_by_fitness(population)
    return ranked[: config.n_parents], ranked[: config.n_survivors]


def softmax_probabilities(fitnesses: Sequence[float]) -> list[float]:
    """Selection weights over a parent pool.

    Finite fitness values are min-max rescaled to ``[0, 1]`` (keeping the
    softmax well-conditioned whatever the physical rate scale) and
    exponentiated; worst-fitness entries get probability zero.  A pool of
    identical finite values degenerates to the uniform distribution.
    """
    finite = [f for f in fitnesses if f > WORST_FITNESS]
    if not finite:
        raise ValueError("no finite-fitness chromosomes to select from")
    lo, hi = min(finite), max(finite)
    span = hi - lo
    weights = []
    for f in fitnesses:
        if f <= WORST_FITNESS:
            weights.append(0.0)
        elif span == 0.0:
            weights.append(1.0)
        else:
            weights.append(math.exp((f - lo) / span))
    norm = sum(weights)
    return [w / norm for w in weights]


def _draw_index(probs: Sequence[float], u: float) -> int:
    """Inverse-CDF draw: smallest index whose cumulative probability exceeds u."""
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    # u landed in the rounding slack at the top of the CDF
    return max(i for i, p in enumerate(probs) if p > 0.0)


def pair(
    parents: Sequence[Chromosome], rng: np.random.Generator
) -> tuple[int, int]:
    """Draw a (mother, father) index pair from the parent pool.

    The mother follows the softmax weights; the father follows the same
    weights renormalized with the mother excluded, so the two are always
    distinct.  Consumes exactly two uniform draws.
    """
    probs = softmax_probabilities([c.fitness for c in parents])
    if sum(1 for p in probs if p > 0.0) < 2:
        raise ValueError("pairing needs at least two selectable parents")
    mother = _draw_index(probs, rng.random())
    conditional = list(probs)
    conditional[mother] = 0.0
    norm = sum(conditional)
    conditional = [p / norm for p in conditional]
    father = _draw_index(conditional, rng.random())
    return mother, father


def crossover(
    mother: Chromosome, father: Chromosome, rng: np.random.Generator
) -> Chromosome:
    """Produce one offspring; consumes two coins then two blend weights.

    Each gene independently either blends convexly,
    ``gamma * mother + (1 - gamma) * father`` with ``gamma`` uniform, or
    copies the mother's gene.  Offspring therefore never leave the interval
    hull of their parents' genes.
    """
    coins = rng.random(2)
    gammas = rng.random(2)
    genes = []
    for i in range(2):
        if coins[i] < _CROSSOVER_PROB:
            g = gammas[i] * mother.genes[i] + (1.0 - gammas[i]) * father.genes[i]
        else:
            g = mother.genes[i]
        genes.append(float(g))
    return Chromosome(genes=(genes[0], genes[1]))


def mutate(
    population: Sequence[Chromosome],
    elite_index: int,
    config: CgaConfig,
    rng: np.random.Generator,
) -> list[Chromosome]:
    """Add Gaussian noise to genes, sparing the elite chromosome.

    Consumes one uniform block and one normal block of shape
    ``(len(population), 2)`` regardless of which genes actually mutate, so
    the stream layout does not depend on outcomes.  Each gene mutates with
    probability ``mutation_rate``; results are clipped to ``[-1, 1]``.
    """
    mask = rng.random((len(population), 2)) < config.mutation_rate
    noise = rng.normal(0.0, config.mutation_sigma, size=(len(population), 2))
    out = []
    for i, chrom in enumerate(population):
        if i == elite_index or not (mask[i][0] or mask[i][1]):
            out.append(chrom)
            continue
        genes = list(chrom.genes)
        for j in range(2):
            if mask[i][j]:
                genes[j] = float(min(max(genes[j] + noise[i][j], -1.0), 1.0))
        out.append(Chromosome(genes=(genes[0], genes[1])))
    return out


def run_genetic(
    config: CgaConfig,
    fitness_fn: Callable[[tuple[float, float]], float],
    rng: np.random.Generator | None = None,
) -> OptimizationResult:
    """Core generational loop over an arbitrary gene-space fitness.

    ``fitness_fn`` must be deterministic and may return
    :data:`WORST_FITNESS` for infeasible genes.  Each generation: evaluate,
    rank, record the best, select parents and survivors, draw all pairs,
    breed offspring to refill the population, then mutate everything except
    the elite.  If fewer than two feasible parents exist the generation is
    re-drawn uniformly around the sole best chromosome.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    population = initialize(config, rng)
    n_offspring = config.population - config.n_survivors
    history: list[float] = []
    evaluations = 0
    reseeds = 0
    best: Chromosome | None = None

    for _ in range(config.iterations):
        scored = []
        for chrom in population:
            fit = fitness_fn(chrom.genes)
            if math.isnan(fit):
                fit = WORST_FITNESS
            scored.append(replace(chrom, fitness=fit, feasible=fit > WORST_FITNESS))
        evaluations += len(scored)
        parents, survivors = select(scored, config)
        gen_best = parents[0]
        if best is None or gen_best.fitness > best.fitness:
            best = gen_best
        history.append(gen_best.fitness)

        if sum(1 for c in parents if c.feasible) < 2:
            logger.info("re-seeding generation: fewer than two feasible parents")
            reseeds += 1
            population = initialize(config, rng)
            population[0] = Chromosome(genes=best.genes)
            continue

        pairs = [pair(parents, rng) for _ in range(n_offspring)]
        offspring = [crossover(parents[m], parents[f], rng) for m, f in pairs]
        next_population = list(survivors) + offspring
        population = mutate(next_population, 0, config, rng)

    return OptimizationResult(
        best_genes=best.genes,
        best_fitness=best.fitness,
        best_budget=None,
        fitness_history=history,
        evaluations=evaluations,
        reseeds=reseeds,
    )


def run(
    config: CgaConfig,
    total_eps: float,
    family: Family,
    rate_fn: Callable[[EpsilonBudget], float],
    rng: np.random.Generator | None = None,
) -> OptimizationResult:
    """Optimize the split of ``total_eps`` against a key-rate function.

    Wraps :func:`run_genetic` with the gene-to-budget mapping used by
    :func:`evaluate` and resolves the winning genes back into a budget
    (``None`` if the search never found a feasible split).
    """
    bounds = GeneBounds.for_total(total_eps)

    def fitness(genes: tuple[float, float]) -> float:
        budget = reconstruct_sec(
            total_eps, map_gene(genes[0], bounds), map_gene(genes[1], bounds), family
        )
        if budget is None:
            return WORST_FITNESS
        try:
            return rate_fn(budget)
        except (ValueError, ArithmeticError, OverflowError):
            return WORST_FITNESS

    result = run_genetic(config, fitness, rng=rng)
    best_budget = None
    if result.best_fitness > WORST_FITNESS:
        best_budget = reconstruct_sec(
            total_eps,
            map_gene(result.best_genes[0], bounds),
            map_gene(result.best_genes[1], bounds),
            family,
        )
    return replace(result, best_budget=best_budget)
