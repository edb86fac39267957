"""Cultural evolution over a population of gene-carrying agents.

Each agent carries a gene, the (pool tag, attitude) pair naming a registered
strategy pool, plus a concrete strategy sampled from that pool. A generation
partitions the population into groups several times so every agent plays
exactly ``games_per_agent`` games, scores each agent by its mean normalised
payoff, carries the top ``elites`` agents over unchanged, and refills the
remaining slots by fitness-proportional copying of genes with mutation and a
fresh strategy draw. The process stops when one gene reaches the dominance
threshold or after a fixed number of generations, and reports the plurality
gene as the equilibrium.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .bounds import cached_bounds
from .engine import play_many
from .games import GameKind, GameParams
from .seeding import SEED_SPACE, derive_seed, parallel_map, rng_for
from .strategies import Attitude, Strategy, StrategyPool


@dataclass(frozen=True)
class Gene:
    """The heritable identity: which pool an agent samples strategies from."""

    pool_tag: str
    attitude: Attitude

    @property
    def label(self) -> str:
        return f"{self.pool_tag}/{self.attitude.value}"


@dataclass
class Individual:
    gene: Gene
    strategy: Strategy
    fitness: float = 0.0


@dataclass(frozen=True)
class EvolutionConfig:
    """Hyperparameters of a cultural evolution run.

    ``params.n`` must equal ``group_size``; every gene must resolve to a
    pool in ``pools``.
    """

    kind: GameKind
    params: GameParams
    genes: tuple[Gene, ...]
    pools: Mapping[Gene, StrategyPool]
    population: int = 512
    group_size: int = 4
    games_per_agent: int = 4
    elites: int = 64
    mutation_rate: float = 0.10
    dominance_threshold: float = 0.75
    max_generations: int = 200
    master_seed: int = 0

    def validate(self) -> None:
        self.params.validate_for(self.kind)
        if self.params.n != self.group_size:
            raise ValueError(
                f"params.n ({self.params.n}) must equal group_size ({self.group_size})"
            )
        if self.population % self.group_size != 0:
            raise ValueError(
                f"population {self.population} not divisible by group size {self.group_size}"
            )
        if not 0 <= self.elites < self.population:
            raise ValueError(f"elites must be in [0, population), got {self.elites}")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if not 0.0 < self.dominance_threshold <= 1.0:
            raise ValueError(
                f"dominance_threshold must be in (0, 1], got {self.dominance_threshold}"
            )
        if self.games_per_agent < 1:
            raise ValueError(f"games_per_agent must be >= 1, got {self.games_per_agent}")
        if self.max_generations < 1:
            raise ValueError(f"max_generations must be >= 1, got {self.max_generations}")
        if not self.genes:
            raise ValueError("gene list is empty")
        for gene in self.genes:
            if gene not in self.pools:
                raise ValueError(f"gene {gene.label} has no registered pool")


@dataclass
class GenerationStats:
    """Snapshot of one played generation (population at its start)."""

    generation: int
    gene_frequencies: dict[Gene, int]
    mean_welfare: float
    welfare_efficiency: float


@dataclass
class GenerationOutcome:
    population: list[Individual]  # the next generation
    stats: GenerationStats
    fitness: np.ndarray
    partitions: list[np.ndarray]  # one (groups, group_size) index array per wave


@dataclass
class EvolutionResult:
    winner: Gene
    terminated_by: str  # "threshold" | "max_generations"
    generations_run: int
    history: list[GenerationStats]
    final_frequencies: dict[Gene, int]


def welfare_efficiency(
    game_welfares: Sequence[float] | np.ndarray,
    kind: GameKind,
    params: GameParams,
) -> float:
    """Fraction of the min-to-max welfare gap captured by a set of games.

    Clamped to [0, 1] only when the bounds themselves are approximate.
    """
    limits = cached_bounds(kind, params)
    span = limits.span()
    if span == 0:
        raise ValueError("welfare bounds are degenerate (max equals min)")
    value = (float(np.mean(game_welfares)) - limits.min_mean) / span
    if limits.approximate:
        value = min(max(value, 0.0), 1.0)
    return value


def initial_population(config: EvolutionConfig, rng: np.random.Generator) -> list[Individual]:
    """Uniform split over genes (remainder to the earliest genes)."""
    base, extra = divmod(config.population, len(config.genes))
    population = []
    for g, gene in enumerate(config.genes):
        count = base + (1 if g < extra else 0)
        pool = config.pools[gene]
        population.extend(
            Individual(gene=gene, strategy=pool.sample_one(rng)) for _ in range(count)
        )
    return population


def sample_partitions(
    pop_size: int, group_size: int, waves: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """``waves`` independent random partitions into groups of ``group_size``."""
    return [
        rng.permutation(pop_size).reshape(pop_size // group_size, group_size)
        for _ in range(waves)
    ]


def evaluate_fitness(
    population: list[Individual],
    config: EvolutionConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Play every wave; returns (fitness, per-game welfare, partitions).

    Fitness is the agent's mean normalised payoff over its
    ``games_per_agent`` games.
    """
    pop_size = len(population)
    partitions = sample_partitions(pop_size, config.group_size, config.games_per_agent, rng)
    fitness_sum = np.zeros(pop_size)
    welfares = []
    for partition in partitions:
        rows = [[population[a].strategy for a in group] for group in partition]
        totals, mean_welfare = play_many(
            config.kind, config.params, rows, int(rng.integers(SEED_SPACE))
        )
        fitness_sum[partition.ravel()] += (totals / config.params.rounds).ravel()
        welfares.append(mean_welfare)
    return fitness_sum / config.games_per_agent, np.concatenate(welfares), partitions


def next_population(
    population: list[Individual],
    fitness: np.ndarray,
    config: EvolutionConfig,
    rng: np.random.Generator,
) -> list[Individual]:
    """Elitist selection plus fitness-proportional copying with mutation."""
    pop_size = len(population)
    shuffle = rng.permutation(pop_size)  # breaks fitness ties without rank bias
    ranked = shuffle[np.argsort(-fitness[shuffle], kind="stable")]
    elite_idx = ranked[: config.elites]
    new_pop = [
        Individual(gene=population[i].gene, strategy=population[i].strategy)
        for i in elite_idx
    ]
    slots = pop_size - config.elites
    total_fitness = float(fitness.sum())
    if total_fitness > 0:
        parents = rng.choice(pop_size, size=slots, p=fitness / total_fitness)
    else:
        parents = rng.integers(pop_size, size=slots)
    gene_index = {gene: g for g, gene in enumerate(config.genes)}
    n_genes = len(config.genes)
    mutate = rng.random(slots) < config.mutation_rate
    offsets = rng.integers(1, n_genes, size=slots) if n_genes > 1 else None
    for s in range(slots):
        gene = population[int(parents[s])].gene
        if mutate[s] and offsets is not None:
            gene = config.genes[(gene_index[gene] + int(offsets[s])) % n_genes]
        new_pop.append(Individual(gene=gene, strategy=config.pools[gene].sample_one(rng)))
    return new_pop


def gene_frequencies(population: list[Individual], config: EvolutionConfig) -> dict[Gene, int]:
    counts = Counter(ind.gene for ind in population)
    return {gene: counts.get(gene, 0) for gene in config.genes}


def run_generation(
    population: list[Individual],
    config: EvolutionConfig,
    rng: np.random.Generator,
    generation: int = 0,
) -> GenerationOutcome:
    """One full generation: play, score, select, refill."""
    fitness, game_welfares, partitions = evaluate_fitness(population, config, rng)
    for ind, f in zip(population, fitness):
        ind.fitness = float(f)
    stats = GenerationStats(
        generation=generation,
        gene_frequencies=gene_frequencies(population, config),
        mean_welfare=float(game_welfares.mean()),
        welfare_efficiency=welfare_efficiency(game_welfares, config.kind, config.params),
    )
    new_pop = next_population(population, fitness, config, rng)
    return GenerationOutcome(new_pop, stats, fitness, partitions)


def _dominant(frequencies: dict[Gene, int], config: EvolutionConfig) -> bool:
    needed = config.dominance_threshold * config.population - 1e-9
    return max(frequencies.values()) >= needed


def _plurality(frequencies: dict[Gene, int], config: EvolutionConfig) -> Gene:
    # ties resolve to the earliest gene in config order
    return max(config.genes, key=lambda gene: frequencies[gene])


def run_evolution(
    config: EvolutionConfig,
    on_generation: Callable[[GenerationOutcome], None] | None = None,
) -> EvolutionResult:
    """Iterate generations until dominance or the generation cap.

    Dominance is checked on the initial population and after every
    selection step. Deterministic given ``config.master_seed``.
    """
    config.validate()
    population = initial_population(config, rng_for(config.master_seed, 0))
    history: list[GenerationStats] = []
    frequencies = gene_frequencies(population, config)
    if _dominant(frequencies, config):
        return EvolutionResult(
            winner=_plurality(frequencies, config),
            terminated_by="threshold",
            generations_run=0,
            history=history,
            final_frequencies=frequencies,
        )
    terminated_by = "max_generations"
    for generation in range(1, config.max_generations + 1):
        outcome = run_generation(
            population, config, rng_for(config.master_seed, 1, generation), generation
        )
        history.append(outcome.stats)
        if on_generation is not None:
            on_generation(outcome)
        population = outcome.population
        frequencies = gene_frequencies(population, config)
        if _dominant(frequencies, config):
            terminated_by = "threshold"
            break
    return EvolutionResult(
        winner=_plurality(frequencies, config),
        terminated_by=terminated_by,
        generations_run=len(history),
        history=history,
        final_frequencies=frequencies,
    )


# ---------------------------------------------------------------------------
# Batch runs.
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    run: int
    winner: Gene
    terminated_by: str
    generations: int
    final_welfare_efficiency: float  # nan when no generation was played


@dataclass
class BatchRunsSummary:
    """Winner frequencies and aggregates over independent seeded runs."""

    winners: dict[Gene, int]
    threshold_reached: int
    average_generations: float
    mean_final_welfare_efficiency: float
    runs: list[RunRecord]


def batch_runs(
    config: EvolutionConfig, run_count: int, threads: int = 1
) -> BatchRunsSummary:
    """Independent seeded runs; the summary mirrors one results-table column."""
    if run_count < 1:
        raise ValueError(f"run_count must be >= 1, got {run_count}")
    config.validate()

    def one(run: int) -> RunRecord:
        result = run_evolution(
            replace(config, master_seed=derive_seed(config.master_seed, run))
        )
        final_eff = (
            result.history[-1].welfare_efficiency if result.history else float("nan")
        )
        return RunRecord(
            run=run,
            winner=result.winner,
            terminated_by=result.terminated_by,
            generations=result.generations_run,
            final_welfare_efficiency=final_eff,
        )

    records = parallel_map(one, range(run_count), threads)
    winner_counts = Counter(rec.winner for rec in records)
    effs = [
        rec.final_welfare_efficiency
        for rec in records
        if not np.isnan(rec.final_welfare_efficiency)
    ]
    return BatchRunsSummary(
        winners={gene: winner_counts.get(gene, 0) for gene in config.genes},
        threshold_reached=sum(1 for rec in records if rec.terminated_by == "threshold"),
        average_generations=float(np.mean([rec.generations for rec in records])),
        mean_final_welfare_efficiency=float(np.mean(effs)) if effs else float("nan"),
        runs=records,
    )


# ---------------------------------------------------------------------------
# Serialization.
# ---------------------------------------------------------------------------


def write_generations_csv(history: Sequence[GenerationStats], path: str | Path) -> None:
    """One row per (generation, gene): the gene-frequency trajectory."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "gene", "frequency", "mean_welfare", "welfare_efficiency"])
        for stats in history:
            for gene, freq in stats.gene_frequencies.items():
                writer.writerow([
                    stats.generation, gene.label, freq,
                    repr(stats.mean_welfare), repr(stats.welfare_efficiency),
                ])


def write_summary_csv(summary: BatchRunsSummary, path: str | Path) -> None:
    """Winner counts per gene plus the aggregate footer rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "value"])
        for gene, wins in summary.winners.items():
            writer.writerow([gene.label, wins])
        writer.writerow(["threshold_reached", summary.threshold_reached])
        writer.writerow(["average_generations", repr(summary.average_generations)])
        writer.writerow([
            "mean_final_welfare_efficiency",
            repr(summary.mean_final_welfare_efficiency),
        ])


def summary_to_dict(summary: BatchRunsSummary) -> dict:
    return {
        "winners": [
            {"pool_tag": gene.pool_tag, "attitude": gene.attitude.value, "wins": wins}
            for gene, wins in summary.winners.items()
        ],
        "threshold_reached": summary.threshold_reached,
        "average_generations": summary.average_generations,
        "mean_final_welfare_efficiency": summary.mean_final_welfare_efficiency,
        "runs": [
            {
                "run": rec.run,
                "winner": rec.winner.label,
                "terminated_by": rec.terminated_by,
                "generations": rec.generations,
                "final_welfare_efficiency": rec.final_welfare_efficiency,
            }
            for rec in summary.runs
        ],
    }


def write_summary_json(summary: BatchRunsSummary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary_to_dict(summary), indent=2) + "\n")
