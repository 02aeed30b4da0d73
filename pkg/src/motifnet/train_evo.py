"""Evolutionary search over weight matrices: rank, keep survivors, recombine, mutate."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .dynamics import GeneCircuit, SimConfig, settle
from .targets import LossConfig, TargetSpec, sample_grid, target_values
from .train_gd import Trainer, TrainResult, evaluate


class SizeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EvoConfig:
    population_size: int = 20
    crossover_rate: float = 0.6
    # None means 0.5 / n**2, resolved per circuit size
    mutation_rate: float | None = None
    mutation_std: float = 0.5
    elite_fraction: float = 0.25
    max_generations: int = 5000
    init_std: float = 1.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.mutation_std <= 0 or self.init_std <= 0:
            raise ValueError("mutation_std and init_std must be positive")
        if not 0.0 < self.elite_fraction <= 1.0:
            raise ValueError("elite_fraction must lie in (0, 1]")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")

    def rate_for(self, n: int) -> float:
        return 0.5 / (n * n) if self.mutation_rate is None else self.mutation_rate

    @property
    def n_survivors(self) -> int:
        return max(1, math.ceil(self.elite_fraction * self.population_size))


def init_population(n: int, cfg: EvoConfig, rng: np.random.Generator | None = None) -> list[GeneCircuit]:
    if n < 2:
        raise ValueError("need at least 2 nodes")
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else rng
    draws = rng.normal(0.0, cfg.init_std, size=(cfg.population_size, n, n))
    return [GeneCircuit(w) for w in draws]


def select(population: list, costs, cfg: EvoConfig, distinct: bool = False) -> list:
    """Lowest-cost ``ceil(elite_fraction * population_size)`` individuals, ties by index."""
    costs = np.asarray(costs, dtype=np.float64)
    if len(population) != len(costs):
        raise ValueError("population and costs differ in length")
    order = np.argsort(costs, kind="stable")
    k = min(cfg.n_survivors, len(population))
    if not distinct:
        return [population[i] for i in order[:k]]
    # skip clones of an already chosen survivor, topping up with them only if too few are distinct
    chosen: list[int] = []
    clones: list[int] = []
    for i in order:
        (clones if any(population[i] == population[c] for c in chosen) else chosen).append(int(i))
        if len(chosen) == k:
            break
    return [population[i] for i in (chosen + clones)[:k]]


def crossover(a: GeneCircuit, b: GeneCircuit, cfg: EvoConfig, rng: np.random.Generator) -> GeneCircuit:
    if a.n != b.n:
        raise SizeMismatch(f"cannot cross {a.n}-node and {b.n}-node circuits")
    if rng.random() >= cfg.crossover_rate:
        return a
    mask = rng.random(a.weights.shape) < 0.5
    return GeneCircuit(np.where(mask, a.weights, b.weights))


def mutate(c: GeneCircuit, cfg: EvoConfig, rng: np.random.Generator) -> GeneCircuit:
    rate = cfg.rate_for(c.n)
    if rate == 0.0:
        return c
    hit = rng.random(c.weights.shape) < rate
    if not hit.any():
        return c
    w = np.array(c.weights)
    w[hit] += rng.normal(0.0, cfg.mutation_std, size=int(hit.sum()))
    return GeneCircuit(w)


def population_costs(population: list[GeneCircuit], spec: TargetSpec, sim: SimConfig,
                     loss_cfg: LossConfig) -> tuple[np.ndarray, np.ndarray]:
    """Regularized cost and output MSE of every individual; divergent individuals cost +inf."""
    grid = sample_grid(spec)
    target = target_values(spec, grid)
    stack = np.stack([c.weights for c in population])
    states, _, finite, _ = settle(stack, grid, sim)
    errs = np.mean((states[..., -1] - target) ** 2, axis=-1)
    errs = np.where(finite.all(axis=-1), errs, np.inf)
    costs = errs + loss_cfg.l1_lambda * np.abs(stack).sum(axis=(1, 2)) if loss_cfg.l1_lambda else errs.copy()
    return costs, errs


def evolve(n: int, spec: TargetSpec, sim: SimConfig, cfg: EvoConfig, loss_cfg: LossConfig,
           initial: list[GeneCircuit] | None = None, history: list | None = None) -> TrainResult:
    """Generational search; the elite is carried over unmutated so its cost never rises.

    ``initial`` replaces the random starting population. If ``history`` is a list,
    each generation's population is appended to it.
    """
    if n < 2:
        raise ValueError("need at least 2 nodes")
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.rng_seed)
    population = init_population(n, cfg, rng) if initial is None else list(initial)
    if len(population) != cfg.population_size or any(c.n != n for c in population):
        raise ValueError("initial population does not match population_size / n")

    elite_costs: list[float] = []
    gen = 0
    for gen in range(1, cfg.max_generations + 1):
        if history is not None:
            history.append(list(population))
        costs, errs = population_costs(population, spec, sim, loss_cfg)
        order = np.argsort(costs, kind="stable")
        survivors = select(population, costs, cfg, distinct=True)
        elite = survivors[0]
        elite_costs.append(float(costs[order[0]]))
        if errs[order[0]] <= loss_cfg.success_mse or gen == cfg.max_generations:
            break
        children = list(survivors)
        while len(children) < cfg.population_size:
            i, j = rng.choice(len(survivors), size=2, replace=len(survivors) < 2)
            children.append(crossover(survivors[i], survivors[j], cfg, rng))
        population = [elite] + [mutate(c, cfg, rng) for c in children[1:]]

    circuit = GeneCircuit(elite.weights, {"seed": cfg.rng_seed, "trainer": Trainer.EVOLUTIONARY.value,
                                          "target": spec.label})
    ok, err = evaluate(circuit, spec, sim, loss_cfg)
    return TrainResult(
        circuit=circuit,
        loss_history=elite_costs,
        success=ok,
        iterations_used=gen,
        seed=cfg.rng_seed,
        trainer=Trainer.EVOLUTIONARY,
        wall_ms=int((time.perf_counter() - start) * 1000),
        final_mse=err,
        diverged=not math.isfinite(err),
    )
