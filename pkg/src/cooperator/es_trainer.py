"""Isotropic evolution strategies with antithetic sampling and rank shaping.

One iteration (generation) draws ``population / 2`` Gaussian directions, each
from its own seed ``mix_seed(key, iteration, j)``, evaluates the mirrored
pairs ``center + sigma * eps_j`` (candidate ``2j``) and ``center - sigma * eps_j``
(candidate ``2j + 1``), and moves the center along the rank-weighted sum of
directions.  Every candidate in a generation is scored with the same
evaluation seed.  The update is reduced in candidate order, so the result
does not depend on how or where the candidates were evaluated.

``fitness_fn`` is any callable ``(genome, seed) -> float``.  If it also has an
``evaluate_many(genomes, seed, workers)`` method, that is used instead so a
whole population can be simulated in one vectorised pass.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .numerics import RngState, mix_seed, rng_gaussian_array

FitnessFn = Callable[[np.ndarray, int], float]

# keeps generation evaluation seeds apart from perturbation seeds
_EVAL_STREAM = 1 << 63


@dataclass(frozen=True)
class EsConfig:
    population: int = 64
    sigma: float = 0.1
    learning_rate: float = 0.05
    iterations: int = 100
    episodes_per_eval: int = 2
    base_seed: int = 1

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ValueError(f"population must be even and at least 2, got {self.population}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.episodes_per_eval < 1:
            raise ValueError("episodes_per_eval must be at least 1")


@dataclass(frozen=True)
class GenerationRecord:
    iteration: int
    best: float
    mean: float
    std: float


@dataclass(frozen=True, eq=False)
class EsState:
    center: np.ndarray
    iteration: int = 0
    rng: RngState = field(default_factory=lambda: RngState.from_seed(0))
    history: tuple[GenerationRecord, ...] = ()

    @classmethod
    def initial(cls, center, config: EsConfig) -> "EsState":
        c = np.array(center, dtype=np.float64).reshape(-1)
        c.setflags(write=False)
        return cls(center=c, iteration=0, rng=RngState.from_seed(config.base_seed))


def rank_shape(fitnesses) -> np.ndarray:
    """Centered ranks in [-0.5, 0.5]; ties go to the lower index first."""
    f = np.asarray(fitnesses, dtype=np.float64)
    n = f.size
    if n < 2:
        raise ValueError("rank shaping needs at least two fitness values")
    if np.isnan(f).any():
        raise ValueError("fitness values must not be NaN")
    ranks = np.empty(n)
    ranks[np.argsort(f, kind="stable")] = np.arange(n)
    return ranks / (n - 1) - 0.5


def perturbation(state: EsState, j: int) -> np.ndarray:
    seed = mix_seed(state.rng.key, state.iteration, j)
    eps, _ = rng_gaussian_array(RngState.from_seed(seed), state.center.size)
    return eps


def generation_seed(state: EsState) -> int:
    return mix_seed(state.rng.key, state.iteration, _EVAL_STREAM)


def population(state: EsState, config: EsConfig) -> tuple[np.ndarray, list[np.ndarray]]:
    """Candidate genomes ``(population, G)`` and the directions behind them."""
    eps = [perturbation(state, j) for j in range(config.population // 2)]
    genomes = np.empty((config.population, state.center.size))
    for j, e in enumerate(eps):
        genomes[2 * j] = state.center + config.sigma * e
        genomes[2 * j + 1] = state.center - config.sigma * e
    return genomes, eps


def _evaluate(fitness_fn, genomes: np.ndarray, seed: int, workers: int) -> np.ndarray:
    many = getattr(fitness_fn, "evaluate_many", None)
    if many is not None:
        scores = many(genomes, seed, workers=workers)
    elif workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            scores = list(pool.map(lambda g: fitness_fn(g, seed), genomes))
    else:
        scores = [fitness_fn(g, seed) for g in genomes]
    scores = np.asarray(scores, dtype=np.float64)
    # crashed or invalid rollouts rank last instead of poisoning the update
    return np.where(np.isfinite(scores), scores, -math.inf)


def summarize(iteration: int, fitnesses: np.ndarray) -> GenerationRecord:
    finite = fitnesses[np.isfinite(fitnesses)]
    if finite.size == 0:
        return GenerationRecord(iteration, -math.inf, -math.inf, 0.0)
    return GenerationRecord(iteration, float(fitnesses.max()), float(finite.mean()), float(finite.std()))


def evaluate_generation(state: EsState, config: EsConfig, fitness_fn, workers: int = 1):
    """Score the population around the current center without updating it.

    Returns ``(record, fitnesses, directions)``.
    """
    genomes, eps = population(state, config)
    fitnesses = _evaluate(fitness_fn, genomes, generation_seed(state), workers)
    return summarize(state.iteration, fitnesses), fitnesses, eps


def es_step(state: EsState, config: EsConfig, fitness_fn, workers: int = 1) -> EsState:
    record, fitnesses, eps = evaluate_generation(state, config, fitness_fn, workers)
    weights = rank_shape(fitnesses)
    step = np.zeros_like(state.center)
    for j, e in enumerate(eps):
        step += (weights[2 * j] - weights[2 * j + 1]) * e
    center = state.center + (config.learning_rate / (config.population * config.sigma)) * step
    center.setflags(write=False)
    return replace(
        state,
        center=center,
        iteration=state.iteration + 1,
        history=state.history + (record,),
    )
