"""Vectorised cart-pole rollouts for whole populations of agents.

Episodes run in lockstep as rows of numpy arrays.  Finished rows are dropped
from the working set, and the arithmetic is strictly per row, so a row's
trajectory does not depend on which other rows share its batch.

When the cart leaves the track, the steps it forfeits are scored at the
minimum reward of -1 each.  Without this, ending an episode early is worth
more than hanging still (every hanging step costs -1) and the search rewards
driving off the track instead of swinging up.  Returns stay in [-1000, 1000].

Populations are cut into fixed chunks of ``CHUNK`` candidates.  A worker pool
may run chunks concurrently, but because chunk boundaries never depend on the
worker count, neither do the results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import envs
from .numerics import RngState, mix_seed, rng_gaussian_array
from .policy import AgentConfig, agent_forward_batch

CHUNK = 64
INIT_SCALE = 0.1
_INIT_STREAM = 0x1A17


def episode_seed(eval_seed: int, episode: int) -> int:
    return mix_seed(eval_seed, episode)


def initial_genome(config: AgentConfig, seed: int, scale: float = INIT_SCALE) -> np.ndarray:
    """Gaussian starting point for the ES center."""
    values, _ = rng_gaussian_array(RngState.from_seed(mix_seed(seed, _INIT_STREAM)), config.genome_size)
    return scale * values


def _check_config(config: AgentConfig):
    if config.layer.n_components != envs.OBS_SIZE or config.layer.d_action != 1:
        raise ValueError(
            f"cart-pole agents need n_components={envs.OBS_SIZE} and d_action=1, "
            f"got {config.layer.n_components} and {config.layer.d_action}"
        )


def rollout_batch(config: AgentConfig, genomes, reset_seeds, perms=None, max_steps: int = envs.MAX_STEPS) -> np.ndarray:
    """Episode returns for each row of ``genomes``.

    ``reset_seeds`` seeds each row's initial angle; ``perms`` (``(B, 5)`` index
    array) shuffles each row's observation for the whole episode.  A row whose
    physics turns non-finite scores ``-inf``.
    """
    _check_config(config)
    genomes = np.asarray(genomes, dtype=np.float64)
    b = genomes.shape[0]
    if genomes.ndim != 2 or genomes.shape[1] != config.genome_size:
        raise ValueError(f"genomes must be (B, {config.genome_size}), got {genomes.shape}")
    if len(reset_seeds) != b:
        raise ValueError("need one reset seed per genome")
    if perms is not None:
        perms = np.asarray(perms, dtype=np.intp)
        if perms.shape != (b, envs.OBS_SIZE):
            raise ValueError(f"perms must be ({b}, {envs.OBS_SIZE}), got {perms.shape}")

    x = np.zeros(b)
    x_dot = np.zeros(b)
    theta = np.array([envs.reset_angle(s) for s in reset_seeds], dtype=np.float64)
    theta_dot = np.zeros(b)
    prev = np.zeros((b, 1))
    returns = np.zeros(b)
    crashed = np.zeros(b, dtype=bool)

    live = np.arange(b)
    for t in range(max_steps):
        obs = envs.observe_arrays(x[live], x_dot[live], theta[live], theta_dot[live])
        if perms is not None:
            obs = np.take_along_axis(obs, perms[live], axis=1)
        action = agent_forward_batch(config, genomes[live], obs, prev[live])
        prev[live] = action
        force = envs.FORCE_SCALE * np.clip(action[:, 0], -1.0, 1.0)
        nx, nxd, nth, nthd = envs.step_arrays(x[live], x_dot[live], theta[live], theta_dot[live], force)
        x[live], x_dot[live], theta[live], theta_dot[live] = nx, nxd, nth, nthd

        ok = np.isfinite(nx) & np.isfinite(nxd) & np.isfinite(nth) & np.isfinite(nthd)
        _, cos_th = envs.sincos(np.where(ok, nth, 0.0))
        returns[live] += np.where(ok, cos_th, 0.0)
        crashed[live[~ok]] = True

        out = ok & (np.abs(nx) > envs.X_LIMIT)
        returns[live[out]] -= max_steps - (t + 1)
        done = ~ok | out | (t + 1 >= max_steps)
        live = live[~done]
        if live.size == 0:
            break
    returns[crashed] = -math.inf
    return returns


def episode_plan(eval_seed: int, episodes: int, shuffle: bool):
    """Reset seeds and (optionally) one observation permutation per episode."""
    seeds = [episode_seed(eval_seed, k) for k in range(episodes)]
    perms = None
    if shuffle:
        perms = np.array([envs.PermSpec.from_seed(s).perm for s in seeds], dtype=np.intp)
    return seeds, perms


def episode_returns(genome, config: AgentConfig, eval_seed: int, episodes: int, shuffle: bool = False) -> np.ndarray:
    """Per-episode returns of one agent; evaluation is batched over episodes."""
    seeds, perms = episode_plan(eval_seed, episodes, shuffle)
    genome = np.asarray(genome, dtype=np.float64).reshape(1, -1)
    return rollout_batch(config, np.repeat(genome, episodes, axis=0), seeds, perms)


def evaluate_candidate(genome, config: AgentConfig, eval_seed: int, episodes: int = 2, shuffle: bool = False) -> float:
    """Mean return over ``episodes`` seeded rollouts (``-inf`` if any crashed)."""
    return float(np.mean(episode_returns(genome, config, eval_seed, episodes, shuffle)))


@dataclass(frozen=True)
class CartPoleFitness:
    """ES fitness: mean return over ``episodes`` rollouts per candidate."""

    config: AgentConfig
    episodes: int = 2
    shuffle: bool = False

    def __call__(self, genome, seed: int) -> float:
        return evaluate_candidate(genome, self.config, seed, self.episodes, self.shuffle)

    def _chunk(self, genomes: np.ndarray, seed: int) -> np.ndarray:
        seeds, perms = episode_plan(seed, self.episodes, self.shuffle)
        n = genomes.shape[0]
        rows = np.repeat(genomes, self.episodes, axis=0)
        all_seeds = seeds * n
        all_perms = None if perms is None else np.tile(perms, (n, 1))
        returns = rollout_batch(self.config, rows, all_seeds, all_perms)
        return returns.reshape(n, self.episodes).mean(axis=1)

    def evaluate_many(self, genomes, seed: int, workers: int = 1) -> np.ndarray:
        genomes = np.asarray(genomes, dtype=np.float64)
        chunks = [genomes[i : i + CHUNK] for i in range(0, genomes.shape[0], CHUNK)]
        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(lambda c: self._chunk(c, seed), chunks))
        else:
            parts = [self._chunk(c, seed) for c in chunks]
        return np.concatenate(parts)
