"""Policy head on top of the pooled message, and the stateful agent wrapper.

The head is a two-layer tanh MLP::

    action = tanh(W2^T tanh(W1^T msg + b1) + b2)

with ``W1`` of shape (d_msg, hidden) and ``W2`` of shape (hidden, d_action),
flattened in the order W1 (row-major), b1, W2 (row-major), b2.  A full agent
genome is the layer parameters followed by the head parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import pi_layer
from .numerics import ShapeError
from .pi_layer import LayerConfig, LayerParams


@dataclass(frozen=True)
class AgentConfig:
    layer: LayerConfig = field(default_factory=LayerConfig)
    hidden: int = 16

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError("hidden width must be at least 1")

    @property
    def policy_size(self) -> int:
        return policy_param_count(self.layer.d_msg, self.hidden, self.layer.d_action)

    @property
    def genome_size(self) -> int:
        return pi_layer.param_count(self.layer) + self.policy_size


def policy_param_count(d_msg: int, hidden: int, d_action: int) -> int:
    return d_msg * hidden + hidden + hidden * d_action + d_action


@dataclass(frozen=True, eq=False)
class PolicyParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        w1, b1, w2, b2 = (np.array(v, dtype=np.float64) for v in (self.w1, self.b1, self.w2, self.b2))
        if w1.ndim != 2 or w2.ndim != 2 or b1.shape != (w1.shape[1],) or w2.shape[0] != w1.shape[1] or b2.shape != (w2.shape[1],):
            raise ShapeError(
                f"inconsistent policy shapes: W1 {w1.shape}, b1 {b1.shape}, W2 {w2.shape}, b2 {b2.shape}"
            )
        for name, v in zip(("w1", "b1", "w2", "b2"), (w1, b1, w2, b2)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def from_flat(cls, flat, d_msg: int, hidden: int, d_action: int) -> "PolicyParams":
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        expected = policy_param_count(d_msg, hidden, d_action)
        if flat.size != expected:
            raise ShapeError(f"policy expects {expected} parameters, got {flat.size}")
        i = 0
        w1 = flat[i : i + d_msg * hidden].reshape(d_msg, hidden)
        i += d_msg * hidden
        b1 = flat[i : i + hidden]
        i += hidden
        w2 = flat[i : i + hidden * d_action].reshape(hidden, d_action)
        i += hidden * d_action
        return cls(w1, b1, w2, flat[i:])

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])


def policy_forward_batch(d_msg: int, hidden: int, d_action: int, thetas, msgs) -> np.ndarray:
    """Actions ``(B, d_action)`` for stacked head parameters and messages."""
    thetas = np.asarray(thetas, dtype=np.float64)
    msgs = np.asarray(msgs, dtype=np.float64)
    if msgs.ndim != 2 or msgs.shape[1] != d_msg or thetas.shape != (msgs.shape[0], policy_param_count(d_msg, hidden, d_action)):
        raise ShapeError(f"policy batch shape mismatch: thetas {thetas.shape}, messages {msgs.shape}")
    i = d_msg * hidden
    w1 = thetas[:, :i].reshape(-1, d_msg, hidden)
    b1 = thetas[:, i : i + hidden]
    i += hidden
    w2 = thetas[:, i : i + hidden * d_action].reshape(-1, hidden, d_action)
    b2 = thetas[:, i + hidden * d_action :]
    h = np.tanh((msgs[:, :, None] * w1).sum(axis=1) + b1)
    return np.tanh((h[:, :, None] * w2).sum(axis=1) + b2)


def policy_forward(p: PolicyParams, msg) -> np.ndarray:
    msg = np.asarray(msg, dtype=np.float64).reshape(-1)
    d_msg, hidden = p.w1.shape
    if msg.size != d_msg:
        raise ShapeError(f"policy expects a message of length {d_msg}, got {msg.size}")
    return policy_forward_batch(d_msg, hidden, p.w2.shape[1], p.flatten()[None, :], msg[None, :])[0]


def agent_forward_batch(config: AgentConfig, genomes, obs, prev) -> np.ndarray:
    """Batched layer + head: genomes ``(B, G)`` -> actions ``(B, d_action)``."""
    genomes = np.asarray(genomes, dtype=np.float64)
    n_layer = pi_layer.param_count(config.layer)
    msgs = pi_layer.forward_batch(config.layer, genomes[:, :n_layer], obs, prev)
    return policy_forward_batch(
        config.layer.d_msg, config.hidden, config.layer.d_action, genomes[:, n_layer:], msgs
    )


@dataclass(frozen=True, eq=False)
class Agent:
    layer: LayerParams
    policy: PolicyParams
    prev_action: np.ndarray

    @classmethod
    def from_genome(cls, config: AgentConfig, genome) -> "Agent":
        genome = np.asarray(genome, dtype=np.float64).reshape(-1)
        if genome.size != config.genome_size:
            raise ShapeError(f"agent expects a genome of {config.genome_size} values, got {genome.size}")
        n_layer = pi_layer.param_count(config.layer)
        layer = LayerParams(config.layer, genome[:n_layer])
        head = PolicyParams.from_flat(genome[n_layer:], config.layer.d_msg, config.hidden, config.layer.d_action)
        return cls(layer, head, np.zeros(config.layer.d_action))

    def genome(self) -> np.ndarray:
        return np.concatenate([self.layer.theta, self.policy.flatten()])


def agent_act(agent: Agent, obs) -> tuple[np.ndarray, Agent]:
    msg = pi_layer.layer_forward(agent.layer, obs, agent.prev_action)
    action = policy_forward(agent.policy, msg)
    return action, replace(agent, prev_action=action)
