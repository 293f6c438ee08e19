"""Checkpoint files: a text header for people, a binary payload for exactness.

Layout::

    COOPCKPT1\\n
    key=value;key=value;...\\n
    <genome as little-endian float64>

Floats in the header are written with ``repr`` so they survive a round trip.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..es_trainer import EsConfig
from ..modulation import ModulationKind
from ..pi_layer import ContextMixing, LayerConfig, LayerKind
from ..policy import AgentConfig

MAGIC = b"COOPCKPT1\n"
FIELDS = (
    "layer",
    "modulation",
    "mixing",
    "n_components",
    "d_msg",
    "d_action",
    "hidden",
    "population",
    "sigma",
    "learning_rate",
    "iterations",
    "episodes",
    "seed",
    "iteration",
    "genome_len",
)


class CheckpointError(Exception):
    """Base class for unreadable checkpoints."""


class BadMagicError(CheckpointError):
    pass


class TruncatedPayloadError(CheckpointError):
    pass


class LengthMismatchError(CheckpointError):
    pass


class HeaderFieldError(CheckpointError):
    def __init__(self, field: str, problem: str):
        super().__init__(f"checkpoint header field {field!r}: {problem}")
        self.field = field


@dataclass(frozen=True, eq=False)
class Checkpoint:
    agent: AgentConfig
    es: EsConfig
    iteration: int
    genome: np.ndarray

    def header(self) -> dict[str, str]:
        layer = self.agent.layer
        return {
            "layer": layer.layer_kind.value,
            "modulation": layer.modulation.value,
            "mixing": layer.context_mixing.value,
            "n_components": str(layer.n_components),
            "d_msg": str(layer.d_msg),
            "d_action": str(layer.d_action),
            "hidden": str(self.agent.hidden),
            "population": str(self.es.population),
            "sigma": repr(float(self.es.sigma)),
            "learning_rate": repr(float(self.es.learning_rate)),
            "iterations": str(self.es.iterations),
            "episodes": str(self.es.episodes_per_eval),
            "seed": str(self.es.base_seed),
            "iteration": str(self.iteration),
            "genome_len": str(np.asarray(self.genome).size),
        }


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    genome = np.asarray(ckpt.genome, dtype="<f8").reshape(-1)
    if genome.size != ckpt.agent.genome_size:
        raise LengthMismatchError(
            f"genome has {genome.size} values but the agent config needs {ckpt.agent.genome_size}"
        )
    header = ";".join(f"{k}={v}" for k, v in ckpt.header().items())
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(header.encode("ascii") + b"\n")
        f.write(genome.tobytes())
    os.replace(tmp, path)


def _parse_header(line: bytes) -> dict[str, str]:
    try:
        text = line.decode("ascii")
    except UnicodeDecodeError:
        raise HeaderFieldError("header", "not ASCII text") from None
    fields = {}
    for item in text.split(";"):
        key, sep, value = item.partition("=")
        if not sep:
            raise HeaderFieldError(key or "header", "expected key=value")
        fields[key] = value
    for key in FIELDS:
        if key not in fields:
            raise HeaderFieldError(key, "missing")
    return fields


def _field(fields, key, convert):
    try:
        return convert(fields[key])
    except ValueError as exc:
        raise HeaderFieldError(key, f"invalid value {fields[key]!r} ({exc})") from None


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise BadMagicError(f"{path} is not a checkpoint (bad magic bytes)")
    end = data.find(b"\n", len(MAGIC))
    if end < 0:
        raise HeaderFieldError("header", "no terminating newline")
    fields = _parse_header(data[len(MAGIC) : end])
    payload = data[end + 1 :]

    def positive(v):
        n = int(v)
        if n < 1:
            raise ValueError("must be positive")
        return n

    def even(v):
        n = positive(v)
        if n % 2:
            raise ValueError("must be even")
        return n

    def non_negative(v):
        n = int(v)
        if n < 0:
            raise ValueError("must be non-negative")
        return n

    def positive_float(v):
        x = float(v)
        if not x > 0:
            raise ValueError("must be positive")
        return x

    def non_negative_float(v):
        x = float(v)
        if not x >= 0:
            raise ValueError("must be non-negative")
        return x

    layer = LayerConfig(
        n_components=_field(fields, "n_components", positive),
        d_msg=_field(fields, "d_msg", even),
        d_action=_field(fields, "d_action", non_negative),
        layer_kind=_field(fields, "layer", LayerKind),
        modulation=_field(fields, "modulation", ModulationKind),
        context_mixing=_field(fields, "mixing", ContextMixing),
    )
    agent = AgentConfig(layer=layer, hidden=_field(fields, "hidden", positive))
    es = EsConfig(
        population=_field(fields, "population", even),
        sigma=_field(fields, "sigma", positive_float),
        learning_rate=_field(fields, "learning_rate", non_negative_float),
        iterations=_field(fields, "iterations", non_negative),
        episodes_per_eval=_field(fields, "episodes", positive),
        base_seed=_field(fields, "seed", int),
    )
    iteration = _field(fields, "iteration", non_negative)
    genome_len = _field(fields, "genome_len", int)
    if genome_len != agent.genome_size:
        raise HeaderFieldError(
            "genome_len", f"header says {genome_len} but the stated dims need {agent.genome_size}"
        )
    if len(payload) % 8:
        raise TruncatedPayloadError(f"payload of {len(payload)} bytes is not a whole number of float64 values")
    if len(payload) // 8 != genome_len:
        raise LengthMismatchError(f"header promises {genome_len} values, payload holds {len(payload) // 8}")
    genome = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return Checkpoint(agent=agent, es=es, iteration=iteration, genome=genome)
