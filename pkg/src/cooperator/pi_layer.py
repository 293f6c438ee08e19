"""Permutation-invariant sensory layers: Cooperator and attention baseline.

Each of the N observation components is seen by its own copy of a small
shared encoder.  The encoders produce two N x d_msg matrices:

* Cooperator: the drive ``R = tanh(W_R [o_i; a] + b_R)`` and the distal
  opinions ``D = tanh(W_D o_i + b_D)``.  Context is ``C = R + mix(D) + U`` where
  ``U`` is the position-0 sinusoidal row broadcast to every component, and each
  element is passed through a modulatory transfer function.  The message is the
  column mean over components.
* Transformer: keys ``K = tanh(W_K [o_i; a] + b_K)`` and values
  ``V = tanh(W_V o_i + b_V)`` with a fixed sinusoidal query; the message is
  ``tanh(softmax(q K^T / sqrt(d)) V)``.

Both kinds share one flat parameter layout, so their parameter counts are
equal by construction::

    W_in  (d_msg x (1 + d_action), row-major)   W_R or W_K
    b_in  (d_msg)                               b_R or b_K
    W_ctx (d_msg x 1)                           W_D or W_V
    b_ctx (d_msg)                               b_D or b_V

Every sum over components is taken over values sorted along the component
axis.  This makes the layer invariant to observation order bit-for-bit, not
just up to rounding, which matters because rollouts are chaotic.

Functions with a ``_batch`` suffix take stacked parameters ``(B, P)`` and
observations ``(B, N)`` and are what the rollout engine uses; the unbatched
functions are thin wrappers for a single agent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .modulation import ModulationKind, modulate
from .numerics import ShapeError, positional_row


class LayerKind(enum.Enum):
    COOPERATOR = "cooperator"
    TRANSFORMER = "transformer"


class ContextMixing(enum.Enum):
    ROWWISE = "rowwise"
    NEIGHBOR_MEAN = "neighbor_mean"


@dataclass(frozen=True)
class LayerConfig:
    n_components: int = 5
    d_msg: int = 32
    d_action: int = 1
    layer_kind: LayerKind = LayerKind.COOPERATOR
    modulation: ModulationKind = ModulationKind.COOPERATION
    context_mixing: ContextMixing = ContextMixing.NEIGHBOR_MEAN

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be at least 1")
        if self.d_msg < 2 or self.d_msg % 2:
            raise ValueError(f"d_msg must be a positive even number, got {self.d_msg}")
        if self.d_action < 0:
            raise ValueError("d_action must be non-negative")

    @property
    def label(self) -> str:
        if self.layer_kind is LayerKind.TRANSFORMER:
            return "transformer"
        return f"cooperator/{self.modulation.value}"


def param_count(config: LayerConfig) -> int:
    d, a = config.d_msg, config.d_action
    return d * (1 + a) + d + d * 1 + d


def _slices(config: LayerConfig):
    d, a = config.d_msg, config.d_action
    sizes = [d * (1 + a), d, d, d]
    bounds = np.cumsum([0] + sizes)
    return [slice(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]


@dataclass(frozen=True, eq=False)
class LayerParams:
    config: LayerConfig
    theta: np.ndarray = field(repr=False)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64).reshape(-1)
        if theta.size != param_count(self.config):
            raise ShapeError(
                f"layer expects {param_count(self.config)} parameters, got {theta.size}"
            )
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def w_in(self) -> np.ndarray:
        s = _slices(self.config)[0]
        return self.theta[s].reshape(self.config.d_msg, 1 + self.config.d_action)

    @property
    def b_in(self) -> np.ndarray:
        return self.theta[_slices(self.config)[1]]

    @property
    def w_ctx(self) -> np.ndarray:
        return self.theta[_slices(self.config)[2]].reshape(self.config.d_msg, 1)

    @property
    def b_ctx(self) -> np.ndarray:
        return self.theta[_slices(self.config)[3]]


def flatten_params(params: LayerParams) -> np.ndarray:
    return params.theta.copy()


def load_params(config: LayerConfig, flat) -> LayerParams:
    return LayerParams(config, flat)


def random_params(config: LayerConfig, rng: np.random.Generator, scale: float = 1.0) -> LayerParams:
    return LayerParams(config, scale * rng.standard_normal(param_count(config)))


# ---------------------------------------------------------------------------
# batched core


def _symmetric_sum(x: np.ndarray, axis: int) -> np.ndarray:
    """Sum that is bit-identical under any reordering along ``axis``."""
    return np.sort(x, axis=axis).sum(axis=axis)


def _check_inputs(config: LayerConfig, thetas, obs, prev):
    thetas = np.asarray(thetas, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    prev = np.asarray(prev, dtype=np.float64)
    if thetas.ndim != 2 or thetas.shape[1] != param_count(config):
        raise ShapeError(f"thetas must be (B, {param_count(config)}), got {thetas.shape}")
    batch = thetas.shape[0]
    if obs.shape != (batch, config.n_components):
        raise ShapeError(f"obs must be ({batch}, {config.n_components}), got {obs.shape}")
    if prev.shape != (batch, config.d_action):
        raise ShapeError(f"prev_action must be ({batch}, {config.d_action}), got {prev.shape}")
    return thetas, obs, prev


def encode_batch(config: LayerConfig, thetas, obs, prev):
    """Per-component encoders; returns the two ``(B, N, d_msg)`` matrices."""
    thetas, obs, prev = _check_inputs(config, thetas, obs, prev)
    d, a = config.d_msg, config.d_action
    s_win, s_bin, s_wctx, s_bctx = _slices(config)
    w_in = thetas[:, s_win].reshape(-1, d, 1 + a)
    b_in = thetas[:, s_bin]
    w_ctx = thetas[:, s_wctx]
    b_ctx = thetas[:, s_bctx]

    # the action term is common to every component
    act = np.zeros_like(b_in)
    for j in range(a):
        act = act + w_in[:, :, 1 + j] * prev[:, j : j + 1]
    o = obs[:, :, None]
    drive = np.tanh((w_in[:, None, :, 0] * o + act[:, None, :]) + b_in[:, None, :])
    ctx = np.tanh(w_ctx[:, None, :] * o + b_ctx[:, None, :])
    return drive, ctx


def context_batch(config: LayerConfig, r: np.ndarray, d: np.ndarray) -> np.ndarray:
    if r.shape != d.shape or r.ndim != 3 or r.shape[1:] != (config.n_components, config.d_msg):
        raise ShapeError(f"R and D must both be (B, N, d_msg), got {r.shape} and {d.shape}")
    n = config.n_components
    if config.context_mixing is ContextMixing.ROWWISE:
        distal = d
    elif n == 1:
        distal = np.zeros_like(d)
    else:
        total = _symmetric_sum(d, axis=1)[:, None, :]
        distal = (total - d) / (n - 1)
    universal = positional_row(config.d_msg, 0)
    return (r + distal) + universal


def cooperator_rows_batch(config: LayerConfig, thetas, obs, prev) -> np.ndarray:
    """Modulated outputs before pooling, ``(B, N, d_msg)``."""
    r, d = encode_batch(config, thetas, obs, prev)
    c = context_batch(config, r, d)
    return modulate(config.modulation, r, c)


def attention_weights_batch(config: LayerConfig, thetas, obs, prev) -> tuple[np.ndarray, np.ndarray]:
    """Softmax weights over components ``(B, N)`` and the values ``(B, N, d_msg)``."""
    k, v = encode_batch(config, thetas, obs, prev)
    q = positional_row(config.d_msg, 0)
    scores = (k * q).sum(axis=2) / math.sqrt(config.d_msg)
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    w = e / _symmetric_sum(e, axis=1)[:, None]
    return w, v


def forward_batch(config: LayerConfig, thetas, obs, prev) -> np.ndarray:
    """Pooled messages ``(B, d_msg)``."""
    if config.layer_kind is LayerKind.COOPERATOR:
        m = cooperator_rows_batch(config, thetas, obs, prev)
        return _symmetric_sum(m, axis=1) / config.n_components
    w, v = attention_weights_batch(config, thetas, obs, prev)
    return np.tanh(_symmetric_sum(w[:, :, None] * v, axis=1))


# ---------------------------------------------------------------------------
# single-agent wrappers


def _single(params: LayerParams, obs, prev_action):
    cfg = params.config
    obs = np.asarray(obs, dtype=np.float64).reshape(-1)
    if prev_action is None:
        prev_action = np.zeros(cfg.d_action)
    prev = np.asarray(prev_action, dtype=np.float64).reshape(-1)
    if obs.size != cfg.n_components:
        raise ShapeError(f"expected {cfg.n_components} observation components, got {obs.size}")
    if prev.size != cfg.d_action:
        raise ShapeError(f"expected previous action of length {cfg.d_action}, got {prev.size}")
    return params.theta[None, :], obs[None, :], prev[None, :]


def encode_rd(params: LayerParams, obs, prev_action=None) -> tuple[np.ndarray, np.ndarray]:
    r, d = encode_batch(params.config, *_single(params, obs, prev_action))
    return r[0], d[0]


def build_context(r, d, config: LayerConfig) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    return context_batch(config, r[None], d[None])[0]


def message_rows(params: LayerParams, obs, prev_action=None) -> np.ndarray:
    """Cooperator outputs per component before pooling, ``(N, d_msg)``."""
    if params.config.layer_kind is not LayerKind.COOPERATOR:
        raise ValueError("message_rows is defined for the cooperator layer only")
    return cooperator_rows_batch(params.config, *_single(params, obs, prev_action))[0]


def attention_weights(params: LayerParams, obs, prev_action=None) -> np.ndarray:
    if params.config.layer_kind is not LayerKind.TRANSFORMER:
        raise ValueError("attention_weights is defined for the transformer layer only")
    w, _ = attention_weights_batch(params.config, *_single(params, obs, prev_action))
    return w[0]


def layer_forward(params: LayerParams, obs, prev_action=None) -> np.ndarray:
    return forward_batch(params.config, *_single(params, obs, prev_action))[0]


# ---------------------------------------------------------------------------
# naive oracle


def reference_forward(params: LayerParams, obs, prev_action=None) -> np.ndarray:
    """Scalar-loop re-implementation of :func:`layer_forward`.

    Shares nothing with the vectorised path beyond the parameter layout, and
    is meant only for cross-checking it.
    """
    cfg = params.config
    n, d, a = cfg.n_components, cfg.d_msg, cfg.d_action
    theta = [float(t) for t in params.theta]
    o = [float(v) for v in np.asarray(obs).reshape(-1)]
    prev = [0.0] * a if prev_action is None else [float(v) for v in np.asarray(prev_action).reshape(-1)]
    if len(o) != n or len(prev) != a:
        raise ShapeError("observation or previous action has the wrong length")

    stride = 1 + a
    off_bin = d * stride
    off_wctx = off_bin + d
    off_bctx = off_wctx + d

    first = [[0.0] * d for _ in range(n)]
    second = [[0.0] * d for _ in range(n)]
    for i in range(n):
        for k in range(d):
            acc = theta[k * stride] * o[i]
            for j in range(a):
                acc += theta[k * stride + 1 + j] * prev[j]
            first[i][k] = math.tanh(acc + theta[off_bin + k])
            second[i][k] = math.tanh(theta[off_wctx + k] * o[i] + theta[off_bctx + k])

    pos = [0.0] * d
    for k in range(0, d, 2):
        pos[k] = math.sin(0.0 / 10000.0 ** (k / d))
        pos[k + 1] = math.cos(0.0 / 10000.0 ** (k / d))

    out = [0.0] * d
    if cfg.layer_kind is LayerKind.COOPERATOR:
        kind = cfg.modulation
        for i in range(n):
            for k in range(d):
                if cfg.context_mixing is ContextMixing.ROWWISE:
                    dist = second[i][k]
                elif n == 1:
                    dist = 0.0
                else:
                    dist = sum(second[j][k] for j in range(n) if j != i) / (n - 1)
                r = first[i][k]
                c = r + dist + pos[k]
                if kind is ModulationKind.COOPERATION:
                    m = max(0.0, r * r + 2 * r + 2 * c * (1 + abs(r)))
                elif kind is ModulationKind.TM1:
                    m = 0.5 * r * (1 + math.exp(min(500.0, max(-500.0, r * c))))
                elif kind is ModulationKind.TM2:
                    m = r + r * c
                elif kind is ModulationKind.TM3:
                    m = r * (1 + math.tanh(r * c))
                else:
                    m = r * 2.0 ** min(500.0, max(-500.0, r * c))
                out[k] += m / n
        return np.array(out)

    scores = []
    for i in range(n):
        s = 0.0
        for k in range(d):
            s += pos[k] * first[i][k]
        scores.append(s / math.sqrt(d))
    top = max(scores)
    weights = [math.exp(s - top) for s in scores]
    z = sum(weights)
    for k in range(d):
        acc = 0.0
        for i in range(n):
            acc += weights[i] / z * second[i][k]
        out[k] = math.tanh(acc)
    return np.array(out)
