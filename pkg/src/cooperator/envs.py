"""Cart-pole swing-up with deterministic, energy-conserving physics.

The pole is a point mass ``m_p`` at distance ``l`` (the pole half-length) from
a frictionless pivot on a cart of mass ``m_c``.  ``theta`` is measured from
upright, so ``theta = pi`` hangs down.  With ``q = (x, theta)`` the
Lagrangian is::

    L = 1/2 (m_c + m_p) x'^2 + m_p l x' theta' cos(theta)
        + 1/2 m_p l^2 theta'^2 - m_p g l cos(theta)

and the conjugate momenta are ``p_x = (m_c + m_p) x' + m_p l cos(theta) theta'``
and ``p_theta = m_p l cos(theta) x' + m_p l^2 theta'``.  The pushing force
only enters ``dp_x/dt``, and ``dp_theta/dt = m_p l sin(theta) (g - x' theta')``.

Integration is semi-implicit (symplectic) Euler on ``(q, p)``: momenta are
advanced first using the new velocities, solved by a fixed number of
fixed-point sweeps, then positions are advanced with those velocities.
Stepping velocities directly is not symplectic here because the mass matrix
depends on ``theta``, and it drifts by tens of percent in energy.

One environment step lasts ``DT`` seconds and is split into ``SUBSTEPS``
substeps.  Reward is ``cos(theta)``.  An episode ends when the cart leaves
``|x| <= X_LIMIT`` or after ``MAX_STEPS`` steps.

Angles are reduced against the float constant ``pi`` before taking sin and
cos, so hanging straight down at ``theta = numpy.pi`` gives exactly
``sin = 0`` and is an exact fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import RngState, mix_seed, rng_permutation, rng_uniform

CART_MASS = 0.5
POLE_MASS = 0.5
POLE_LENGTH = 0.6
GRAVITY = 9.81
FORCE_SCALE = 10.0
DT = 0.01
SUBSTEPS = 2
FIXED_POINT_SWEEPS = 4
X_LIMIT = 2.4
MAX_STEPS = 1000
RESET_NOISE = 0.01
OBS_SIZE = 5

_RESET_STREAM = 0
_PERM_STREAM = 1


class IntegrationError(RuntimeError):
    """The physics produced a non-finite state."""


@dataclass(frozen=True)
class CartPoleState:
    x: float = 0.0
    x_dot: float = 0.0
    theta: float = math.pi
    theta_dot: float = 0.0
    t: int = 0


def sincos(theta):
    """``(sin, cos)`` with the angle first reduced against float ``pi``."""
    theta = np.asarray(theta, dtype=np.float64)
    k = np.rint(theta / np.pi)
    phi = theta - k * np.pi
    sign = 1.0 - 2.0 * np.mod(k, 2.0)
    return sign * np.sin(phi), sign * np.cos(phi)


def _velocities(cos_th, p_x, p_th):
    a = CART_MASS + POLE_MASS
    b = POLE_MASS * POLE_LENGTH * cos_th
    d = POLE_MASS * POLE_LENGTH * POLE_LENGTH
    det = a * d - b * b
    return (d * p_x - b * p_th) / det, (a * p_th - b * p_x) / det


def step_arrays(x, x_dot, theta, theta_dot, force):
    """Advance arrays of cart-pole states by one environment step.

    Non-finite inputs propagate as NaN/inf without warnings; callers check.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        return _step(x, x_dot, theta, theta_dot, force)


def _step(x, x_dot, theta, theta_dot, force):
    ml = POLE_MASS * POLE_LENGTH
    h = DT / SUBSTEPS
    _, c = sincos(theta)
    p_x = (CART_MASS + POLE_MASS) * x_dot + ml * c * theta_dot
    p_th = ml * c * x_dot + ml * POLE_LENGTH * theta_dot
    for _ in range(SUBSTEPS):
        s, c = sincos(theta)
        p_x = p_x + h * force
        p_th_next = p_th
        for _ in range(FIXED_POINT_SWEEPS):
            xd, thd = _velocities(c, p_x, p_th_next)
            p_th_next = p_th + h * ml * s * (GRAVITY - xd * thd)
        p_th = p_th_next
        xd, thd = _velocities(c, p_x, p_th)
        x = x + h * xd
        theta = theta + h * thd
    _, c = sincos(theta)
    x_dot, theta_dot = _velocities(c, p_x, p_th)
    return x, x_dot, theta, theta_dot


def observe_arrays(x, x_dot, theta, theta_dot) -> np.ndarray:
    s, c = sincos(theta)
    return np.stack([x, x_dot, c, s, theta_dot], axis=-1)


def reset_angle(seed: int) -> float:
    u, _ = rng_uniform(RngState.from_seed(mix_seed(seed, _RESET_STREAM)))
    return math.pi + RESET_NOISE * (2.0 * u - 1.0)


def cartpole_reset(seed: int) -> CartPoleState:
    return CartPoleState(x=0.0, x_dot=0.0, theta=reset_angle(seed), theta_dot=0.0, t=0)


def observe(state: CartPoleState) -> np.ndarray:
    return observe_arrays(
        np.array([state.x]), np.array([state.x_dot]), np.array([state.theta]), np.array([state.theta_dot])
    )[0]


def cartpole_step(state: CartPoleState, action: float):
    """One step; returns ``(state', observation, reward, done)``."""
    action = min(1.0, max(-1.0, float(action)))
    arrays = [np.array([v], dtype=np.float64) for v in (state.x, state.x_dot, state.theta, state.theta_dot)]
    x, xd, th, thd = (float(v[0]) for v in step_arrays(*arrays, np.array([FORCE_SCALE * action])))
    if not all(math.isfinite(v) for v in (x, xd, th, thd)):
        raise IntegrationError(f"non-finite cart-pole state at t={state.t + 1}")
    nxt = CartPoleState(x, xd, th, thd, state.t + 1)
    obs = observe(nxt)
    reward = float(obs[2])
    done = abs(x) > X_LIMIT or nxt.t >= MAX_STEPS
    return nxt, obs, reward, done


def total_energy(state: CartPoleState) -> float:
    m, l = POLE_MASS, POLE_LENGTH
    _, c = sincos(state.theta)
    c = float(c)
    return (
        0.5 * (CART_MASS + m) * state.x_dot**2
        + m * state.x_dot * l * state.theta_dot * c
        + 0.5 * m * l * l * state.theta_dot**2
        + m * GRAVITY * l * c
    )


# ---------------------------------------------------------------------------
# observation shuffling


@dataclass(frozen=True)
class PermSpec:
    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"not a permutation: {perm}")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, n: int = OBS_SIZE) -> "PermSpec":
        return cls(tuple(range(n)))

    @classmethod
    def from_seed(cls, seed: int, n: int = OBS_SIZE) -> "PermSpec":
        perm, _ = rng_permutation(RngState.from_seed(mix_seed(seed, _PERM_STREAM)), n)
        return cls(tuple(perm))

    def inverse(self) -> "PermSpec":
        inv = [0] * len(self.perm)
        for i, p in enumerate(self.perm):
            inv[p] = i
        return PermSpec(tuple(inv))


def permute_observation(obs, spec: PermSpec) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != len(spec.perm):
        raise ValueError(f"observation has {obs.shape[-1]} components, permutation has {len(spec.perm)}")
    return obs[..., list(spec.perm)]
