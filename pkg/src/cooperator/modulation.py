"""Modulatory transfer functions combining a receptive-field drive with context.

All functions are elementwise and accept Python floats or numpy arrays.

``cooperation_preact`` is the context-led rule ``R^2 + 2R + 2C(1 + |R|)``,
rectified by ``modulate``.  The four reference rules TM1-TM4 are led by the
drive ``R`` and are returned without any outer nonlinearity.
"""

from __future__ import annotations

import enum

import numpy as np

# |r*c| above this overflows exp / exp2 in float64
EXPONENT_CLAMP = 500.0


class ModulationKind(enum.Enum):
    COOPERATION = "cooperation"
    TM1 = "tm1"
    TM2 = "tm2"
    TM3 = "tm3"
    TM4 = "tm4"

    @classmethod
    def parse(cls, name: str) -> "ModulationKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown modulation {name!r} (choose from {choices})") from None


def cooperation_preact(r, c):
    return r * r + 2.0 * r + 2.0 * c * (1.0 + np.abs(r))


def tm1(r, c):
    rc = np.clip(r * c, -EXPONENT_CLAMP, EXPONENT_CLAMP)
    return r * (0.5 * (1.0 + np.exp(rc)))


def tm2(r, c):
    return r + r * c


def tm3(r, c):
    return r * (1.0 + np.tanh(r * c))


def tm4(r, c):
    rc = np.clip(r * c, -EXPONENT_CLAMP, EXPONENT_CLAMP)
    return r * np.exp2(rc)


def modulate(kind: ModulationKind, r, c):
    """Apply the transfer function ``kind`` to drive ``r`` and context ``c``.

    Scalars in, Python float out; arrays in, array out.
    """
    if kind is ModulationKind.COOPERATION:
        out = np.maximum(cooperation_preact(r, c), 0.0)
    elif kind is ModulationKind.TM1:
        out = tm1(r, c)
    elif kind is ModulationKind.TM2:
        out = tm2(r, c)
    elif kind is ModulationKind.TM3:
        out = tm3(r, c)
    elif kind is ModulationKind.TM4:
        out = tm4(r, c)
    else:
        raise ValueError(f"unknown modulation {kind!r}")
    if np.ndim(out) == 0:
        return float(out)
    return out
