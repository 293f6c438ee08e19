import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cooperator.modulation import ModulationKind, cooperation_preact, modulate

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
REFERENCE_KINDS = [ModulationKind.TM1, ModulationKind.TM2, ModulationKind.TM3, ModulationKind.TM4]


@pytest.mark.parametrize(
    "r, c, expected",
    [(0.0, 1.7, 3.4), (0.0, -0.25, -0.5), (1.0, 0.0, 3.0), (-1.0, 1.0, 3.0)],
)
def test_cooperation_preact_examples(r, c, expected):
    assert cooperation_preact(r, c) == expected


@pytest.mark.parametrize(
    "kind, r, c, expected",
    [
        (ModulationKind.TM2, 2.0, 0.5, 3.0),
        (ModulationKind.TM4, 1.0, 1.0, 2.0),
        (ModulationKind.COOPERATION, -2.0, -1.0, 0.0),  # preact 4 - 4 - 6 = -6
        (ModulationKind.TM1, 2.0, 0.0, 2.0),
        (ModulationKind.TM3, 1.0, 0.0, 1.0),
        (ModulationKind.COOPERATION, 1.0, 0.0, 3.0),
    ],
)
def test_modulate_examples(kind, r, c, expected):
    assert modulate(kind, r, c) == expected


def test_modulate_matches_closed_forms():
    r, c = 0.7, -1.3
    assert modulate(ModulationKind.TM1, r, c) == pytest.approx(0.5 * r * (1 + math.exp(r * c)), rel=1e-15)
    assert modulate(ModulationKind.TM3, r, c) == pytest.approx(r * (1 + math.tanh(r * c)), rel=1e-15)
    assert modulate(ModulationKind.TM4, r, c) == pytest.approx(r * 2 ** (r * c), rel=1e-15)


@pytest.mark.parametrize("kind", REFERENCE_KINDS)
@given(c=finite)
def test_zero_drive_kills_output(kind, c):
    assert modulate(kind, 0.0, c) == 0.0


@pytest.mark.parametrize("kind", REFERENCE_KINDS)
@given(r=finite)
def test_zero_context_passes_drive(kind, r):
    assert modulate(kind, r, 0.0) == r


@given(c=finite)
def test_context_drives_cooperation(c):
    assert cooperation_preact(0.0, c) == 2 * c
    if c != 0:
        assert cooperation_preact(0.0, c) != 0


@given(r=finite, c1=finite, c2=finite)
def test_cooperation_strictly_increasing_in_context(r, c1, c2):
    lo, hi = sorted((c1, c2))
    if hi - lo > 1e-9 * (1 + abs(lo) + abs(hi)):
        assert cooperation_preact(r, lo) < cooperation_preact(r, hi)


@given(r=st.floats(0, 50), c=st.floats(0, 50))
def test_positive_drive_and_context_amplify(r, c):
    assert cooperation_preact(r, c) >= r * r + 2 * r >= 0


@given(r=finite)
def test_low_context_suppresses(r):
    # preact is linear in c with slope 2(1+|r|); this c puts it at -1
    c = -(r * r + 2 * r + 1) / (2 * (1 + abs(r)))
    assert modulate(ModulationKind.COOPERATION, r, c) == 0.0


@pytest.mark.parametrize("kind", [ModulationKind.TM1, ModulationKind.TM4])
def test_exponent_clamped(kind):
    out = modulate(kind, 40.0, 40.0)
    assert math.isfinite(out)
    assert math.isfinite(modulate(kind, -40.0, 40.0))


def test_array_inputs_elementwise():
    r = np.array([[0.0, 1.0], [-1.0, 2.0]])
    c = np.array([[1.0, 0.0], [1.0, 0.5]])
    out = modulate(ModulationKind.TM2, r, c)
    assert np.array_equal(out, r + r * c)
    assert out.shape == (2, 2)


@pytest.mark.parametrize("name", ["cooperation", "tm1", "tm2", "tm3", "TM4 "])
def test_parse_names(name):
    assert ModulationKind.parse(name).value == name.strip().lower()


def test_parse_rejects_unknown():
    with pytest.raises(ValueError, match="unknown modulation"):
        ModulationKind.parse("tm5")
