import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ringlat.ode import StepSizeUnderflow, dopri5


def test_exponential_decay_scalar():
    ys, stats = dopri5(lambda t, y: -y, 0.0, 1.0, [0.5, 1.0, 3.0], rtol=1e-10, atol=1e-12)
    assert ys == pytest.approx([math.exp(-0.5), math.exp(-1.0), math.exp(-3.0)], rel=1e-9)
    assert stats["accepted"] > 0


def test_complex_rotation():
    ys, _ = dopri5(lambda t, y: 1j * y, 0.0, 1 + 0j, [math.pi], rtol=1e-10, atol=1e-12)
    assert abs(ys[0] + 1) < 1e-8


def test_harmonic_oscillator_array():
    rhs = lambda t, y: np.array([y[1], -y[0]])
    ys, _ = dopri5(rhs, 0.0, np.array([1.0, 0.0]), [2 * math.pi], rtol=1e-10, atol=1e-12)
    assert np.allclose(ys[0], [1.0, 0.0], atol=1e-8)


def test_output_times_hit_exactly():
    seen = []
    dopri5(lambda t, y: -y, 0.0, 1.0, [0.1, 0.2, 0.2, 0.7], on_output=lambda t, y: seen.append(t))
    assert seen == [0.1, 0.2, 0.2, 0.7]


def test_restart_is_bit_identical():
    rhs = lambda t, y: -y + math.sin(t)
    full, _ = dopri5(rhs, 0.0, 1.0, [1.0, 2.0])
    first, _ = dopri5(rhs, 0.0, 1.0, [1.0])
    assert full[0] == first[0]


def test_rejects_decreasing_outputs():
    with pytest.raises(ValueError):
        dopri5(lambda t, y: y, 0.0, 1.0, [1.0, 0.5])
    with pytest.raises(ValueError):
        dopri5(lambda t, y: y, 1.0, 1.0, [0.5])


def test_step_underflow_on_blow_up():
    with pytest.raises(StepSizeUnderflow) as info:
        dopri5(lambda t, y: y * y, 0.0, 1.0, [2.0])
    assert info.value.t == pytest.approx(1.0, abs=1e-6)  # blow-up time of y = 1 / (1 - t)


@given(st.floats(-2.0, 2.0), st.floats(0.1, 5.0))
def test_linear_growth_property(rate, t_end):
    ys, _ = dopri5(lambda t, y: rate * y, 0.0, 1.0, [t_end], rtol=1e-10, atol=1e-12)
    assert ys[0] == pytest.approx(math.exp(rate * t_end), rel=1e-7)
