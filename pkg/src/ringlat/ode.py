"""Adaptive Dormand-Prince 5(4) integrator.

Works on Python scalars (float or complex) as well as numpy arrays. The
adiabatic field model has a single complex degree of freedom, for which
plain scalar arithmetic is several times faster than any array-based
solver.
"""

from __future__ import annotations

import math

import numpy as np

# Dormand-Prince tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between the 5th and the embedded 4th order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class StepSizeUnderflow(RuntimeError):
    """The step size fell below the resolvable minimum.

    ``t`` and ``y`` hold the last accepted state.
    """

    def __init__(self, t, y, h):
        super().__init__(f"step size underflow at t={t!r} (h={h!r})")
        self.t = t
        self.y = y
        self.h = h


def _scaled_norm(err, y, y_new, rtol, atol):
    if isinstance(y, np.ndarray):
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))
    return abs(err) / (atol + rtol * max(abs(y), abs(y_new)))


def _initial_step(rhs, t0, y0, f0, rtol, atol, direction):
    d0 = _scaled_norm(y0, y0, y0, rtol, atol) if not np.all(y0 == 0) else 0.0
    d1 = _scaled_norm(f0, y0, y0, rtol, atol)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = rhs(t0 + direction * h0, y1)
    d2 = _scaled_norm(f1 - f0, y0, y0, rtol, atol) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5(rhs, t0, y0, t_out, *, rtol=1e-8, atol=1e-10, max_step=math.inf, first_step=None,
           on_output=None):
    """Integrate ``dy/dt = rhs(t, y)`` and return the states at ``t_out``.

    ``t_out`` must be increasing and lie in [t0, inf). Steps are shortened so
    that every output time is hit exactly (no interpolation), which also makes
    a restart at the last output time bit-identical to continuing.

    Returns ``(ys, stats)`` where ``ys`` is a list aligned with ``t_out`` and
    ``stats`` counts accepted/rejected steps and right-hand side evaluations.
    ``on_output(t, y)`` is called as each output time is reached.
    """
    t_out = [float(t) for t in t_out]
    if any(b < a for a, b in zip(t_out, t_out[1:])):
        raise ValueError("t_out must be non-decreasing")
    if t_out and t_out[0] < t0:
        raise ValueError("t_out must not precede t0")

    t = float(t0)
    y = y0
    f = rhs(t, y)
    stats = {"accepted": 0, "rejected": 0, "nfev": 1}
    ys = []
    if not t_out:
        return ys, stats
    h = first_step if first_step is not None else _initial_step(rhs, t, y, f, rtol, atol, 1.0)
    stats["nfev"] += 1
    h = min(h, max_step)

    for t_target in t_out:
        while t < t_target:
            min_h = 16 * np.spacing(max(abs(t), 1.0))
            remaining = t_target - t
            h_try = min(h, remaining)
            if remaining - h_try < min_h:
                h_try = remaining
            if h_try < min_h and h_try < remaining:
                raise StepSizeUnderflow(t, y, h_try)

            k1 = f
            k2 = rhs(t + _C2 * h_try, y + h_try * (_A21 * k1))
            k3 = rhs(t + _C3 * h_try, y + h_try * (_A31 * k1 + _A32 * k2))
            k4 = rhs(t + _C4 * h_try, y + h_try * (_A41 * k1 + _A42 * k2 + _A43 * k3))
            k5 = rhs(t + _C5 * h_try, y + h_try * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
            k6 = rhs(t + h_try, y + h_try * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
            y_new = y + h_try * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            k7 = rhs(t + h_try, y_new)
            stats["nfev"] += 6
            err = h_try * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
            norm = _scaled_norm(err, y, y_new, rtol, atol)

            if norm <= 1.0:
                t = t_target if h_try == remaining else t + h_try
                y = y_new
                f = k7
                stats["accepted"] += 1
                factor = MAX_FACTOR if norm == 0 else min(MAX_FACTOR, SAFETY * norm ** -0.2)
                # do not let a short clipped step shrink the next one
                h = min(max(h, h_try * factor), max_step) if h_try < h else min(h_try * factor, max_step)
            else:
                stats["rejected"] += 1
                h = h_try * max(MIN_FACTOR, SAFETY * norm ** -0.2)
                if h < min_h:
                    raise StepSizeUnderflow(t, y, h)
        ys.append(y)
        if on_output is not None:
            on_output(t, y)
    return ys, stats
