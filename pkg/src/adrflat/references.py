"""Reference trajectories with analytic derivative stacks.

Flat feedforward consumes the reference position together with its first
``p`` time derivatives, so every trajectory here exposes an exact
derivative stack; raw steps are replaced by a quintic smoothstep ramp so
the stack exists everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ReferenceTrajectory:
    """Scalar reference r(t) with derivatives up to a requested order."""

    def derivs(self, t: float, orders: int) -> np.ndarray:
        """Stack ``[r, r', ..., r^(orders)]`` at time t."""
        return self.series(np.array([float(t)]), orders)[:, 0]

    def series(self, times: np.ndarray, orders: int) -> np.ndarray:
        """Vectorized stack, shape (orders+1, len(times))."""
        raise NotImplementedError


@dataclass(frozen=True)
class SineReference(ReferenceTrajectory):
    """r(t) = amplitude * sin(2 pi frequency_hz t + phase)."""

    amplitude: float = 0.1
    frequency_hz: float = 0.5
    phase: float = 0.0

    def series(self, times: np.ndarray, orders: int) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        w = 2.0 * np.pi * self.frequency_hz
        out = np.empty((orders + 1, t.shape[0]))
        for j in range(orders + 1):
            out[j] = self.amplitude * w**j * np.sin(w * t + self.phase + 0.5 * np.pi * j)
        return out


@dataclass(frozen=True)
class SmoothStepReference(ReferenceTrajectory):
    """Quintic-smoothstep ramp from 0 to amplitude over ``rise_time``.

    Derivatives of order three and four exist piecewise (they jump at the
    ramp corners); the interior expressions are returned there.
    """

    amplitude: float = 0.1
    rise_time: float = 0.5
    start_time: float = 0.0

    # ascending coefficients of 10 s^3 - 15 s^4 + 6 s^5 and its derivatives
    _POLY = (
        (0.0, 0.0, 0.0, 10.0, -15.0, 6.0),
        (0.0, 0.0, 30.0, -60.0, 30.0),
        (0.0, 60.0, -180.0, 120.0),
        (60.0, -360.0, 360.0),
        (-360.0, 720.0),
    )

    def series(self, times: np.ndarray, orders: int) -> np.ndarray:
        if self.rise_time <= 0.0:
            raise ValueError("rise_time must be > 0")
        t = np.asarray(times, dtype=float)
        sigma = (t - self.start_time) / self.rise_time
        inside = (sigma > 0.0) & (sigma < 1.0)
        s = np.clip(sigma, 0.0, 1.0)
        out = np.zeros((orders + 1, t.shape[0]))
        for j in range(orders + 1):
            if j >= len(self._POLY):
                continue
            vals = np.polyval(self._POLY[j][::-1], s)
            scale = self.amplitude / self.rise_time**j
            if j == 0:
                out[0] = scale * vals
            else:
                out[j] = np.where(inside, scale * vals, 0.0)
        return out


@dataclass(frozen=True)
class ConstantReference(ReferenceTrajectory):
    value: float = 0.0

    def series(self, times: np.ndarray, orders: int) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        out = np.zeros((orders + 1, t.shape[0]))
        out[0] = self.value
        return out
