"""Two-mass-spring-damper ground truth and its nominal state-space model.

State ordering is ``(q1, dq1, q2, dq2)``: motor-side position/velocity then
load-side. The control force acts on mass 1; the external load acts on
mass 2. The inter-mass damper ``b12`` exists only in the true plant and is
deliberately absent from the nominal model, so it shows up as part of the
lumped disturbances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .statespace import StateSpaceModel

ForceFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PlantParams:
    """True physical parameters (defaults: the simulation bench values)."""

    m1: float = 0.1
    m2: float = 0.25
    b1: float = 2.5
    b2: float = 2.5
    b12: float = 1.25
    k: float = 100.0

    def __post_init__(self):
        if self.m1 <= 0.0 or self.m2 <= 0.0:
            raise ValueError("masses must be > 0")
        if min(self.b1, self.b2, self.b12, self.k) < 0.0:
            raise ValueError("damping and stiffness must be >= 0")


@dataclass(frozen=True)
class NominalParams:
    """Model parameters the controller and observer believe in."""

    m1n: float = 0.065
    m2n: float = 0.0875
    b1n: float = 0.0
    b2n: float = 0.0
    kn: float = 265.0

    def __post_init__(self):
        if self.m1n <= 0.0 or self.m2n <= 0.0 or self.kn <= 0.0:
            raise ValueError("m1n, m2n, kn must be > 0")
        if self.b1n < 0.0 or self.b2n < 0.0:
            raise ValueError("nominal damping must be >= 0")

    @classmethod
    def from_plant(
        cls,
        plant: PlantParams,
        m1_scale: float = 0.65,
        m2_scale: float = 0.35,
        k_scale: float = 2.65,
        b1n: float = 0.0,
        b2n: float = 0.0,
    ) -> "NominalParams":
        """Uncertainty scalings of the benchmark study."""
        return cls(
            m1n=m1_scale * plant.m1,
            m2n=m2_scale * plant.m2,
            b1n=b1n,
            b2n=b2n,
            kn=k_scale * plant.k,
        )


def sincos_force(amplitude: float, freq1_hz: float, freq2_hz: float) -> ForceFn:
    """Product force ``A sin(2 pi f1 t) cos(2 pi f2 t)`` (vectorized)."""

    def f(t):
        t = np.asarray(t, dtype=float)
        return amplitude * np.sin(2.0 * np.pi * freq1_hz * t) * np.cos(
            2.0 * np.pi * freq2_hz * t
        )

    return f


def constant_force(value: float) -> ForceFn:
    def f(t):
        return np.full_like(np.asarray(t, dtype=float), value)

    return f


def sine_force(amplitude: float, freq_hz: float, phase: float = 0.0) -> ForceFn:
    def f(t):
        t = np.asarray(t, dtype=float)
        return amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase)

    return f


@dataclass(frozen=True)
class DisturbanceSpec:
    """External load, unmodeled forces and measurement-noise setting.

    ``f_ext`` acts on mass 2 inside the window ``[t_on, t_off]``;
    ``f_ext_sign`` fixes the sign with which it enters the mass-2 equation
    (default -1: a positive external force decelerates the load, matching
    the lumped-disturbance bookkeeping). ``f_ud1``/``f_ud2`` are optional
    unmodeled forces on each mass. Noise, when nonzero, corrupts only the
    state fed to observer and feedback, never the logged truth.
    """

    f_ext: Optional[ForceFn] = None
    t_on: float = 0.0
    t_off: float = np.inf
    f_ext_sign: float = -1.0
    f_ud1: Optional[ForceFn] = None
    f_ud2: Optional[ForceFn] = None
    measurement_noise_std: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        if self.t_on > self.t_off:
            raise ValueError("t_on must be <= t_off")
        std = np.asarray(self.measurement_noise_std, dtype=float)
        if std.ndim == 0:
            std = np.full(4, float(std))
        if std.shape != (4,) or np.any(std < 0.0):
            raise ValueError("measurement_noise_std must be a scalar or 4 values >= 0")
        std = std.copy()
        std.setflags(write=False)
        object.__setattr__(self, "measurement_noise_std", std)

    def f_ext_series(self, times: np.ndarray) -> np.ndarray:
        """Windowed external force evaluated on a time grid."""
        t = np.asarray(times, dtype=float)
        if self.f_ext is None:
            return np.zeros_like(t)
        vals = np.asarray(self.f_ext(t), dtype=float)
        window = (t >= self.t_on) & (t <= self.t_off)
        return np.where(window, vals, 0.0)

    def f_ud1_series(self, times: np.ndarray) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        return np.zeros_like(t) if self.f_ud1 is None else np.asarray(self.f_ud1(t), dtype=float)

    def f_ud2_series(self, times: np.ndarray) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        return np.zeros_like(t) if self.f_ud2 is None else np.asarray(self.f_ud2(t), dtype=float)

    @property
    def has_noise(self) -> bool:
        return bool(np.any(self.measurement_noise_std > 0.0))


def build_nominal_model(nom: NominalParams) -> StateSpaceModel:
    """Nominal state-space model in (q1, dq1, q2, dq2) ordering."""
    a = nom.kn / nom.m1n
    c = nom.kn / nom.m2n
    A = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [-a, -nom.b1n / nom.m1n, a, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [c, 0.0, -c, -nom.b2n / nom.m2n],
        ]
    )
    B = np.array([0.0, 1.0 / nom.m1n, 0.0, 0.0])
    return StateSpaceModel(A=A, B=B)


def true_plant_matrices(plant: PlantParams):
    """Linear part (A, B) of the true plant including the b12 damper."""
    A = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [
                -plant.k / plant.m1,
                -(plant.b1 + plant.b12) / plant.m1,
                plant.k / plant.m1,
                plant.b12 / plant.m1,
            ],
            [0.0, 0.0, 0.0, 1.0],
            [
                plant.k / plant.m2,
                plant.b12 / plant.m2,
                -plant.k / plant.m2,
                -(plant.b2 + plant.b12) / plant.m2,
            ],
        ]
    )
    B = np.array([0.0, 1.0 / plant.m1, 0.0, 0.0])
    return A, B


def true_derivative(
    plant: PlantParams,
    dist: DisturbanceSpec,
    t: float,
    x: np.ndarray,
    u: float,
) -> np.ndarray:
    """Ground-truth state derivative at one instant."""
    q1, dq1, q2, dq2 = np.asarray(x, dtype=float)
    f_ext = float(dist.f_ext_series(np.array([t]))[0])
    f_ud1 = float(dist.f_ud1_series(np.array([t]))[0])
    f_ud2 = float(dist.f_ud2_series(np.array([t]))[0])
    spring = plant.k * (q1 - q2)
    damper = plant.b12 * (dq1 - dq2)
    ddq1 = (u - plant.b1 * dq1 - spring - damper - f_ud1) / plant.m1
    ddq2 = (spring + damper - plant.b2 * dq2 + dist.f_ext_sign * f_ext - f_ud2) / plant.m2
    return np.array([dq1, ddq1, dq2, ddq2])


def true_disturbance_series(
    plant: PlantParams,
    nom: NominalParams,
    dist: DisturbanceSpec,
    times: np.ndarray,
    xs: np.ndarray,
    us: np.ndarray,
) -> np.ndarray:
    """Lumped disturbances (d1, d2) in force units along a trajectory.

    Defined as the residual between the nominal equations and the true
    accelerations, so the nominal model driven by (u, tau_dis) reproduces
    the true trajectory by construction. Returns shape (n, 2).
    """
    t = np.asarray(times, dtype=float)
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    q1, dq1, q2, dq2 = xs[:, 0], xs[:, 1], xs[:, 2], xs[:, 3]
    f_ext = dist.f_ext_series(t)
    f_ud1 = dist.f_ud1_series(t)
    f_ud2 = dist.f_ud2_series(t)
    spring = plant.k * (q1 - q2)
    damper = plant.b12 * (dq1 - dq2)
    ddq1 = (us - plant.b1 * dq1 - spring - damper - f_ud1) / plant.m1
    ddq2 = (spring + damper - plant.b2 * dq2 + dist.f_ext_sign * f_ext - f_ud2) / plant.m2
    d1 = us - nom.b1n * dq1 - nom.kn * (q1 - q2) - nom.m1n * ddq1
    d2 = nom.kn * (q1 - q2) - nom.b2n * dq2 - nom.m2n * ddq2
    return np.stack([d1, d2], axis=1)


def tau_dis_from_forces(nom: NominalParams, d_forces: np.ndarray) -> np.ndarray:
    """Convert (d1, d2) force pairs into the state-space disturbance vector."""
    d = np.asarray(d_forces, dtype=float)
    out = np.zeros(d.shape[:-1] + (4,))
    out[..., 1] = d[..., 0] / nom.m1n
    out[..., 3] = d[..., 1] / nom.m2n
    return out


def mechanical_energy(plant: PlantParams, xs: np.ndarray) -> np.ndarray:
    """Kinetic plus spring potential energy along a trajectory."""
    xs = np.asarray(xs, dtype=float)
    q1, dq1, q2, dq2 = xs[..., 0], xs[..., 1], xs[..., 2], xs[..., 3]
    return (
        0.5 * plant.m1 * dq1**2
        + 0.5 * plant.m2 * dq2**2
        + 0.5 * plant.k * (q1 - q2) ** 2
    )
