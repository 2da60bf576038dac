"""k-th order disturbance observer in state space.

The observer integrates k+1 auxiliary vectors ``zhat_0 .. zhat_k`` and
recovers the lumped disturbance ``tau_dis`` and its first k time
derivatives from the measured state and the applied input.

Gain convention
---------------
``gains[j]`` is the coefficient of ``lambda**j`` in the estimation-error
characteristic polynomial::

    lambda^(k+1) + gains[k] lambda^k + ... + gains[1] lambda + gains[0]

The block-companion error matrix consumes these in reverse row order
(row j of Psi carries ``gains[k-j]``); that pairing is what makes the
repeated-gain tuning place every eigenvalue at ``-lambda_dob``. The same
reversed coefficient is used when extracting estimates from the auxiliary
state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .statespace import StateSpaceModel


@dataclass(frozen=True)
class ObserverConfig:
    """Observer order, gains and the nominal model it is built against.

    ``literal_form`` switches the auxiliary-derivative equations to the
    variant where the leading feedback term couples through ``zhat_j``
    itself rather than ``zhat_0``; kept for comparison only, the default
    form is the one consistent with the estimation-error dynamics.
    """

    k: int
    gains: np.ndarray
    model: StateSpaceModel
    literal_form: bool = False

    def __post_init__(self):
        g = np.array(self.gains, dtype=float).reshape(-1)
        if self.k < 0:
            raise ValueError("observer order k must be >= 0")
        if g.shape[0] != self.k + 1:
            raise DimensionMismatch(f"need {self.k + 1} gains, got {g.shape[0]}")
        if not np.all(np.isfinite(g)):
            raise ValueError("gains must be finite")
        roots = np.roots(np.concatenate(([1.0], g[::-1])))
        if roots.size and np.max(roots.real) >= 0.0:
            raise ValueError(
                "gain polynomial is not Hurwitz "
                f"(root with real part {np.max(roots.real):.3e})"
            )
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    @property
    def p(self) -> int:
        return self.model.p

    @property
    def row_gains(self) -> np.ndarray:
        """Per-row gains of the error dynamics: row j carries gains[k-j]."""
        return self.gains[::-1]


@dataclass(frozen=True)
class ObserverState:
    """Auxiliary estimates ``zhat``, shape (k+1, p)."""

    z_hat: np.ndarray

    def __post_init__(self):
        z = np.array(self.z_hat, dtype=float)
        if z.ndim != 2:
            raise DimensionMismatch("z_hat must be a (k+1, p) array")
        if not np.all(np.isfinite(z)):
            raise ValueError("z_hat entries must be finite")
        z.setflags(write=False)
        object.__setattr__(self, "z_hat", z)

    @classmethod
    def zeros(cls, config: ObserverConfig) -> "ObserverState":
        return cls(np.zeros((config.k + 1, config.p)))

    @classmethod
    def exact(
        cls, config: ObserverConfig, x: np.ndarray, tau_derivs: np.ndarray
    ) -> "ObserverState":
        """State with zero estimation error for known disturbance derivatives.

        ``tau_derivs[j]`` is the true j-th derivative of tau_dis at the
        start instant; the auxiliary truth is ``z_j = G_j x + tau^(j)``.
        """
        x = np.asarray(x, dtype=float)
        tau = np.asarray(tau_derivs, dtype=float)
        if tau.shape != (config.k + 1, config.p):
            raise DimensionMismatch("tau_derivs must be (k+1, p)")
        G = config.row_gains
        return cls(tau + G[:, None] * x[None, :])


@dataclass(frozen=True)
class DisturbanceEstimates:
    """Disturbance vector and derivative estimates, ``tau_hat[j]`` of order j."""

    tau_hat: np.ndarray

    def __post_init__(self):
        t = np.array(self.tau_hat, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "tau_hat", t)

    @property
    def k(self) -> int:
        return self.tau_hat.shape[0] - 1

    def order(self, j: int) -> np.ndarray:
        return self.tau_hat[j]


@dataclass(frozen=True)
class BoundParams:
    """Disturbance-derivative bounds and the slowest error eigenvalue."""

    delta: np.ndarray
    lambda_min: float

    def __post_init__(self):
        d = np.array(self.delta, dtype=float).reshape(-1)
        if np.any(d < 0.0):
            raise ValueError("delta bounds must be >= 0")
        if self.lambda_min <= 0.0:
            raise ValueError("lambda_min must be > 0")
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)


def tune_gains_repeated(k: int, lambda_dob: float) -> np.ndarray:
    """Gains placing all k+1 error eigenvalues at ``-lambda_dob``.

    Expansion of ``(lambda + lambda_dob)^(k+1)``:
    ``gains[j] = C(k+1, j) * lambda_dob**(k+1-j)``.
    """
    if lambda_dob <= 0.0:
        raise ValueError("lambda_dob must be > 0")
    if k < 0:
        raise ValueError("k must be >= 0")
    return np.array(
        [math.comb(k + 1, j) * lambda_dob ** (k + 1 - j) for j in range(k + 1)]
    )


def assemble_psi(config: ObserverConfig) -> np.ndarray:
    """Block-companion matrix of the estimation-error dynamics.

    Block row j holds ``-G_j I_p`` in block column 0 and ``I_p`` on the
    block superdiagonal; its characteristic polynomial is the gain
    polynomial raised to the p-th power.
    """
    k, p = config.k, config.p
    G = config.row_gains
    psi = np.zeros(((k + 1) * p, (k + 1) * p))
    I = np.eye(p)
    for j in range(k + 1):
        psi[j * p : (j + 1) * p, 0:p] = -G[j] * I
        if j < k:
            psi[j * p : (j + 1) * p, (j + 1) * p : (j + 2) * p] = I
    return psi


def observer_derivatives(
    config: ObserverConfig,
    state: ObserverState,
    x: np.ndarray,
    u: float,
) -> np.ndarray:
    """Time derivatives of the auxiliary estimates, shape (k+1, p).

    Row j is ``-G_j zhat_0 + zhat_(j+1) + G_j (An x + Bn u + G_0 x)
    - G_(j+1) x`` with the trailing terms absent for j = k. With
    ``literal_form`` the first term uses ``zhat_j`` instead of ``zhat_0``.
    """
    k, p = config.k, config.p
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != p:
        raise DimensionMismatch(f"x has length {x.shape[0]}, expected {p}")
    z = state.z_hat
    if z.shape != (k + 1, p):
        raise DimensionMismatch(f"z_hat shape {z.shape}, expected {(k + 1, p)}")
    G = config.row_gains
    model = config.model
    drive = model.A @ x + model.B * float(u) + G[0] * x
    out = np.empty((k + 1, p))
    for j in range(k + 1):
        lead = z[j] if config.literal_form else z[0]
        out[j] = -G[j] * lead + G[j] * drive
        if j < k:
            out[j] += z[j + 1] - G[j + 1] * x
    return out


def extract_estimates(
    config: ObserverConfig, state: ObserverState, x: np.ndarray
) -> DisturbanceEstimates:
    """Estimates ``tau_hat^(j) = zhat_j - G_j x`` at the current state."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != config.p:
        raise DimensionMismatch(f"x has length {x.shape[0]}, expected {config.p}")
    if state.z_hat.shape != (config.k + 1, config.p):
        raise DimensionMismatch("observer state shape mismatch")
    G = config.row_gains
    return DisturbanceEstimates(state.z_hat - G[:, None] * x[None, :])


def error_bound(bounds: BoundParams, e0_norm: float, t: float) -> float:
    """Envelope ``exp(-lambda_min t) e0 + delta^(k+1) / lambda_min``."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    return float(
        math.exp(-bounds.lambda_min * t) * e0_norm
        + bounds.delta[-1] / bounds.lambda_min
    )


def observer_matrices(config: ObserverConfig):
    """Linear pieces of the auxiliary dynamics for batched integration.

    Returns ``(M_zz, M_zx, B_zu)`` with ``zhat_dot = M_zz zhat_flat +
    M_zx x + B_zu u`` where ``zhat_flat`` stacks rows of ``z_hat``.
    """
    k, p = config.k, config.p
    G = config.row_gains
    model = config.model
    n = (k + 1) * p
    M_zz = np.zeros((n, n))
    M_zx = np.zeros((n, p))
    B_zu = np.zeros(n)
    I = np.eye(p)
    core = model.A + G[0] * I
    for j in range(k + 1):
        rows = slice(j * p, (j + 1) * p)
        lead_col = slice(j * p, (j + 1) * p) if config.literal_form else slice(0, p)
        M_zz[rows, lead_col] += -G[j] * I
        M_zx[rows] = G[j] * core
        B_zu[j * p : (j + 1) * p] = G[j] * model.B
        if j < k:
            M_zz[rows, (j + 1) * p : (j + 2) * p] += I
            M_zx[rows] -= G[j + 1] * I
    return M_zz, M_zx, B_zu
