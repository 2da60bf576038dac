"""Robust reference generation through the controllable canonical form.

The canonical state chain is rebuilt from the flat output plus transformed
disturbance estimates: ``x_tilde_m = y^(m-1) + sum_j d_tilde_j^(m-1-j)``,
and the control adds the full disturbance-derivative sum on top of the
canonical feedforward.

The control law formally needs ``d_tilde_1`` derivatives up to order p-1,
which can exceed the observer order k. Channels of the transformed
disturbance that are structurally zero (because the physical disturbance
never enters certain state channels) are excluded from that requirement at
planning time; a genuinely required order above k raises
``InsufficientDerivatives`` when the plan is built, unless truncation is
explicitly requested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, FrozenSet, Sequence

import numpy as np

from .errors import DimensionMismatch, InsufficientDerivatives
from .observer import DisturbanceEstimates
from .statespace import BrunovskyTransform


@dataclass(frozen=True)
class TransformedDisturbanceStack:
    """Canonical-coordinates disturbance derivatives, shape (p, k+1).

    ``d_tilde[j, i]`` is the i-th derivative estimate of the (j+1)-th
    canonical disturbance channel.
    """

    d_tilde: np.ndarray

    def __post_init__(self):
        d = np.array(self.d_tilde, dtype=float)
        if d.ndim != 2:
            raise DimensionMismatch("d_tilde must be a (p, k+1) array")
        d.setflags(write=False)
        object.__setattr__(self, "d_tilde", d)

    @property
    def p(self) -> int:
        return self.d_tilde.shape[0]

    @property
    def k(self) -> int:
        return self.d_tilde.shape[1] - 1


def transform_disturbances(
    T: np.ndarray, estimates: DisturbanceEstimates
) -> TransformedDisturbanceStack:
    """Map per-order estimates into canonical coordinates: column i is T tau_hat^(i)."""
    T = np.asarray(T, dtype=float)
    tau = estimates.tau_hat
    if tau.ndim != 2 or T.shape[1] != tau.shape[1]:
        raise DimensionMismatch(
            f"T is {T.shape}, estimates are {tau.shape}; inner dimensions must agree"
        )
    return TransformedDisturbanceStack(T @ tau.T)


def structural_zero_rows(
    T: np.ndarray,
    disturbance_channels: Collection[int],
    rel_tol: float = 1e-12,
) -> FrozenSet[int]:
    """Canonical channels that no physical disturbance can reach.

    Row j of T restricted to the columns where the disturbance vector can
    be nonzero decides whether ``d_tilde_(j+1)`` is identically zero.
    """
    T = np.asarray(T, dtype=float)
    channels = sorted(set(int(c) for c in disturbance_channels))
    if any(c < 0 or c >= T.shape[1] for c in channels):
        raise DimensionMismatch("disturbance channel index out of range")
    scale = max(np.max(np.abs(T)), 1e-300)
    if not channels:
        return frozenset(range(T.shape[0]))
    sub = np.abs(T[:, channels])
    return frozenset(int(j) for j in range(T.shape[0]) if np.max(sub[j]) <= rel_tol * scale)


@dataclass(frozen=True)
class BrunovskyFlatPlan:
    """Derivative-order bookkeeping for the canonical-form law.

    ``require_control_orders`` performs the configuration-time check: every
    structurally nonzero channel must have control-law derivative orders
    (p - j for channel j) within the observer order, unless truncation was
    explicitly requested. Access through ``d_value`` raises lazily for
    orders that are genuinely demanded but unavailable.
    """

    transform: BrunovskyTransform
    k: int
    zero_rows: FrozenSet[int] = frozenset()
    truncate_missing: bool = False

    def require_control_orders(self) -> None:
        p = self.transform.p
        for j in range(1, p + 1):  # 1-indexed canonical channel
            need = p - j  # highest order the control law applies to channel j
            if (j - 1) in self.zero_rows or self.truncate_missing:
                continue
            if need > self.k:
                raise InsufficientDerivatives(
                    f"canonical disturbance channel {j} needs derivative order "
                    f"{need} but the observer provides only k={self.k}; channel "
                    "is not structurally zero and truncation is disabled"
                )

    def d_value(self, stack: TransformedDisturbanceStack, channel: int, order: int) -> float:
        """Estimate of ``d_tilde_channel^(order)`` (1-indexed channel)."""
        row = channel - 1
        if row in self.zero_rows:
            return 0.0
        if order <= stack.k:
            return float(stack.d_tilde[row, order])
        if self.truncate_missing:
            return 0.0
        raise InsufficientDerivatives(
            f"derivative order {order} of canonical channel {channel} exceeds k={stack.k}"
        )


def _full_plan(transform: BrunovskyTransform, stack: TransformedDisturbanceStack,
               zero_rows, truncate_missing) -> BrunovskyFlatPlan:
    return BrunovskyFlatPlan(
        transform=transform,
        k=stack.k,
        zero_rows=frozenset(zero_rows),
        truncate_missing=truncate_missing,
    )


def brunovsky_state_reference(
    transform: BrunovskyTransform,
    y_derivs: Sequence[float],
    stack: TransformedDisturbanceStack,
    zero_rows: Collection[int] = frozenset(),
    truncate_missing: bool = False,
) -> np.ndarray:
    """Robust state reference in original coordinates.

    ``y_derivs`` holds the flat output and at least p-1 derivatives. The
    canonical reference is the flat chain plus accumulated disturbance
    corrections, mapped back through ``T^-1``.
    """
    p = transform.p
    y = np.asarray(y_derivs, dtype=float)
    if y.shape[0] < p:
        raise InsufficientDerivatives(f"need y derivatives through order {p - 1}")
    plan = _full_plan(transform, stack, zero_rows, truncate_missing)
    x_tilde = np.empty(p)
    x_tilde[0] = y[0]
    for m in range(2, p + 1):
        acc = y[m - 1]
        for j in range(1, m):
            acc += plan.d_value(stack, j, m - 1 - j)
        x_tilde[m - 1] = acc
    return transform.from_canonical(x_tilde)


def brunovsky_control(
    transform: BrunovskyTransform,
    y_derivs: Sequence[float],
    stack: TransformedDisturbanceStack,
    K: np.ndarray,
    x: np.ndarray,
    zero_rows: Collection[int] = frozenset(),
    truncate_missing: bool = False,
) -> float:
    """Robust scalar input: flat feedforward, feedback, disturbance sum.

    ``u = y^(p) + K (x_ref - x) + sum_j d_tilde_j^(p-j) - a_c' T x_ref``.
    """
    p = transform.p
    y = np.asarray(y_derivs, dtype=float)
    if y.shape[0] < p + 1:
        raise InsufficientDerivatives(f"need y derivatives through order {p}")
    K = np.asarray(K, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if K.shape[0] != p or x.shape[0] != p:
        raise DimensionMismatch("K and x must have length p")
    plan = _full_plan(transform, stack, zero_rows, truncate_missing)
    x_ref = brunovsky_state_reference(
        transform, y, stack, zero_rows=zero_rows, truncate_missing=truncate_missing
    )
    dist_sum = 0.0
    for j in range(1, p + 1):
        dist_sum += plan.d_value(stack, j, p - j)
    u = y[p] + float(K @ (x_ref - x)) + dist_sum - float(
        transform.a_c @ transform.to_canonical(x_ref)
    )
    return u
