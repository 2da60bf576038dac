"""Closed-loop assembly: controller variants, state reconstruction and the
ultimate-boundedness certificate.

A control law is a pure callable ``law(t, x, estimates, ref_stack)`` where
``ref_stack`` holds the commanded output and its first p derivatives. It
returns the input together with the state reference and the certificate
error variable, so a simulation can log all three consistently.

The certificate variable ``xi`` is the tracking error of the reconstructed
state: the disturbance-free flat chain minus the estimate-reconstructed
state. For the canonical-form law this equals ``x_ref - x`` identically;
for the polynomial-matrix law it differs only by a matched-channel
re-parameterization, which the certificate's disturbance bound absorbs.
With a regulation reference the variable reduces to the plain
ultimate-boundedness state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InsufficientDerivatives, QTooSmall
from .flat_brunovsky import (
    BrunovskyFlatPlan,
    TransformedDisturbanceStack,
    brunovsky_control,
    brunovsky_state_reference,
    structural_zero_rows,
    transform_disturbances,
)
from .flat_polymatrix import FlatParameterization, build_flat_parameterization, two_mass_poly_model
from .observer import DisturbanceEstimates
from .plant import NominalParams, build_nominal_model
from .statespace import BrunovskyTransform, StateSpaceModel, lyapunov_solve, place_poles, to_brunovsky

VARIANTS = ("conventional", "brunovsky_robust", "polymatrix_robust")


@dataclass(frozen=True)
class ControllerSpec:
    """Which law to build and how the feedback gain was tuned.

    ``K`` may be omitted; it is then derived from ``pole_set``. When both
    are given they must agree through the pole-placement map.
    """

    variant: str
    pole_set: tuple
    K: Optional[np.ndarray] = None
    dob_order: int = 2
    dob_bandwidth: float = 1000.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.dob_order < 0:
            raise ValueError("dob_order must be >= 0")
        if self.dob_bandwidth <= 0.0:
            raise ValueError("dob_bandwidth must be > 0")
        object.__setattr__(self, "pole_set", tuple(complex(v) for v in self.pole_set))
        if self.K is not None:
            K = np.array(self.K, dtype=float).reshape(-1)
            K.setflags(write=False)
            object.__setattr__(self, "K", K)


@dataclass(frozen=True)
class FlatMachinery:
    """Prebuilt flat design shared by the controller variants."""

    transform: BrunovskyTransform
    plan: BrunovskyFlatPlan
    output_index: int
    brunovsky_scale: float
    polymatrix: Optional[FlatParameterization] = None
    matched_state_index: int = 1
    mismatched_state_index: int = 3
    matched_force_scale: float = 1.0
    mismatched_force_scale: float = 1.0
    polymatrix_y_scale: float = 1.0


def build_flat_machinery(
    model: StateSpaceModel,
    nominal: Optional[NominalParams] = None,
    dob_order: int = 2,
    disturbance_channels: Sequence[int] = (1, 3),
    structural_zeros: bool = True,
    truncate_missing: bool = False,
    output_index: int = 2,
) -> FlatMachinery:
    """Derive the canonical transform and, when the physical parameters are
    known, the polynomial-matrix parameterization.

    The commanded output must be a pure scaling of the flat output: row 0
    of T may only touch ``output_index``. Structural-zero analysis of the
    transformed disturbance channels is on by default; disabling it forces
    the truncation behaviour to be chosen explicitly by the caller.
    """
    transform = to_brunovsky(model)
    p = model.p
    row0 = transform.T[0]
    off = [abs(row0[j]) for j in range(p) if j != output_index]
    if max(off, default=0.0) > 1e-9 * max(abs(row0[output_index]), 1e-300):
        raise ValueError(
            "flat output is not a pure scaling of the commanded state "
            f"(T row 0 = {row0})"
        )
    zero_rows = (
        structural_zero_rows(transform.T, disturbance_channels)
        if structural_zeros
        else frozenset()
    )
    plan = BrunovskyFlatPlan(
        transform=transform,
        k=dob_order,
        zero_rows=zero_rows,
        truncate_missing=truncate_missing,
    )
    polymatrix = None
    matched_scale = mismatched_scale = y_scale = 1.0
    if nominal is not None:
        check = build_nominal_model(nominal)
        scale = np.max(np.abs(model.A))
        if (
            np.max(np.abs(check.A - model.A)) > 1e-9 * scale
            or np.max(np.abs(check.B - model.B)) > 1e-9 * np.max(np.abs(model.B))
        ):
            raise ValueError("nominal parameters do not reproduce the state-space model")
        polymatrix = build_flat_parameterization(two_mass_poly_model(nominal))
        matched_scale = nominal.m1n
        mismatched_scale = nominal.m2n
        y_scale = 1.0 / nominal.kn
    return FlatMachinery(
        transform=transform,
        plan=plan,
        output_index=output_index,
        brunovsky_scale=float(row0[output_index]),
        polymatrix=polymatrix,
        matched_force_scale=matched_scale,
        mismatched_force_scale=mismatched_scale,
        polymatrix_y_scale=y_scale,
    )


class ControlOutput(NamedTuple):
    u: float
    x_ref: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True)
class ControlLaw:
    """Deterministic closed-loop law over (t, x, estimates, ref_stack)."""

    variant: str
    K: np.ndarray
    machinery: FlatMachinery
    p: int

    def nominal_flat_reference(self, ref_stack: np.ndarray) -> np.ndarray:
        """Disturbance-free state reference (the certificate reference)."""
        m = self.machinery
        y = m.brunovsky_scale * np.asarray(ref_stack, dtype=float)[: self.p]
        return m.transform.from_canonical(y)

    def __call__(
        self,
        t: float,
        x: np.ndarray,
        estimates: DisturbanceEstimates,
        ref_stack: np.ndarray,
    ) -> ControlOutput:
        p = self.p
        ref = np.asarray(ref_stack, dtype=float)
        if ref.shape[0] < p + 1:
            raise InsufficientDerivatives(
                f"reference stack must provide orders 0..{p}, got {ref.shape[0]}"
            )
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != p:
            raise DimensionMismatch(f"state length {x.shape[0]}, expected {p}")

        if self.variant == "conventional":
            zero = DisturbanceEstimates(np.zeros_like(estimates.tau_hat))
            return self._brunovsky_output(x, zero, ref, all_zero_rows=True)
        if self.variant == "brunovsky_robust":
            return self._brunovsky_output(x, estimates, ref, all_zero_rows=False)
        return self._polymatrix_output(x, estimates, ref)

    # -- variant bodies ----------------------------------------------------

    def _brunovsky_output(self, x, estimates, ref, all_zero_rows):
        m = self.machinery
        p = self.p
        y = m.brunovsky_scale * ref[: p + 1]
        stack = transform_disturbances(m.transform.T, estimates)
        zero_rows = frozenset(range(p)) if all_zero_rows else m.plan.zero_rows
        truncate = m.plan.truncate_missing
        x_ref = brunovsky_state_reference(
            m.transform, y[:p], stack, zero_rows=zero_rows, truncate_missing=truncate
        )
        u = brunovsky_control(
            m.transform, y, stack, self.K, x,
            zero_rows=zero_rows, truncate_missing=truncate,
        )
        xi_hat = reconstruct_xi(x, estimates, m) if not all_zero_rows else x
        xi = self.nominal_flat_reference(ref) - xi_hat
        return ControlOutput(u=float(u), x_ref=x_ref, xi=xi)

    def _polymatrix_output(self, x, estimates, ref):
        from .flat_polymatrix import polymatrix_control, polymatrix_references

        m = self.machinery
        param = m.polymatrix
        y = m.polymatrix_y_scale * ref
        tau = estimates.tau_hat
        m_stack = m.matched_force_scale * tau[:, m.matched_state_index]
        mm_stack = m.mismatched_force_scale * tau[:, m.mismatched_state_index]
        x_ref = polymatrix_references(param, y, mm_stack)
        u = polymatrix_control(param, y, m_stack, mm_stack, self.K, x, x_ref)
        xi = self.nominal_flat_reference(ref) - reconstruct_xi(x, estimates, m)
        return ControlOutput(u=float(u), x_ref=x_ref, xi=xi)


def make_controller(
    spec: ControllerSpec,
    model: StateSpaceModel,
    machinery: FlatMachinery,
) -> ControlLaw:
    """Validate the spec against the model and return the control law.

    Robust variants check derivative-order sufficiency here, at build time,
    so an under-provisioned observer fails before any simulation starts.
    """
    K_derived = place_poles(model, list(spec.pole_set))
    if spec.K is None:
        K = K_derived
    else:
        K = np.asarray(spec.K, dtype=float).reshape(-1)
        scale = max(np.max(np.abs(K_derived)), 1.0)
        if K.shape != K_derived.shape or np.max(np.abs(K - K_derived)) > 1e-6 * scale:
            raise ValueError(
                "K is inconsistent with pole_set through pole placement "
                f"(max deviation {np.max(np.abs(K - K_derived)):.3e})"
            )
    if spec.variant == "brunovsky_robust":
        machinery.plan.require_control_orders()
        if machinery.plan.k != spec.dob_order:
            raise ValueError("machinery was planned for a different observer order")
    if spec.variant == "polymatrix_robust":
        if machinery.polymatrix is None:
            raise ValueError("polymatrix variant needs machinery built with nominal parameters")
        param = machinery.polymatrix
        if param.y_orders_needed() > model.p:
            raise InsufficientDerivatives(
                f"q1 needs y derivatives through order {param.y_orders_needed()}, "
                f"reference provides {model.p}"
            )
        if param.mm_orders_needed() > spec.dob_order:
            raise InsufficientDerivatives(
                f"mismatched-channel map needs derivative order {param.mm_orders_needed()}"
                f", observer provides k={spec.dob_order}"
            )
    return ControlLaw(variant=spec.variant, K=K, machinery=machinery, p=model.p)


def reconstruct_xi(
    x: np.ndarray,
    estimates: DisturbanceEstimates,
    machinery: FlatMachinery,
) -> np.ndarray:
    """Estimate-reconstructed state whose dynamics carry only matched terms.

    Canonical chain: ``xi_m = x_m - sum_{j<m} d_j^(m-1-j)``; the matched
    canonical channel (the last one) never enters the sums, so only
    mismatched estimate channels are consumed. Returned in original
    coordinates.
    """
    m = machinery
    tr = m.transform
    p = tr.p
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != p:
        raise DimensionMismatch(f"state length {x.shape[0]} != {p}")
    stack = transform_disturbances(tr.T, estimates)
    x_tilde = tr.to_canonical(x)
    xi_tilde = x_tilde.copy()
    for mm in range(2, p + 1):
        for j in range(1, mm):
            xi_tilde[mm - 1] -= m.plan.d_value(stack, j, mm - 1 - j)
    return tr.from_canonical(xi_tilde)


@dataclass(frozen=True)
class UltimateBound:
    """Invariant-ball certificate: trajectories end inside radius_sq."""

    ell: float
    phi: float
    radius_sq: float
    P: np.ndarray
    lambda_min_Q: float
    lambda_max_abs_P: float
    delta: float

    def vdot_bound(self, xi_norm_sq: np.ndarray) -> np.ndarray:
        """Right-hand side of the decrease inequality at given ||xi||^2."""
        return -self.ell * np.asarray(xi_norm_sq, dtype=float) + self.phi


def certify_ultimate_bound(
    A_n: np.ndarray,
    B_n: np.ndarray,
    K: np.ndarray,
    Q: np.ndarray,
    delta_match_err: float,
) -> UltimateBound:
    """Theorem-style ultimate bound from a Lyapunov pair.

    ``delta_match_err`` bounds the matched-channel estimation error; the
    ball radius collapses to zero with it. ``lambda_min(Q) > 1`` is
    required so the decrease rate ``ell`` stays positive.
    """
    A_n = np.asarray(A_n, dtype=float)
    B_n = np.asarray(B_n, dtype=float).reshape(-1)
    K = np.asarray(K, dtype=float).reshape(-1)
    if delta_match_err < 0.0:
        raise ValueError("delta_match_err must be >= 0")
    A_cl = A_n - np.outer(B_n, K)
    cert = lyapunov_solve(A_cl, Q)  # raises NotHurwitz on bad closed loop
    if cert.lambda_min_Q <= 1.0:
        raise QTooSmall(
            f"lambda_min(Q) = {cert.lambda_min_Q:.6g} <= 1; "
            "pick Q with smallest eigenvalue above 1"
        )
    eps = 1e-6
    ell = cert.lambda_min_Q - 1.0 - eps
    phi = (cert.lambda_max_abs_P * delta_match_err) ** 2
    return UltimateBound(
        ell=ell,
        phi=phi,
        radius_sq=phi / ell,
        P=cert.P,
        lambda_min_Q=cert.lambda_min_Q,
        lambda_max_abs_P=cert.lambda_max_abs_P,
        delta=float(delta_match_err),
    )
