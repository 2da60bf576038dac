"""State-space model foundation: controllability, companion form, pole
placement and Lyapunov certificates.

Single-input models only: ``xdot = A x + B u - tau_dis`` with ``u`` scalar
and ``tau_dis`` an exogenous per-channel disturbance vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NotControllable, NotHurwitz

_RANK_RTOL = 1e-9  # singular-value ratio below which the model is deemed uncontrollable


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpaceModel:
    """Linear single-input plant ``xdot = A x + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _readonly(self.A)
        B = _readonly(self.B).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"B length {B.shape[0]} != state dim {A.shape[0]}")
        if A.shape[0] < 1:
            raise DimensionMismatch("state dimension must be >= 1")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("model entries must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def p(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class BrunovskyTransform:
    """Similarity transform into the controllable companion form.

    ``T @ A @ T_inv`` has ones on the superdiagonal and last row ``a_c``;
    ``T @ B`` equals the last unit vector.
    """

    T: np.ndarray
    T_inv: np.ndarray
    a_c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "T", _readonly(self.T))
        object.__setattr__(self, "T_inv", _readonly(self.T_inv))
        object.__setattr__(self, "a_c", _readonly(self.a_c).reshape(-1))

    @property
    def p(self) -> int:
        return self.T.shape[0]

    def to_canonical(self, x: np.ndarray) -> np.ndarray:
        return self.T @ np.asarray(x, dtype=float)

    def from_canonical(self, x_tilde: np.ndarray) -> np.ndarray:
        return self.T_inv @ np.asarray(x_tilde, dtype=float)


@dataclass(frozen=True)
class LyapunovCertificate:
    """Solution pair of ``A_cl' P + P A_cl = -Q`` with spectral summaries."""

    P: np.ndarray
    Q: np.ndarray
    lambda_min_Q: float
    lambda_max_abs_P: float

    def residual(self, A_cl: np.ndarray) -> float:
        """Max-abs residual of the Lyapunov equation for a given ``A_cl``."""
        R = A_cl.T @ self.P + self.P @ A_cl + self.Q
        return float(np.max(np.abs(R)))


def controllability_matrix(model: StateSpaceModel) -> np.ndarray:
    """Krylov matrix ``[B, AB, ..., A^(p-1) B]`` (p x p)."""
    p = model.p
    cols = np.empty((p, p))
    v = model.B.copy()
    for j in range(p):
        cols[:, j] = v
        v = model.A @ v
    return cols


def _check_controllable(gamma: np.ndarray) -> None:
    sv = np.linalg.svd(gamma, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= _RANK_RTOL * sv[0]:
        raise NotControllable(
            f"controllability matrix is rank deficient "
            f"(min/max singular value ratio {sv[-1] / max(sv[0], 1e-300):.3e})"
        )


def to_brunovsky(model: StateSpaceModel) -> BrunovskyTransform:
    """Build the companion-form transform from the controllability matrix.

    Rows of T are ``q', q'A, ..., q'A^(p-1)`` where ``q'`` is the last row
    of the inverse controllability matrix, scaled so that ``T B`` is exactly
    the last unit vector.
    """
    p = model.p
    gamma = controllability_matrix(model)
    _check_controllable(gamma)
    q = np.linalg.solve(gamma.T, np.eye(p)[:, -1])  # last row of gamma^-1
    T = np.empty((p, p))
    row = q
    for i in range(p):
        T[i] = row
        row = row @ model.A
    # q' A^(p-1) B = 1 in exact arithmetic; rescale uniformly to pin it.
    T /= T[-1] @ model.B
    T_inv = np.linalg.inv(T)
    a_c = T[-1] @ model.A @ T_inv
    return BrunovskyTransform(T=T, T_inv=T_inv, a_c=a_c)


def _real_poly_from_poles(poles: Sequence[complex]) -> np.ndarray:
    """Ascending real coefficients of prod(s - poles), excluding the leading 1.

    The pole set must be closed under conjugation so the product is real.
    """
    poles = np.asarray(poles, dtype=complex)
    sorted_p = np.sort_complex(poles)
    sorted_c = np.sort_complex(np.conj(poles))
    if not np.allclose(sorted_p, sorted_c, rtol=1e-9, atol=1e-12):
        raise ValueError("pole set must be closed under conjugation")
    coeffs = np.poly(poles)  # descending, leading 1
    if np.max(np.abs(coeffs.imag)) > 1e-9 * max(np.max(np.abs(coeffs.real)), 1.0):
        raise ValueError("pole polynomial has a non-real coefficient")
    return coeffs.real[1:][::-1]  # ascending, constant term first


def place_poles(model: StateSpaceModel, desired: Sequence[complex]) -> np.ndarray:
    """Feedback row vector K with ``eig(A - B K)`` at the desired poles.

    Ackermann through the companion form: in canonical coordinates the
    closed-loop last row must equal the negated desired polynomial
    coefficients, so ``K_tilde = a_c + d`` and ``K = K_tilde @ T``.
    """
    p = model.p
    if len(desired) != p:
        raise DimensionMismatch(f"need {p} poles, got {len(desired)}")
    tr = to_brunovsky(model)
    d = _real_poly_from_poles(desired)
    K_tilde = tr.a_c + d
    return K_tilde @ tr.T


def lyapunov_solve(A_cl: np.ndarray, Q: np.ndarray) -> LyapunovCertificate:
    """Solve ``A_cl' P + P A_cl = -Q`` by the Kronecker-vectorized dense system.

    ``A_cl`` must be Hurwitz and ``Q`` symmetric positive definite; the
    returned ``P`` is symmetrized and both spectra are summarized for
    ultimate-bound certificates.
    """
    A_cl = np.asarray(A_cl, dtype=float)
    Q = np.asarray(Q, dtype=float)
    p = A_cl.shape[0]
    if A_cl.shape != (p, p) or Q.shape != (p, p):
        raise DimensionMismatch("A_cl and Q must be square and equally sized")
    eig_A = np.linalg.eigvals(A_cl)
    if np.max(eig_A.real) >= -1e-9:
        raise NotHurwitz(
            f"A_cl has eigenvalue with real part {np.max(eig_A.real):.3e} >= -1e-9"
        )
    I = np.eye(p)
    # vec(A' P + P A) = (I (x) A' + A' (x) I) vec(P)
    M = np.kron(I, A_cl.T) + np.kron(A_cl.T, I)
    vecP = np.linalg.solve(M, -Q.reshape(-1))
    P = vecP.reshape(p, p)
    P = 0.5 * (P + P.T)
    eig_P = np.linalg.eigvalsh(P)
    eig_Q = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    if eig_Q[0] <= 0.0:
        raise ValueError("Q must be positive definite")
    if eig_P[0] <= 0.0:
        raise NotHurwitz("Lyapunov solution P is not positive definite")
    return LyapunovCertificate(
        P=P,
        Q=Q,
        lambda_min_Q=float(eig_Q[0]),
        lambda_max_abs_P=float(np.max(np.abs(eig_P))),
    )
