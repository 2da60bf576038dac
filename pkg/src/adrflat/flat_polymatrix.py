"""Flat parameterization from the polynomial-matrix plant description.

Supported shape: single-input models with a 2x2 polynomial system matrix
(the two-coordinate mechanical case). The annihilator of a 2x1 polynomial
input vector is unique up to scale, which is what makes this case closed
form; higher dimensions are out of scope.

The parameterization maps the flat output y and the mismatched disturbance
into positions, ``x(s) = p1(s) y + P2(s) tau_mm(s)``, and the input into
``u = q1(s) y + q2'(s) tau_m + q3'(s) tau_mm``. Velocities are obtained by
formally shifting the derivative stacks, never by numerical
differentiation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientDerivatives,
    SingularChannel,
    UnsupportedDimension,
)
from .plant import NominalParams
from .polynomials import Polynomial, PolyMatrix, det_2x2

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolyModel:
    """Polynomial-matrix plant ``An(s) x(s) + tau_dis(s) = Bn(s) u``."""

    An_s: PolyMatrix
    Bn_s: PolyMatrix

    def __post_init__(self):
        if self.An_s.rows != self.An_s.cols:
            raise DimensionMismatch("An(s) must be square")
        if self.Bn_s.cols != 1 or self.Bn_s.rows != self.An_s.rows:
            raise DimensionMismatch("Bn(s) must be a column of matching height")
        if self.An_s.rows == 2:
            d = det_2x2(self.An_s)
            if d.is_zero() or max(abs(c) for c in d.coeffs) <= 1e-12 * max(
                self.An_s.max_coeff() ** 2, 1e-300
            ):
                raise ValueError("An(s) must have full polynomial rank")

    @property
    def p_star(self) -> int:
        return self.An_s.rows

    @property
    def matched_index(self) -> int:
        """Row through which the input acts (nonzero entry of Bn)."""
        for i in range(self.Bn_s.rows):
            if not self.Bn_s[i, 0].is_zero():
                return i
        raise ValueError("Bn(s) is identically zero")

    @property
    def mismatched_index(self) -> int:
        """The other channel (2x1 case only)."""
        if self.p_star != 2:
            raise UnsupportedDimension("mismatched_index defined for p* = 2 only")
        return 1 - self.matched_index


def two_mass_poly_model(nom: NominalParams) -> PolyModel:
    """Benchmark instance: coordinates (q1, q2), force input on row 0."""
    kn = Polynomial([nom.kn])
    An = PolyMatrix(
        [
            [Polynomial([nom.kn, nom.b1n, nom.m1n]), -1.0 * kn],
            [-1.0 * kn, Polynomial([nom.kn, nom.b2n, nom.m2n])],
        ]
    )
    Bn = PolyMatrix([[Polynomial([1.0])], [Polynomial()]])
    return PolyModel(An_s=An, Bn_s=Bn)


def left_annihilator_2x1(Bn_s: PolyMatrix) -> PolyMatrix:
    """Row c(s) with c(s) Bn(s) = 0, unique up to scale for 2x1 inputs.

    Normalized so the leading coefficient of the first nonzero entry is
    positive; a sign flip applied during normalization is logged.
    """
    if Bn_s.shape != (2, 1):
        raise UnsupportedDimension(f"annihilator implemented for 2x1 only, got {Bn_s.shape}")
    if Bn_s[0, 0].is_zero() and Bn_s[1, 0].is_zero():
        raise ValueError("Bn(s) is identically zero")
    c0 = -1.0 * Bn_s[1, 0]
    c1 = Bn_s[0, 0]
    lead = next(e for e in (c0, c1) if not e.is_zero())
    flipped = lead.coeffs[-1] < 0.0
    if flipped:
        c0, c1 = -1.0 * c0, -1.0 * c1
        logger.debug("annihilator sign-normalized (flipped)")
    return PolyMatrix([[c0, c1]])


def solve_parameterization(
    model: PolyModel,
    c_s: PolyMatrix,
    normalization: tuple[int, Polynomial] = None,
):
    """Solve the flat position map (p1, P2) for the 2x2 case.

    ``p1`` solves ``c(s) An(s) p1(s) = 0`` with one component pinned by the
    normalization (default: the mismatched-channel component set to the
    constant stiffness-like pivot so the solution stays polynomial). ``P2``
    routes the mismatched disturbance so that the constrained channel
    equation holds identically: ``c(s) An(s) P2(s) = -c(s)``.
    """
    if model.p_star != 2:
        raise UnsupportedDimension("parameterization implemented for p* = 2 only")
    if c_s.shape != (1, 2):
        raise DimensionMismatch("c(s) must be 1x2")
    g = c_s @ model.An_s  # 1x2 constraint row
    if normalization is None:
        # pin the component whose constraint coefficient is constant, with
        # the pivot magnitude as the pinned value (the benchmark convention)
        pivots = [g[0, i] for i in range(2)]
        const_rows = [i for i, piv in enumerate(pivots) if not piv.is_zero() and piv.degree == 0]
        if not const_rows:
            raise SingularChannel("no constant pivot in c(s) An(s); pass a normalization")
        pivot_row = const_rows[0]
        idx = 1 - pivot_row
        normalization = (idx, Polynomial([abs(pivots[pivot_row].coeffs[0])]))
    idx, value = normalization
    if idx not in (0, 1):
        raise DimensionMismatch("normalization index must be 0 or 1")
    other = 1 - idx
    pivot = g[0, other]
    if pivot.is_zero():
        raise SingularChannel(f"pivot polynomial in c(s)An(s) channel {other} is identically zero")
    p_other = (-1.0 * (g[0, idx] * value)).divide_exact(pivot)
    entries = [None, None]
    entries[idx] = value
    entries[other] = p_other
    p1 = PolyMatrix([[entries[0]], [entries[1]]])

    # P2 columns: g . P2[:, j] = -c[j]; only the mismatched column can be
    # nonzero for a disturbance supported on the mismatched channel.
    zero = Polynomial()
    cols = []
    const_pivot_rows = [
        i for i in range(2) if (not g[0, i].is_zero()) and g[0, i].degree == 0
    ]
    for j in range(2):
        rhs = -1.0 * c_s[0, j]
        if rhs.is_zero():
            cols.append([zero, zero])
            continue
        if not const_pivot_rows:
            raise SingularChannel(
                "no constant pivot available to route the mismatched disturbance"
            )
        r = const_pivot_rows[0]
        col = [zero, zero]
        col[r] = rhs.divide_exact(g[0, r])
        cols.append(col)
    P2 = PolyMatrix([[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]])
    return p1, P2


def compute_q_polynomials(model: PolyModel, p1_s: PolyMatrix, P2_s: PolyMatrix):
    """Input-side polynomials (q1, q2, q3) of the flat parameterization."""
    den = (model.Bn_s.T @ model.Bn_s)[0, 0]
    if den.is_zero():
        raise SingularChannel("Bn'(s) Bn(s) is identically zero")
    q1 = (model.Bn_s.T @ model.An_s @ p1_s)[0, 0].divide_exact(den)
    q2 = PolyMatrix(
        [[model.Bn_s[i, 0].divide_exact(den) for i in range(model.p_star)]]
    )
    vec = P2_s.T @ model.An_s.T @ model.Bn_s
    q3 = PolyMatrix([[vec[i, 0].divide_exact(den) for i in range(model.p_star)]])
    return q1, q2, q3


@dataclass(frozen=True)
class FlatParameterization:
    """Complete flat map of a 2x2 polynomial-matrix model."""

    model: PolyModel
    c_s: PolyMatrix
    p1_s: PolyMatrix
    P2_s: PolyMatrix
    q1_s: Polynomial
    q2_s: PolyMatrix
    q3_s: PolyMatrix

    @property
    def matched_index(self) -> int:
        return self.model.matched_index

    @property
    def mismatched_index(self) -> int:
        return self.model.mismatched_index

    def y_orders_needed(self) -> int:
        """Highest y derivative the input map consumes (= deg q1)."""
        return 0 if self.q1_s.is_zero() else self.q1_s.degree

    def mm_orders_needed(self) -> int:
        """Highest mismatched-disturbance derivative needed by the input map."""
        q3_deg = self.q3_s.max_degree()
        p2_deg = self.P2_s.max_degree()
        return max(q3_deg, p2_deg + 1, 0)  # +1: velocity references shift P2

    def to_text(self) -> str:
        """Coefficient block, one ``name: c0 c1 ...`` line per polynomial."""

        def fmt(name, poly):
            cs = " ".join(f"{c:.12g}" for c in poly.coeffs) if poly.coeffs else "0"
            return f"{name}: {cs}"

        lines = []
        for name, mat in (("c", self.c_s), ("q2", self.q2_s), ("q3", self.q3_s)):
            for j in range(mat.cols):
                lines.append(fmt(f"{name}[{j}]", mat[0, j]))
        for i in range(self.p1_s.rows):
            lines.append(fmt(f"p1[{i}]", self.p1_s[i, 0]))
        for i in range(self.P2_s.rows):
            for j in range(self.P2_s.cols):
                lines.append(fmt(f"P2[{i},{j}]", self.P2_s[i, j]))
        lines.append(fmt("q1", self.q1_s))
        return "\n".join(lines) + "\n"


def build_flat_parameterization(
    model: PolyModel, normalization: tuple[int, Polynomial] = None
) -> FlatParameterization:
    """Derive and cross-check the full parameterization for a 2x2 model."""
    c_s = left_annihilator_2x1(model.Bn_s)
    p1, P2 = solve_parameterization(model, c_s, normalization)
    q1, q2, q3 = compute_q_polynomials(model, p1, P2)
    param = FlatParameterization(
        model=model, c_s=c_s, p1_s=p1, P2_s=P2, q1_s=q1, q2_s=q2, q3_s=q3
    )
    _validate(param)
    return param


def _validate(param: FlatParameterization) -> None:
    model = param.model
    scale = max(model.An_s.max_coeff(), model.Bn_s.max_coeff(), 1.0)
    ann = param.c_s @ model.Bn_s
    if ann.max_coeff() > 1e-12 * scale:
        raise ValueError("annihilation identity c(s)Bn(s)=0 violated")
    defining = param.c_s @ model.An_s @ param.p1_s
    def_scale = max(
        (param.c_s @ model.An_s).max_coeff() * max(param.p1_s.max_coeff(), 1.0), 1.0
    )
    if defining.max_coeff() > 1e-9 * def_scale:
        raise ValueError("defining identity c(s)An(s)p1(s)=0 violated")


def polymatrix_references(
    param: FlatParameterization,
    y_derivs: Sequence[float],
    mm_derivs: Sequence[float],
) -> np.ndarray:
    """State reference (q1, dq1, q2, dq2) from flat output and mm-estimate stacks.

    Positions apply ``p1`` to the y stack and the mismatched column of
    ``P2`` to the mm stack; velocities apply the same polynomials to the
    stacks shifted one order up.
    """
    y = np.asarray(y_derivs, dtype=float)
    mm = np.asarray(mm_derivs, dtype=float)
    mm_col = param.mismatched_index
    out = np.empty(4)
    for i in range(2):
        pos_poly = param.p1_s[i, 0]
        dist_poly = param.P2_s[i, mm_col]
        try:
            pos = pos_poly.eval_chain(y) + dist_poly.eval_chain(mm)
            vel = pos_poly.eval_chain(y[1:]) + dist_poly.eval_chain(mm[1:])
        except InsufficientDerivatives as e:
            raise InsufficientDerivatives(f"reference channel {i}: {e}") from e
        out[2 * i] = pos
        out[2 * i + 1] = vel
    return out


def polymatrix_control(
    param: FlatParameterization,
    y_derivs: Sequence[float],
    m_derivs: Sequence[float],
    mm_derivs: Sequence[float],
    K: np.ndarray,
    x: np.ndarray,
    x_ref: np.ndarray = None,
) -> float:
    """Robust input ``q1(s)y + K(x_ref - x) + q2' tau_m + q3' tau_mm``.

    ``m_derivs``/``mm_derivs`` stack the matched and mismatched disturbance
    estimates (force units) and their derivatives.
    """
    y = np.asarray(y_derivs, dtype=float)
    m = np.asarray(m_derivs, dtype=float)
    mm = np.asarray(mm_derivs, dtype=float)
    K = np.asarray(K, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if K.shape[0] != 4 or x.shape[0] != 4:
        raise DimensionMismatch("K and x must have length 4")
    if x_ref is None:
        x_ref = polymatrix_references(param, y, mm)
    u = param.q1_s.eval_chain(y)
    u += float(K @ (np.asarray(x_ref, dtype=float) - x))
    # tau_m / tau_mm are supported on single channels, so only the matching
    # q2/q3 component sees a nonzero stack
    u += param.q2_s[0, param.matched_index].eval_chain(m)
    u += param.q3_s[0, param.mismatched_index].eval_chain(mm)
    return float(u)
