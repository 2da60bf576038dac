"""Univariate polynomials in the differential operator s, and matrices of them.

Coefficients are stored ascending (index i multiplies s**i). Trailing zeros
are trimmed on construction; the zero polynomial is the empty coefficient
tuple and reports ``degree is None``.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientDerivatives

_TRIM_TOL = 0.0  # only exact zeros are trimmed; numerical cleanup is explicit


class Polynomial:
    """Immutable univariate polynomial with ascending real coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[float] = ()):
        cs = [float(c) for c in coeffs]
        while cs and cs[-1] == _TRIM_TOL:
            cs.pop()
        if any(not math.isfinite(c) for c in cs):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", tuple(cs))

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    @property
    def degree(self) -> int | None:
        """Degree, or None for the zero polynomial."""
        return len(self.coeffs) - 1 if self.coeffs else None

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, power: int) -> float:
        """Coefficient of s**power (zero beyond the stored degree)."""
        return self.coeffs[power] if 0 <= power < len(self.coeffs) else 0.0

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial(
            [self.coeff(i) + other.coeff(i) for i in range(n)]
        )

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial(
            [self.coeff(i) - other.coeff(i) for i in range(n)]
        )

    def __neg__(self) -> "Polynomial":
        return Polynomial([-c for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if self.is_zero() or other.is_zero():
                return Polynomial()
            out = [0.0] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, a in enumerate(self.coeffs):
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
            return Polynomial(out)
        return Polynomial([float(other) * c for c in self.coeffs])

    __rmul__ = __mul__

    def shift(self, orders: int = 1) -> "Polynomial":
        """Multiply by s**orders (formal time differentiation of the operand)."""
        if self.is_zero():
            return self
        return Polynomial((0.0,) * orders + self.coeffs)

    def divide_exact(self, divisor: "Polynomial", rel_tol: float = 1e-9) -> "Polynomial":
        """Exact polynomial division; raises ValueError on a nonzero remainder.

        The remainder is compared against ``rel_tol`` times the largest
        coefficient magnitude involved, so the check is scale-free.
        """
        if divisor.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        if self.is_zero():
            return Polynomial()
        rem = list(self.coeffs)
        dmax = len(divisor.coeffs) - 1
        lead = divisor.coeffs[-1]
        scale = max(map(abs, self.coeffs + divisor.coeffs))
        if len(rem) - 1 < dmax:
            quot = []
        else:
            quot = [0.0] * (len(rem) - dmax)
            for k in range(len(quot) - 1, -1, -1):
                q = rem[k + dmax] / lead
                quot[k] = q
                for j, c in enumerate(divisor.coeffs):
                    rem[k + j] -= q * c
        if any(abs(r) > rel_tol * scale for r in rem):
            raise ValueError("polynomial division leaves a nonzero remainder")
        return Polynomial(quot)

    # -- evaluation -------------------------------------------------------

    def eval_chain(self, signal_derivs: Sequence[float]) -> float:
        """Apply the polynomial in s to a signal given its derivative stack.

        ``signal_derivs[i]`` is the i-th time derivative of the signal at the
        evaluation instant; the result is sum(coeffs[i] * signal_derivs[i]).
        """
        if self.is_zero():
            return 0.0
        if len(signal_derivs) < len(self.coeffs):
            raise InsufficientDerivatives(
                f"need {len(self.coeffs)} derivatives (degree {self.degree}), "
                f"got {len(signal_derivs)}"
            )
        return float(sum(c * float(signal_derivs[i]) for i, c in enumerate(self.coeffs)))

    def eval_chain_series(self, stack: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`eval_chain`; ``stack`` has shape (orders, n)."""
        if self.is_zero():
            return np.zeros(stack.shape[1] if stack.ndim == 2 else 0)
        if stack.shape[0] < len(self.coeffs):
            raise InsufficientDerivatives(
                f"need {len(self.coeffs)} derivative rows, got {stack.shape[0]}"
            )
        out = np.zeros(stack.shape[1])
        for i, c in enumerate(self.coeffs):
            if c != 0.0:
                out += c * stack[i]
        return out

    def __call__(self, value: float) -> float:
        """Evaluate at a scalar (Horner); used for frequency/roots checks."""
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * value + c
        return acc

    # -- comparison / repr ------------------------------------------------

    def almost_equal(self, other: "Polynomial", tol: float = 1e-12) -> bool:
        n = max(len(self.coeffs), len(other.coeffs))
        scale = max([1.0] + [abs(c) for c in self.coeffs + other.coeffs])
        return all(abs(self.coeff(i) - other.coeff(i)) <= tol * scale for i in range(n))

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        if self.is_zero():
            return "Polynomial(0)"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0.0:
                continue
            if i == 0:
                terms.append(f"{c:g}")
            elif i == 1:
                terms.append(f"{c:g}*s")
            else:
                terms.append(f"{c:g}*s^{i}")
        return "Polynomial(" + " + ".join(terms) + ")"


def poly_eval_derivative_chain(pol: Polynomial, signal_derivs: Sequence[float]) -> float:
    """Apply ``pol`` (in the differential operator s) to a derivative stack."""
    return pol.eval_chain(signal_derivs)


class PolyMatrix:
    """Immutable rectangular matrix of :class:`Polynomial` entries."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries: Sequence[Sequence[Polynomial | float]]):
        norm = []
        for row in entries:
            norm.append(
                tuple(
                    e if isinstance(e, Polynomial) else Polynomial([float(e)])
                    for e in row
                )
            )
        if not norm or not norm[0]:
            raise ValueError("PolyMatrix must be non-empty")
        cols = len(norm[0])
        if any(len(r) != cols for r in norm):
            raise ValueError("PolyMatrix rows must have equal length")
        object.__setattr__(self, "rows", len(norm))
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "entries", tuple(norm))

    def __setattr__(self, name, value):
        raise AttributeError("PolyMatrix is immutable")

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i][j]

    @property
    def shape(self):
        return (self.rows, self.cols)

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix(
            [[self.entries[i][j] for i in range(self.rows)] for j in range(self.cols)]
        )

    @property
    def T(self) -> "PolyMatrix":
        return self.transpose()

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = Polynomial()
                for k in range(self.cols):
                    acc = acc + self.entries[i][k] * other.entries[k][j]
                row.append(acc)
            out.append(row)
        return PolyMatrix(out)

    def scale(self, factor: float) -> "PolyMatrix":
        return PolyMatrix(
            [[factor * e for e in row] for row in self.entries]
        )

    def max_coeff(self) -> float:
        """Largest coefficient magnitude over all entries (0 for all-zero)."""
        m = 0.0
        for row in self.entries:
            for e in row:
                for c in e.coeffs:
                    m = max(m, abs(c))
        return m

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_coeff() <= tol

    def max_degree(self) -> int:
        """Largest entry degree; -1 if every entry is zero."""
        d = -1
        for row in self.entries:
            for e in row:
                if not e.is_zero():
                    d = max(d, e.degree)
        return d

    def almost_equal(self, other: "PolyMatrix", tol: float = 1e-12) -> bool:
        if self.shape != other.shape:
            return False
        return all(
            self.entries[i][j].almost_equal(other.entries[i][j], tol)
            for i in range(self.rows)
            for j in range(self.cols)
        )

    def __repr__(self):
        return f"PolyMatrix({self.rows}x{self.cols}, {list(map(list, self.entries))!r})"


def det_2x2(m: PolyMatrix) -> Polynomial:
    """Determinant of a 2x2 polynomial matrix."""
    if m.shape != (2, 2):
        raise ValueError("det_2x2 requires a 2x2 matrix")
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
