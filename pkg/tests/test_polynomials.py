import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adrflat.errors import InsufficientDerivatives
from adrflat.polynomials import Polynomial, PolyMatrix, det_2x2, poly_eval_derivative_chain


def test_trailing_zeros_trimmed():
    p = Polynomial([1.0, 2.0, 0.0, 0.0])
    assert p.coeffs == (1.0, 2.0)
    assert p.degree == 1


def test_zero_polynomial_degree_flag():
    z = Polynomial([0.0, 0.0])
    assert z.is_zero()
    assert z.degree is None
    assert poly_eval_derivative_chain(z, []) == 0.0


def test_eval_chain_constant():
    assert poly_eval_derivative_chain(Polynomial([1.0]), [3.0, 99.0]) == 3.0


def test_eval_chain_s_squared():
    # s^2 applied to (y, y', y'') = (0, 0, 5) picks the second derivative
    assert poly_eval_derivative_chain(Polynomial([0.0, 0.0, 1.0]), [0.0, 0.0, 5.0]) == 5.0


def test_eval_chain_insufficient():
    with pytest.raises(InsufficientDerivatives):
        poly_eval_derivative_chain(Polynomial([0.0, 0.0, 1.0]), [1.0, 2.0])


def test_mul_known_product():
    # (1 + s)(1 - s) = 1 - s^2
    a = Polynomial([1.0, 1.0])
    b = Polynomial([1.0, -1.0])
    assert (a * b).coeffs == (1.0, 0.0, -1.0)


def test_shift_is_formal_differentiation_of_operand():
    p = Polynomial([2.0, 3.0])
    assert p.shift().coeffs == (0.0, 2.0, 3.0)


def test_divide_exact_roundtrip():
    a = Polynomial([1.0, 2.0, 1.0])  # (1+s)^2
    b = Polynomial([1.0, 1.0])
    q = a.divide_exact(b)
    assert q.almost_equal(b)


def test_divide_exact_rejects_remainder():
    with pytest.raises(ValueError):
        Polynomial([1.0, 0.0, 1.0]).divide_exact(Polynomial([1.0, 1.0]))


def test_divide_by_zero():
    with pytest.raises(ZeroDivisionError):
        Polynomial([1.0]).divide_exact(Polynomial())


coeff_lists = st.lists(
    st.floats(min_value=-5.0, max_value=5.0, allow_nan=False, allow_infinity=False),
    min_size=0,
    max_size=5,
)


@given(coeff_lists, coeff_lists)
@settings(max_examples=60, deadline=None)
def test_mul_commutes(a, b):
    pa, pb = Polynomial(a), Polynomial(b)
    assert (pa * pb).almost_equal(pb * pa)


@given(coeff_lists, coeff_lists)
@settings(max_examples=60, deadline=None)
def test_eval_chain_linear_in_polynomial(a, b):
    pa, pb = Polynomial(a), Polynomial(b)
    stack = np.arange(1.0, 8.0)
    lhs = (pa + pb).eval_chain(stack)
    rhs = pa.eval_chain(stack) + pb.eval_chain(stack)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_polymatrix_matmul_and_det():
    s = Polynomial([0.0, 1.0])
    one = Polynomial([1.0])
    m = PolyMatrix([[s, one], [one, s]])
    assert det_2x2(m).coeffs == (-1.0, 0.0, 1.0)  # s^2 - 1
    prod = m @ m
    assert prod[0, 0].coeffs == (1.0, 0.0, 1.0)  # s^2 + 1
    assert prod[0, 1].coeffs == (0.0, 2.0)  # 2s


def test_polymatrix_shape_validation():
    with pytest.raises(ValueError):
        PolyMatrix([[Polynomial([1.0])], [Polynomial([1.0]), Polynomial([2.0])]])


def test_eval_chain_series_matches_scalar():
    p = Polynomial([1.0, -2.0, 0.5])
    stack = np.random.default_rng(0).normal(size=(3, 7))
    series = p.eval_chain_series(stack)
    for i in range(7):
        assert series[i] == pytest.approx(p.eval_chain(stack[:, i]))
