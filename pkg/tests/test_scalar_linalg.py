from fractions import Fraction

import pytest

from linqm import linalg
from linqm.scalar import I, ONE, ZERO, Scalar, rational_sqrt


def test_exact_arithmetic():
    a = Scalar(Fraction(1, 3), Fraction(2))
    b = Scalar(Fraction(-1, 2), Fraction(1, 6))
    assert a + b == Scalar(Fraction(-1, 6), Fraction(13, 6))
    assert a * b == Scalar(Fraction(1, 3) * Fraction(-1, 2) - Fraction(2) * Fraction(1, 6),
                           Fraction(1, 3) * Fraction(1, 6) + Fraction(2) * Fraction(-1, 2))
    assert (a / b) * b == a
    assert a - a == ZERO
    assert -a + a == ZERO


def test_conjugate_and_units():
    assert I * I == -ONE
    assert I.conjugate() == -I
    assert Scalar(Fraction(3, 4)).conjugate() == Scalar(Fraction(3, 4))


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        ONE / ZERO


def test_str_forms():
    assert str(Scalar(Fraction(1, 2))) == "1/2"
    assert str(I) == "i"
    assert str(-I) == "-i"
    assert str(Scalar(Fraction(1), Fraction(-2))) == "1-2i"
    assert str(ZERO) == "0"


def test_rational_sqrt():
    assert rational_sqrt(Fraction(9, 4)) == Fraction(3, 2)
    assert rational_sqrt(Fraction(2)) is None
    assert rational_sqrt(Fraction(0)) == Fraction(0)
    assert rational_sqrt(Fraction(-1)) is None


def _mat(rows):
    return [[Scalar.of(Fraction(x)) if not isinstance(x, Scalar) else x
             for x in row] for row in rows]


def test_invert_and_multiply():
    m = _mat([[1, 2], [3, 5]])
    inv = linalg.invert(m)
    assert linalg.mat_mul(m, inv) == linalg.identity(2)
    singular = _mat([[1, 2], [2, 4]])
    assert linalg.invert(singular) is None


def test_solve_and_nullspace():
    a = _mat([[1, 2, 3], [2, 4, 6]])
    b = [Scalar.of(6), Scalar.of(12)]
    x = linalg.solve(a, b)
    assert x is not None
    assert linalg.mat_vec(a, x) == b
    basis = linalg.nullspace(a)
    assert len(basis) == 2
    for v in basis:
        assert all(e.is_zero for e in linalg.mat_vec(a, v))
    assert linalg.solve(a, [Scalar.of(1), Scalar.of(1)]) is None
