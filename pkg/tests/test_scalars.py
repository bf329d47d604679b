from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from wallx.scalars import (InconsistentSystem, ScalarField, UnderdeterminedSystem, fmt_rational,
                           has_pole_at_zero, laurent_at_infinity, laurent_at_zero,
                           principal_part_at_zero, solve_linear, substitute_z)

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=30)


def test_fmt_rational_is_lowest_terms():
    assert fmt_rational(Fraction(6, -4)) == "-3/2"
    assert fmt_rational(Fraction(0)) == "0/1"


@given(fractions)
def test_field_inverse_in_symbolic_field(a):
    fld = ScalarField(2, with_z=True)
    x = fld.convert(a) + fld.lam(0) * fld.z - fld.lam(1)
    assert x * (1 / x) == fld.one


def test_random_specialization_is_reproducible():
    a = ScalarField.random_specialization(3, seed=7)
    b = ScalarField.random_specialization(3, seed=7)
    assert a.lam_values == b.lam_values


def test_linear_form():
    fld = ScalarField(2)
    assert fld.linear_form([Fraction(2), Fraction(-1)]) == 2 * fld.lam(0) - fld.lam(1)


def test_laurent_expansions():
    fld = ScalarField(0, with_z=True)
    z = fld.z
    f = 1 / (z + 2)
    inf = laurent_at_infinity(f, -3)
    assert inf == {-1: 1, -2: -2, -3: 4}
    zero = laurent_at_zero(f, 2)
    assert zero == {0: fld.convert(Fraction(1, 2)), 1: fld.convert(Fraction(-1, 4)), 2: fld.convert(Fraction(1, 8))}


def test_principal_part_and_poles():
    fld = ScalarField(0, with_z=True)
    z = fld.z
    f = (z + 1) / z ** 2
    assert has_pole_at_zero(f)
    assert principal_part_at_zero(f) == {-2: 1, -1: 1}
    assert principal_part_at_zero(z + 3) == {}


def test_substitute_z():
    fld = ScalarField(1, with_z=True)
    z, l = fld.z, fld.lam(0)
    assert substitute_z(z ** 2 + l, -z) == z ** 2 + l
    assert substitute_z(1 / (z - l), l + 1) == fld.one
    with pytest.raises(ZeroDivisionError):
        substitute_z(1 / (z - l), l)


@settings(max_examples=40)
@given(st.lists(st.lists(fractions, min_size=3, max_size=3), min_size=3, max_size=3), st.lists(fractions, min_size=3, max_size=3))
def test_solve_linear_property(rows, x):
    rhs = [sum(a * b for a, b in zip(r, x)) for r in rows]
    try:
        sol = solve_linear(rows, rhs, zero=Fraction(0))
    except UnderdeterminedSystem:
        return
    assert sol == x


def test_solve_linear_errors():
    with pytest.raises(InconsistentSystem):
        solve_linear([[1, 1], [2, 2]], [Fraction(1), Fraction(3)])
    with pytest.raises(UnderdeterminedSystem):
        solve_linear([[1, 1]], [Fraction(1)])
