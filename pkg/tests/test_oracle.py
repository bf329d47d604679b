from __future__ import annotations

from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given, strategies as st

from wallx.ifunction import small_I_fixed_point
from wallx.oracle import (DegenerateOrbit, UnstableModuli, edge_factor, gw_invariant, labelled_trees,
                          oracle_J_fixed_point, parse_insertion, recursion_coefficient, psi_integral, virtual_dimension)
from wallx.scalars import ScalarField
from wallx.target import local_p1, product_p1p1, projective_space, quintic


@given(st.lists(st.integers(min_value=0, max_value=3), min_size=3, max_size=7))
def test_psi_integral_is_multinomial(a):
    n = len(a)
    value = psi_integral(a)
    if sum(a) != n - 3:
        assert value == 0
    else:
        expected = Fraction(factorial(n - 3))
        for x in a:
            expected /= factorial(x)
        assert value == expected


def test_psi_integral_unstable():
    with pytest.raises(UnstableModuli):
        psi_integral([0, 0])


@pytest.mark.parametrize("V", [1, 2, 3, 4, 5])
def test_cayley_count(V):
    assert sum(1 for _ in labelled_trees(V)) == max(V ** (V - 2), 1)


@pytest.mark.parametrize("target, ins, beta, expected", [
    (projective_space(3), ["pt", "pt"], (1,), 1),
    (projective_space(3), ["pt"] * 5, (2,), 1),
    (product_p1p1(), ["pt"] * 3, (1, 1), 1),
    (quintic(), ["H", "H", "H"], (1,), 2875),
    (local_p1(), ["H"], (1,), 1),
    (local_p1(), ["H"], (2,), Fraction(1, 4)),
])
def test_known_invariants(target, ins, beta, expected):
    exps = [parse_insertion(s, target) for s in ins]
    assert gw_invariant(target, exps, None, beta) == expected


def test_dimension_filter():
    T = projective_space(3)
    assert virtual_dimension(T, (1,), 2) == 4
    assert gw_invariant(T, [(1,), (1,)], [1, 0], (1,)) == 0


def test_degree_bound():
    with pytest.raises(ValueError):
        gw_invariant(projective_space(3), [(2,)] * 8, None, (3,), bound=2)


def test_parse_insertion():
    T = product_p1p1()
    assert parse_insertion("H1*H2", T) == (1, 1)
    assert parse_insertion("1", T) == (0, 0)
    with pytest.raises(ValueError):
        parse_insertion("K", T)


def test_recursion_coefficient_on_p1():
    # on P^1 the degree-1 coefficient is -1/w with w the tangent weight at the start
    T = projective_space(2)
    fld = ScalarField(T.n_lambda)
    o = T.orbits[0]
    w = fld.linear_form(T.divisor_weight(T.fixed_points[o.start], o.direction))
    assert recursion_coefficient(T, o, 1, fld) == -1 / w


def test_degenerate_orbit_detected():
    from wallx.target import Orbit
    T = projective_space(2)
    fld = ScalarField(T.n_lambda)
    bogus = Orbit(0, 0, (1,), 0)
    with pytest.raises(DegenerateOrbit):
        edge_factor(T, bogus, 1, fld)


def test_fixed_point_j_equals_i_on_p1():
    T = projective_space(2)
    fld = ScalarField(T.n_lambda, with_z=True)
    J = oracle_J_fixed_point(T, 2, fld)
    I = small_I_fixed_point(T, 2, fld)
    for beta in T.effective_classes(2):
        assert J.get((beta, ())).coeffs == I.series.get((beta, ())).coeffs
