from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from wallx.cohomology import AmbientRing
from wallx.scalars import IncompatibleOperands, NotInvertible, ScalarField
from wallx.series import (InvalidTransformation, NovikovSeries, TruncationSpec, ZSeries,
                          exp_t_over_z, invert_novikov_shift, invert_transformation,
                          series_from_json)
from wallx.target import product_p1p1, projective_space

T = projective_space(2)
TRUNC = TruncationSpec(3, 2)
small = st.fractions(min_value=-9, max_value=9, max_denominator=7)


@st.composite
def novikov(draw, n_t=1, unit=None):
    coeffs = {}
    for d in range(TRUNC.max_theta_degree + 1):
        for m in range(TRUNC.max_t_degree + 1):
            k = (m,) if n_t == 1 else ()
            if n_t == 0 and m:
                continue
            coeffs[((d,), k)] = draw(small)
    if unit is not None:
        coeffs[((0,), (0,) * n_t)] = unit
    return NovikovSeries(T, TRUNC, n_t, coeffs)


@settings(max_examples=30, deadline=None)
@given(novikov(), novikov(), novikov())
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a


@settings(max_examples=30, deadline=None)
@given(novikov(unit=Fraction(3, 2)))
def test_invert(a):
    assert a * a.invert() == a.one_like()


def test_invert_needs_unit():
    a = NovikovSeries(T, TRUNC, 1, {((1,), (0,)): 1})
    with pytest.raises(NotInvertible):
        a.invert()


def test_quintic_I0_inverse():
    s = NovikovSeries(T, TruncationSpec(2), 0, {((0,), ()): 1, ((1,), ()): 120, ((2,), ()): 113400})
    inv = s.invert()
    assert [inv.get(((d,), ())) for d in range(3)] == [1, -120, -99000]


def test_incompatible_operands():
    a = NovikovSeries(T, TRUNC, 1, {})
    b = NovikovSeries(T, TRUNC, 0, {})
    with pytest.raises(IncompatibleOperands):
        a + b
    with pytest.raises(IncompatibleOperands):
        NovikovSeries(product_p1p1(), TRUNC, 1, {}) + a


def test_truncation_drops_high_terms():
    a = NovikovSeries(T, TruncationSpec(1), 0, {((1,), ()): 1})
    assert (a * a).is_zero()


def test_exp_t_over_z_is_a_group_law():
    ring = AmbientRing(T)
    H = ring.character((1,))
    trunc = TruncationSpec(0, 3, -6, 0)
    e = exp_t_over_z(T, trunc, [ring.one, H], ring.one)
    minus = exp_t_over_z(T, trunc, [-ring.one, -H], ring.one)
    assert e * minus == ZSeries.monomial(T, trunc, 2, value=ring.one)


@settings(max_examples=20, deadline=None)
@given(st.lists(small, min_size=3, max_size=3))
def test_transformation_inverse_roundtrip(cs):
    tr = TruncationSpec(3, 3)
    t = NovikovSeries.t_variable(T, tr, 1, 0)
    tau = t + NovikovSeries(T, tr, 1, {((1,), (0,)): cs[0], ((1,), (1,)): cs[1], ((2,), (2,)): cs[2]})
    sigma = invert_transformation([tau])
    assert tau.substitute_t(sigma) == t
    assert sigma[0].substitute_t([tau]) == t


def test_substitute_t_rejects_bad_shape():
    tr = TruncationSpec(2, 2)
    bad = NovikovSeries.t_variable(T, tr, 1, 0, value=2)
    with pytest.raises(InvalidTransformation):
        NovikovSeries.t_variable(T, tr, 1, 0).substitute_t([bad])


@settings(max_examples=20, deadline=None)
@given(st.lists(small, min_size=3, max_size=3), novikov(n_t=0))
def test_novikov_shift_roundtrip(cs, a):
    tr = TruncationSpec(3)
    g = NovikovSeries(T, tr, 0, {((d + 1,), ()): c for d, c in enumerate(cs)})
    a = a.with_trunc(tr)
    h = invert_novikov_shift([g])
    assert a.substitute_novikov([g]).substitute_novikov(h) == a


def test_z_helpers():
    trunc = TruncationSpec(1, 0, -4, 2)
    s = ZSeries(T, trunc, 0, {((0,), (), 1): 1, ((0,), (), -1): 2, ((1,), (), -3): 5})
    assert s.z_negate().get(((0,), (), -1)) == -2
    assert s.z_truncate_mod(2).keys() == [((0,), (), -1), ((0,), (), 1)]
    assert s.z_regular_check() == [((0,), ()), ((1,), ())]
    assert s.nonnegative_part().keys() == [((0,), (), 1)]


def test_json_roundtrip_classes_and_ratfuncs():
    ring = AmbientRing(T)
    s = ZSeries(T, TruncationSpec(2, 0, -5, 0), 0,
                {((0,), (), 0): ring.one, ((1,), (), -2): ring.character((1,)) * Fraction(-3, 7)})
    back = series_from_json(s.dumps(basis_labels=ring.labels), T, ring=ring)
    assert back == s
    assert back.dumps() == s.dumps()
    fld = ScalarField(2, with_z=True)
    r = NovikovSeries(T, TruncationSpec(1), 0, {((1,), ()): fld.lam(0) / (fld.z - fld.lam(1))})
    assert series_from_json(r.to_json(), T, fld=fld) == r


def test_dumps_is_deterministic():
    a = NovikovSeries(T, TRUNC, 1, {((2,), (1,)): Fraction(1, 3), ((0,), (0,)): 1})
    b = NovikovSeries(T, TRUNC, 1, {((0,), (0,)): 1, ((2,), (1,)): Fraction(2, 6)})
    assert a.dumps() == b.dumps()
