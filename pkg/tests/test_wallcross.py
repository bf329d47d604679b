from __future__ import annotations

import dataclasses
from fractions import Fraction

import pytest

from wallx import wallcross as wc
from wallx.cohomology import AmbientRing, FixedPointRing
from wallx.ifunction import ShapeViolation, i0_i1, small_I
from wallx.oracle import oracle_small_J
from wallx.scalars import ScalarField
from wallx.series import NovikovSeries, TruncationSpec, ZSeries
from wallx.target import UnsupportedTarget, hypersurface, projective_space, quintic


@pytest.fixture(scope="module")
def quintic_data():
    I = small_I(quintic(), 2)
    return I, i0_i1(I)


# -- quantum differential operators ---------------------------------------------------

@pytest.mark.parametrize("n", [2, 3])
def test_qde_find_projective(n):
    I = small_I(projective_space(n), 6)
    a = wc.qde_find(I.series, I.ring, n)
    assert a[0].items() == [(((1,), ()), -1)]
    assert all(x.is_zero() for x in a[1:])


def test_qde_trivial_point():
    T = projective_space(1)
    ring = AmbientRing(T)
    J = ZSeries.monomial(T, TruncationSpec(3, 0, -2, 1), 0, value=ring.one)
    a = wc.qde_find(J, ring, 1)
    assert a[0].is_zero()


def test_qde_not_found():
    I = small_I(projective_space(3), 6)
    with pytest.raises(wc.NotFound):
        wc.qde_find(I.series, I.ring, 1)


# -- S operator -----------------------------------------------------------------------------

def test_unitarity_on_p2():
    T = projective_space(3)
    ring = AmbientRing(T)
    rep = wc.unitarity_check(wc.build_S_columns(wc.OracleProvider(ring), 1, 1), ring)
    assert rep.ok


def test_unitarity_fixed_point_p1():
    T = projective_space(2)
    fld = ScalarField.random_specialization(T.n_lambda, with_z=True)
    ring = FixedPointRing(T, fld)
    H = ring.character((1,))
    gammas = [ring.one, H]
    S = [wc.build_S_fixed_point(T, fld, g, 1, 1, [H]) for g in gammas]
    assert wc.unitarity_check_fixed_point(S, ring, gammas).ok


def test_polynomiality_detects_injected_pole():
    T = projective_space(2)
    fld = ScalarField.random_specialization(T.n_lambda, with_z=True)
    ring = FixedPointRing(T, fld)
    S = wc.build_S_fixed_point(T, fld, ring.one, 0, 1)
    assert wc.polynomiality_check(S, fld).ok
    bad = list(S)
    # q/z alone is invisible (it is the shape of a tau shift), q/z^2 is not
    shifted = list(S)
    shifted[0] = shifted[0] + NovikovSeries(T, S[0].trunc, 0, {((1,), ()): 1 / fld.z})
    assert wc.polynomiality_check(shifted, fld).ok
    bad[0] = bad[0] + NovikovSeries(T, bad[0].trunc, 0, {((1,), ()): 1 / fld.z ** 2})
    rep = wc.polynomiality_check(bad, fld)
    assert not rep.ok
    assert rep.violations[0] == (0, (1,), (), 0)


def test_provider_envelope():
    ring = AmbientRing(projective_space(2))
    p = wc.OracleProvider(ring, max_degree=1, max_marks=3)
    with pytest.raises(wc.OutOfEnvelope):
        p.bracket([(ring.one, 0)] * 2, (2,))
    with pytest.raises(wc.OutOfEnvelope):
        p.bracket([(ring.one, 0)] * 4, (1,))


def test_table_provider_matches_oracle():
    ring = AmbientRing(projective_space(2))
    table = {((1,), ((1, 0), (1, 0))): 1}          # <H, H>_{0,2,1} = 1 on P^1
    tp = wc.TableProvider(ring, table)
    H = ring.character((1,))
    assert tp.bracket([(H, 0), (H * 3, 0)], (1,)) == 3


def test_semi_positive_provider_requires_semi_positive():
    T = hypersurface(3, 4)
    ring = AmbientRing(T)
    zero = NovikovSeries(T, TruncationSpec(1), 0, {})
    with pytest.raises(UnsupportedTarget):
        wc.SemiPositiveProvider(ring, zero + 1, zero, "0+")


def test_string_transform_at_infinity_is_identity(quintic_data):
    # fundamental class brackets with beta != 0 vanish for stable maps
    I, _ = quintic_data
    ring = I.ring
    H = ring.character((1,))
    st = wc.string_transform(wc.OracleProvider(ring), t_classes=[H], M=2, D=1)
    assert st == NovikovSeries.t_variable(ring.target, st.trunc, 1, 0, value=H)


def test_string_transform_needs_invertible_gamma():
    ring = AmbientRing(projective_space(2))
    with pytest.raises(wc.InvalidParameter):
        wc.string_transform(wc.ZeroProvider(ring), ring.character((1,)), M=1, D=1)


def test_generalized_string_transform_identity(quintic_data):
    _, asym = quintic_data
    tau = wc.mirror_map_series(asym, AmbientRing(quintic()), "0+", t_classes=[AmbientRing(quintic()).character((1,))])
    coords = [c for c in wc.class_coordinates(tau, AmbientRing(quintic())) if not c.is_zero()]
    back = wc.generalized_string_transform(coords, coords)
    assert back == [NovikovSeries.t_variable(quintic(), coords[0].trunc, 1, 0)]


# -- mirror side ------------------------------------------------------------------------------

def test_mirror_transform_matches_oracle(quintic_data):
    I, asym = quintic_data
    rec = wc.mirror_transform(I, asym)
    J = oracle_small_J(quintic(), 2, ring=I.ring, z_min=I.series.trunc.z_min)
    assert rec.smallJ.with_trunc(J.trunc) == J.with_trunc(rec.smallJ.trunc)
    assert [rec.q_of_Q.get(((d,), ())) for d in (1, 2)] == [1, -770]


def test_mirror_map_rejects_general_type(quintic_data):
    with pytest.raises(ShapeViolation):
        i0_i1(small_I(hypersurface(3, 4), 1))
    _, asym = quintic_data
    fake = dataclasses.replace(asym, target=hypersurface(3, 4))
    with pytest.raises(UnsupportedTarget):
        wc.mirror_map_small(fake)


def test_yukawa_and_instantons():
    I = small_I(quintic(), 3)
    K = wc.yukawa_cy3(I, i0_i1(I), 5, "5/(1-3125*q)")
    n = wc.instanton_numbers(K, 5)
    assert n == {1: 2875, 2: 609250, 3: 317206375}


def test_yukawa_unsupported():
    I = small_I(projective_space(3), 2)
    with pytest.raises(UnsupportedTarget):
        wc.yukawa_cy3(I, i0_i1(I), 1, "1")


def test_parse_bmodel():
    T = quintic()
    Y = wc.parse_bmodel("5/(1-3125*q)", T, TruncationSpec(2))
    assert [Y.get(((d,), ())) for d in range(3)] == [5, 15625, 48828125]


# -- Birkhoff ------------------------------------------------------------------------------------

def test_birkhoff_fano_is_trivial():
    T = projective_space(3)
    I = small_I(T, 2)
    B = wc.birkhoff_induction(I.series, wc.OracleProvider(I.ring), 2)
    assert B.tau.is_zero()
    assert B.P == ZSeries.monomial(T, B.P.trunc, 0, value=I.ring.one)
    assert B.agrees


def test_birkhoff_mod2_at_intermediate_epsilon(quintic_data):
    I, asym = quintic_data
    J = wc.mod2_J(asym, I.ring, Fraction(1, 1), I.series.trunc.z_min)
    B = wc.birkhoff_induction(J, wc.OracleProvider(I.ring), 2, exact=False)
    H = I.ring.character((1,))
    # J_0 = 1 + 120q exactly at eps = 1, so tau = 770q/(1 + 120q)
    assert B.tau.items() == [(((1,), ()), H * 770), (((2,), ()), H * -92400)]
    assert B.agrees is None


def test_semi_positive_identity(quintic_data):
    # J/J0 = S_tau(1) with tau the mirror map
    I, asym = quintic_data
    mm = wc.mirror_map_small(asym)
    H = I.ring.character((1,))
    tau = mm.g[0].map(lambda v: H * v)
    lhs = I.series * asym.I0.invert()
    one = ZSeries.monomial(quintic(), lhs.trunc, 0, value=I.ring.one)
    rhs = wc.apply_S_tau(wc.OracleProvider(I.ring), tau, one, 2, lhs.trunc.z_min)
    assert lhs == rhs


def test_compute_P_on_fano():
    T = projective_space(3)
    I = small_I(T, 2)
    cols = wc.build_S_columns(wc.OracleProvider(I.ring), 0, 2, t_classes=[], z_min=I.series.trunc.z_min - 2)
    P = wc.compute_P_from_J(cols, I.ring, I.series)
    assert P == ZSeries.monomial(T, P.trunc, 0, value=I.ring.one)
