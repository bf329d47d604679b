from __future__ import annotations

from fractions import Fraction

import pytest

from wallx.cohomology import AmbientRing
from wallx.ifunction import (InvalidTwist, ShapeViolation, epsilon_J0_J1, fixed_point_to_ambient_limit,
                             i0_i1, i_coefficient, small_I, small_I_fixed_point)
from wallx.oracle import oracle_small_J
from wallx.scalars import ScalarField
from wallx.target import TargetValidationError, ToricTarget, local_p1, product_p1p1, projective_space, quintic


def test_p1_coefficients():
    I = small_I(projective_space(2), 2)
    ring = I.ring
    H = ring.character((1,))
    c1 = I.coefficient((1,))
    # 1/(H+z)^2 = z^-2 - 2H z^-3
    assert c1 == {-2: ring.one, -3: H * -2}


def test_quintic_mirror_data():
    asym = i0_i1(small_I(quintic(), 2))
    assert [asym.I0.get(((d,), ())) for d in range(3)] == [1, 120, 113400]
    assert asym.f[0].get(((1,), ())) == 770
    assert asym.f0.is_zero()


@pytest.mark.parametrize("n", [2, 3])
def test_equivariant_limit_matches_ambient(n):
    T = projective_space(n)
    fld = ScalarField(T.n_lambda, with_z=True)
    Ieq = small_I_fixed_point(T, 3, fld)
    I = small_I(T, 3)
    for beta in T.effective_classes(3):
        lim = fixed_point_to_ambient_limit(Ieq.series.get((beta, ())), I.ring, I.series.trunc.z_min)
        assert lim == I.coefficient(beta)


def test_relaxed_classes_vanish():
    T = product_p1p1()
    ring = AmbientRing(T)
    for beta in T.relaxed_classes(3):
        if not T.is_effective(beta):
            assert i_coefficient(T, ring, beta) == {}


def test_local_p1_is_trivial_mod_z2():
    asym = i0_i1(small_I(local_p1(), 4))
    assert [asym.I0.get(((d,), ())) for d in range(5)] == [1, 0, 0, 0, 0]
    assert asym.I1.is_zero()


def test_i_matches_oracle_j_for_fano():
    T = projective_space(3)
    I = small_I(T, 2)
    J = oracle_small_J(T, 2, ring=I.ring, z_min=I.series.trunc.z_min)
    assert J.with_trunc(I.series.trunc) == I.series


def test_epsilon_truncation():
    asym = i0_i1(small_I(quintic(), 3))
    J0, J1 = epsilon_J0_J1(asym, Fraction(1, 2))
    assert [J0.get(((d,), ())) for d in range(4)] == [1, 120, 113400, 0]
    J0inf, J1inf = epsilon_J0_J1(asym, "inf")
    assert J0inf == 1 and J1inf.is_zero()


def test_negative_convex_twist_is_rejected():
    with pytest.raises(TargetValidationError):
        ToricTarget(((1, 1),), (1,), convex=((-1,),)).validate()
    unchecked = ToricTarget(((1, 1),), (1,), convex=((-1,),))
    with pytest.raises(InvalidTwist):
        i_coefficient(unchecked, AmbientRing(projective_space(2)), (1,))


def test_shape_violation_is_reported():
    I = small_I(quintic(), 1)
    extra = I.series.__class__(I.target, I.series.trunc, 0, {((1,), (), 0): I.ring.character((1,))})
    I.series = I.series + extra
    with pytest.raises(ShapeViolation):
        i0_i1(I)
