from __future__ import annotations

import itertools
from fractions import Fraction

from wallx.cohomology import AmbientRing, FixedPointRing
from wallx.scalars import ScalarField
from wallx.target import product_p1p1, projective_space, quintic


def test_quintic_pairing_is_twisted():
    ring = AmbientRing(quintic())
    assert ring.size == 4
    for i, j in itertools.product(range(4), repeat=2):
        assert ring.gram[i][j] == (5 if i + j == 3 else 0)


def test_ring_is_associative_and_commutative():
    ring = AmbientRing(product_p1p1())
    basis = [ring.basis_class(i) for i in range(ring.size)]
    for a, b, c in itertools.product(basis, repeat=3):
        assert a * b == b * a
        assert (a * b) * c == a * (b * c)
    H1 = ring.character((1, 0))
    assert (H1 * H1).is_zero()


def test_dual_basis():
    ring = AmbientRing(projective_space(3))
    duals = ring.dual_basis()
    for i in range(ring.size):
        for j in range(ring.size):
            assert ring.pair(ring.basis_class(i), duals[j]) == (1 if i == j else 0)


def test_inverse_of_unipotent_class():
    ring = AmbientRing(projective_space(3))
    x = ring.one + ring.character((1,)) * 2
    assert x * ring.inverse(x) == ring.one


def test_fixed_point_ring_matches_ambient_pairing():
    T = projective_space(3)
    fld = ScalarField(T.n_lambda)
    fp = FixedPointRing(T, fld)
    amb = AmbientRing(T)
    H = fp.character((1,))
    assert fp.integrate(H * H) == fld.one
    assert fp.integrate(fp.one) == fld.zero
    coords = fp.to_ambient(H * H, amb)
    assert coords[amb.size - 1] == fld.one


def test_twisted_fixed_point_pairing():
    T = quintic()
    fld = ScalarField.random_specialization(T.n_lambda)
    fp = FixedPointRing(T, fld)
    H = fp.character((1,))
    assert fp.integrate(H * H * H) == fld.convert(Fraction(5))
