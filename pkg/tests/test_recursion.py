from __future__ import annotations

import pytest

from wallx.ifunction import small_I_fixed_point
from wallx.recursion import (ReconstructionError, recursion_data, recursion_reconstruct,
                             uniqueness_reconstruct)
from wallx.scalars import ScalarField
from wallx.series import NovikovSeries, TruncationSpec
from wallx.target import projective_space


def _fixed_point_lists(T, I, D):
    out = []
    for mu in range(len(T.fixed_points)):
        coeffs = {(beta, ()): I.series.get((beta, ())).coeffs[mu] for beta in T.effective_classes(D)}
        out.append(NovikovSeries(T, TruncationSpec(D), 0, coeffs))
    return out


def test_p1_reconstruction_symbolic():
    T = projective_space(2)
    fld = ScalarField(T.n_lambda, with_z=True)
    D = 2
    initial = [NovikovSeries(T, TruncationSpec(D), 0, {}) for _ in T.fixed_points]
    S = recursion_reconstruct(T, initial, D, fld)
    assert S == _fixed_point_lists(T, small_I_fixed_point(T, D, fld), D)


def test_reconstruction_is_idempotent():
    T = projective_space(3)
    fld = ScalarField.random_specialization(T.n_lambda, with_z=True, seed=3)
    D = 2
    truth = _fixed_point_lists(T, small_I_fixed_point(T, D, fld), D)
    again = recursion_reconstruct(T, truth, D, fld)
    assert again == truth


def test_recursion_data_covers_orbits():
    T = projective_space(3)
    fld = ScalarField.random_specialization(T.n_lambda)
    data = recursion_data(T, fld, 2)
    assert all(len(v) == 2 * 2 for v in data.values())


def test_positive_z_powers_rejected():
    T = projective_space(2)
    fld = ScalarField.random_specialization(T.n_lambda, with_z=True)
    trunc = TruncationSpec(1)
    initial = [NovikovSeries(T, trunc, 0, {((1,), ()): fld.z}) for _ in T.fixed_points]
    with pytest.raises(ReconstructionError):
        recursion_reconstruct(T, initial, 1, fld)


def test_base_must_have_constant_lead():
    T = projective_space(2)
    fld = ScalarField.random_specialization(T.n_lambda, with_z=True)
    trunc = TruncationSpec(1)
    base = [NovikovSeries(T, trunc, 0, {((0,), ()): fld.z}) for _ in T.fixed_points]
    initial = [NovikovSeries(T, trunc, 0, {}) for _ in T.fixed_points]
    with pytest.raises(ReconstructionError):
        uniqueness_reconstruct(T, initial, recursion_data(T, fld, 1), base, fld, trunc)
