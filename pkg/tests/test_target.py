from __future__ import annotations

from fractions import Fraction

import pytest

from wallx.target import (EPS_INFINITY, EPS_ZERO_PLUS, TargetValidationError, chamber_truncate,
                          hypersurface, load_target, local_p1, max_surviving_degree, parse_epsilon,
                          parse_target, product_p1p1, projective_space, quintic, walls)
from wallx.series import NovikovSeries, TruncationSpec

TOML_P2 = """
[target]
n_coords = 3
rank = 1
weights = [[1, 1, 1]]
theta = [1]
"""


def test_projective_space_fixed_points_and_orbits():
    T = projective_space(3)
    assert len(T.fixed_points) == 3
    assert len(T.orbits) == 6
    for o in T.orbits:
        assert o.beta == (1,)


def test_tangent_weights_are_differences():
    T = projective_space(3)
    fp = T.fixed_points[0]
    weights = T.tangent_weights(fp)
    assert len(weights) == T.dimension
    for w in weights:
        assert sum(w) == 0 and sorted(w)[0] == -1


def test_grading_and_classification():
    assert projective_space(3).fano_index() == 3
    assert quintic().grading((1,))["twisted_index"] == 0
    assert quintic().is_semi_positive
    assert local_p1().is_semi_positive
    assert hypersurface(4, 3).classify()["kind"] == "fano"


def test_effective_cone_of_product():
    T = product_p1p1()
    assert sorted(T.effective_classes(1)) == [(0, 0), (0, 1), (1, 0)]
    assert not T.is_effective((1, -1))
    assert T.theta_degree((1, 2)) == 3


def test_parse_target_roundtrip(tmp_path):
    p = tmp_path / "p2.toml"
    p.write_text(TOML_P2)
    T = load_target(p)
    assert T.weights == projective_space(3).weights
    assert T.name == "p2"


@pytest.mark.parametrize("text", [
    "[target]\nweights=[[1,1]]\ntheta=[1.5]",
    "[target]\nweights=[[1,1]]\ntheta=[-1]",
    "[target]\nrank=2\nweights=[[1,1]]\ntheta=[1]",
    "weights=[[1,1]]",
    "[target\n",
])
def test_parse_target_rejects(text):
    with pytest.raises(TargetValidationError):
        parse_target(text)


def test_epsilon_parsing():
    assert parse_epsilon("0+") == EPS_ZERO_PLUS
    assert parse_epsilon("inf") == EPS_INFINITY
    assert parse_epsilon("1/3") == Fraction(1, 3)
    with pytest.raises(ValueError):
        parse_epsilon("-1")


def test_max_surviving_degree():
    assert max_surviving_degree("0+") is None
    assert max_surviving_degree("inf") == 0
    assert max_surviving_degree(Fraction(2)) == 0
    assert max_surviving_degree(Fraction(1, 2)) == 2
    assert max_surviving_degree(Fraction(2, 5)) == 2
    assert walls(3) == [1, Fraction(1, 2), Fraction(1, 3)]


def test_chamber_truncate_on_walls():
    T = projective_space(2)
    s = NovikovSeries(T, TruncationSpec(3), 0, {((d,), ()): d + 1 for d in range(4)})
    assert len(chamber_truncate(s, Fraction(1, 2))) == 3
    assert len(chamber_truncate(s, Fraction(11, 20))) == 2
    assert len(chamber_truncate(s, EPS_ZERO_PLUS)) == 4
