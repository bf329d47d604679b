"""Small hypergeometric I-functions and their 1/z asymptotics."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .cohomology import AmbientRing, CohClass, FixedPointRing
from .scalars import ScalarField, is_zero, laurent_at_infinity
from .series import NovikovSeries, TruncationSpec, ZSeries
from .target import ToricTarget, chamber_truncate


class InvalidTwist(ValueError):
    pass


class ShapeViolation(ArithmeticError):
    pass


@dataclass
class SmallIFunction:
    target: ToricTarget
    series: Any  # ZSeries (ambient) or NovikovSeries with K(z) values (fixed-point)
    ring: Any
    equivariant: bool = False
    fld: ScalarField | None = None

    @property
    def twist_mode(self) -> str:
        if self.target.convex:
            return "convex"
        if self.target.concave:
            return "concave"
        return "none"

    def coefficient(self, beta) -> Any:
        """q^beta coefficient: dict z-exponent -> class (ambient) or a class over K(z)."""
        if self.equivariant:
            return self.series.get((beta, ()), self.ring.zero)
        return {k[2]: v for k, v in self.series.items() if k[0] == tuple(beta)}


@dataclass
class IAsymptotics:
    target: ToricTarget
    I0: NovikovSeries
    I1: NovikovSeries
    f0: NovikovSeries
    f: list[NovikovSeries] = field(default_factory=list)
    h2_labels: list[str] = field(default_factory=list)
    h2_chars: list[tuple[int, ...]] = field(default_factory=list)


# -- Laurent polynomials in z with class coefficients (non-equivariant) ---------

def _lp_mul(a: dict[int, CohClass], b: dict[int, CohClass]) -> dict[int, CohClass]:
    out: dict[int, CohClass] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            p = ca * cb
            if p.is_zero():
                continue
            e = ea + eb
            out[e] = out[e] + p if e in out else p
    return {e: c for e, c in out.items() if not c.is_zero()}


def _linear(ring, cls: CohClass, m: int) -> dict[int, CohClass]:
    """cls + m z."""
    out = {}
    if not cls.is_zero():
        out[0] = cls
    if m:
        out[1] = ring.one * m
    return out


def _inv_linear(ring, cls: CohClass, m: int) -> dict[int, CohClass]:
    """(cls + m z)^{-1} = sum_k (-cls)^k / (m z)^{k+1}; cls is nilpotent."""
    out = {}
    term = ring.one * Fraction(1, m)
    k = 0
    while not term.is_zero():
        out[-(k + 1)] = term
        term = term * (-cls) * Fraction(1, m)
        k += 1
        if k > ring.dim + 1:
            break
    return out


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _check_twists(T: ToricTarget, beta):
    for a, eps in enumerate(T.convex):
        if _dot(beta, eps) < 0:
            raise InvalidTwist(f"convex twist {a + 1} has negative degree on effective class {beta}")


def default_truncation(T: ToricTarget, max_degree: int) -> TruncationSpec:
    """A z-window wide enough to hold every I coefficient exactly."""
    worst = max((T.grading(b)["twisted_index"] for b in T.effective_classes(max_degree)), default=0)
    return TruncationSpec(max_degree, 0, -T.dimension - max(worst, 0) - 1, 1)


def i_coefficient(T: ToricTarget, ring: AmbientRing, beta) -> dict[int, CohClass]:
    """The q^beta coefficient of the non-equivariant I as z-exponent -> class.

    Works for any integer class; outside the effective cone the product
    contains a vanishing monomial and the result is empty.
    """
    beta = tuple(beta)
    _check_twists(T, beta)
    acc: dict[int, CohClass] = {0: ring.one}
    for i in range(T.n_coords):
        Di = ring.divisor(i)
        d = _dot(beta, T.column(i))
        if d >= 0:
            for m in range(1, d + 1):
                acc = _lp_mul(acc, _inv_linear(ring, Di, m))
        else:
            for m in range(0, -d):
                acc = _lp_mul(acc, _linear(ring, Di, -m))
        if not acc:
            return {}
    for a, eps in enumerate(T.convex):
        E = ring.character(eps)
        for m in range(1, _dot(beta, eps) + 1):
            acc = _lp_mul(acc, _linear(ring, E, m))
    for a, eps in enumerate(T.concave):
        E = ring.character(eps)
        for m in range(_dot(beta, eps) + 1, 0):
            acc = _lp_mul(acc, _linear(ring, E, m))
    return acc


def small_I(T: ToricTarget, trunc: TruncationSpec | int, *, ring: AmbientRing | None = None) -> SmallIFunction:
    """Non-equivariant small I in the ambient monomial basis."""
    if isinstance(trunc, int):
        trunc = default_truncation(T, trunc)
    ring = ring or AmbientRing(T, twisted=bool(T.convex))
    coeffs: dict = {}
    for beta in T.effective_classes(trunc.max_theta_degree):
        for e, c in i_coefficient(T, ring, beta).items():
            coeffs[(beta, (), e)] = c
    return SmallIFunction(T, ZSeries(T, trunc, 0, coeffs), ring)


def small_I_fixed_point(T: ToricTarget, max_degree: int, fld: ScalarField,
                        ring: FixedPointRing | None = None) -> SmallIFunction:
    """Equivariant small I restricted to the fixed points, exact in z.

    ``fld`` must have z adjoined; each coefficient is a class over K(z).
    """
    ring = ring or FixedPointRing(T, fld)
    z = fld.z
    trunc = TruncationSpec(max_degree)
    coeffs: dict = {}
    for beta in T.effective_classes(max_degree):
        _check_twists(T, beta)
        vals = []
        for fp in T.fixed_points:
            v = fld.one
            for i in range(T.n_coords):
                Di = fld.linear_form(T.divisor_weight(fp, i))
                d = _dot(beta, T.column(i))
                if d >= 0:
                    for m in range(1, d + 1):
                        v = v / (Di + m * z)
                else:
                    for m in range(0, -d):
                        v = v * (Di - m * z)
            for a, eps in enumerate(T.convex):
                E = fld.linear_form(T.convex_weight(fp, a))
                for m in range(1, _dot(beta, eps) + 1):
                    v = v * (E + m * z)
            for a, eps in enumerate(T.concave):
                E = fld.linear_form(T.concave_weight(fp, a))
                for m in range(_dot(beta, eps) + 1, 0):
                    v = v * (E + m * z)
            vals.append(v)
        coeffs[(beta, ())] = CohClass(ring, vals)
    return SmallIFunction(T, NovikovSeries(T, trunc, 0, coeffs), ring, equivariant=True, fld=fld)


def fixed_point_to_ambient_limit(value: CohClass, ambient: AmbientRing, z_min: int) -> dict[int, CohClass]:
    """Non-equivariant limit of a K(z)-class, as z-exponent -> ambient class."""
    fpring: FixedPointRing = value.ring
    fld = fpring.field
    coords = fpring.to_ambient(value, ambient)
    out: dict[int, list] = {}
    for j, c in enumerate(coords):
        c0 = fld.subs_lambda_zero(c)
        for e, v in laurent_at_infinity(c0, z_min).items():
            from .scalars import as_fraction
            out.setdefault(e, [Fraction(0)] * ambient.size)[j] = as_fraction(v)
    return {e: CohClass(ambient, v) for e, v in out.items() if any(v)}


def i0_i1(I: SmallIFunction, *, check_shape: bool = True) -> IAsymptotics:
    T = I.target
    ring = I.ring
    s: ZSeries = I.series
    if I.equivariant:
        raise ValueError("asymptotics are taken from the non-equivariant I")
    trunc = TruncationSpec(s.trunc.max_theta_degree)
    i0, i1, f0 = {}, {}, {}
    h2 = [i for i, d in enumerate(ring.degrees) if d == 1]
    fs: list[dict] = [{} for _ in h2]
    semi = T.is_semi_positive
    for (beta, k, e), val in s.items():
        if e == 0:
            if any(not is_zero(c) for c, d in zip(val.coeffs, ring.degrees) if d > 0):
                raise ShapeViolation(f"z^0 coefficient at {beta} is not a multiple of 1")
            i0[(beta, k)] = val.coeffs[0]
        elif e == -1:
            if check_shape and semi and any(not is_zero(c) for c, d in zip(val.coeffs, ring.degrees) if d > 1):
                raise ShapeViolation(f"z^-1 coefficient at {beta} leaves H^<=2")
            i1[(beta, k)] = val
            f0[(beta, k)] = val.coeffs[0]
            for j, idx in enumerate(h2):
                fs[j][(beta, k)] = val.coeffs[idx]
    chars = []
    for idx in h2:
        chars.append(ring.monomials[idx])
    return IAsymptotics(T, NovikovSeries(T, trunc, 0, i0), NovikovSeries(T, trunc, 0, i1),
                        NovikovSeries(T, trunc, 0, f0), [NovikovSeries(T, trunc, 0, f) for f in fs],
                        [ring.labels[i] for i in h2], chars)


def epsilon_J0_J1(asym: IAsymptotics, eps) -> tuple[NovikovSeries, NovikovSeries]:
    return chamber_truncate(asym.I0, eps), chamber_truncate(asym.I1, eps)
