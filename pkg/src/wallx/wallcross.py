"""S-operators, Birkhoff factorization, mirror maps and related checks.

Non-equivariant objects live in the ambient basis of ``AmbientRing`` and are
``ZSeries`` with class values.  The fixed-point variants work with one Novikov
series per fixed point whose coefficients are exact rational functions of z.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import sympy

from .cohomology import AmbientRing, CohClass, FixedPointRing
from .ifunction import IAsymptotics, SmallIFunction
from .oracle import (DEFAULT_DEGREE_BOUND, ClassMarking, DescendantMarking, GraphSum, gw_invariant,
                     virtual_dimension)
from .recursion import d_series_polar, recursion_reconstruct, uniqueness_reconstruct  # noqa: F401
from .scalars import (InconsistentSystem, ScalarField, UnderdeterminedSystem, is_zero,
                      solve_linear, substitute_z)
from .series import (NovikovSeries, TruncationSpec, ZSeries, invert_novikov_shift,
                     invert_transformation)
from .target import ToricTarget, UnsupportedTarget, parse_epsilon, EPS_INFINITY


class OutOfEnvelope(ValueError):
    pass


class InvalidParameter(ValueError):
    pass


class NotFound(ArithmeticError):
    pass


class Inconsistency(ArithmeticError):
    pass


# -- providers -------------------------------------------------------------------

Insertion = tuple[CohClass, int]


class InvariantProvider:
    """Source of non-equivariant brackets <c_1 psi^a_1, ..., c_k psi^a_k>_{0,k,beta}."""

    name = "abstract"
    max_degree: int | None = None
    max_marks: int | None = None
    epsilon: Any = EPS_INFINITY

    def check_envelope(self, insertions: Sequence[Insertion], beta) -> None:
        d = sum(beta) if self.ring is None else self.ring.target.theta_degree(beta)
        if self.max_degree is not None and d > self.max_degree:
            raise OutOfEnvelope(f"{self.name}: degree {d} beyond {self.max_degree}")
        if self.max_marks is not None and len(insertions) > self.max_marks:
            raise OutOfEnvelope(f"{self.name}: {len(insertions)} markings beyond {self.max_marks}")

    ring: AmbientRing | None = None

    def bracket(self, insertions: Sequence[Insertion], beta) -> Fraction:
        raise NotImplementedError


class OracleProvider(InvariantProvider):
    """Stable-map brackets from the localization graph sum."""

    name = "oracle"

    def __init__(self, ring: AmbientRing, max_degree: int = DEFAULT_DEGREE_BOUND,
                 max_marks: int | None = None, check_seeds: Sequence[int] = (1,)):
        self.ring = ring
        self.T = ring.target
        self.max_degree = max_degree
        self.max_marks = max_marks
        self.check_seeds = tuple(check_seeds)
        self._cache: dict = {}

    def primitive(self, monomials: Sequence[tuple[int, ...]], psi: Sequence[int], beta) -> Fraction:
        pairs = tuple(sorted(zip(monomials, psi)))
        key = (pairs, tuple(beta))
        if key not in self._cache:
            self._cache[key] = gw_invariant(self.T, [p[0] for p in pairs], [p[1] for p in pairs], beta,
                                            bound=self.max_degree, check_seeds=self.check_seeds)
        return self._cache[key]

    def bracket(self, insertions: Sequence[Insertion], beta) -> Fraction:
        beta = tuple(beta)
        self.check_envelope(insertions, beta)
        ring = self.ring
        vd = virtual_dimension(self.T, beta, len(insertions))
        choices = [[(j, c) for j, c in enumerate(cls.coeffs) if c] for cls, _ in insertions]
        psis = [a for _, a in insertions]
        total = Fraction(0)
        for combo in itertools.product(*choices):
            if sum(ring.degrees[j] for j, _ in combo) + sum(psis) != vd:
                continue
            coef = Fraction(1)
            for _, c in combo:
                coef *= c
            total += coef * self.primitive([ring.monomials[j] for j, _ in combo], psis, beta)
        return total


class TableProvider(InvariantProvider):
    """Brackets from a user table keyed by (beta, ((basis index, psi), ...)) in sorted order."""

    name = "table"

    def __init__(self, ring: AmbientRing, table: dict, max_degree: int | None = None,
                 max_marks: int | None = None):
        self.ring = ring
        self.table = {(tuple(b), tuple(sorted(tuple(x) for x in ins))): Fraction(v)
                      for (b, ins), v in table.items()}
        self.max_degree = max_degree
        self.max_marks = max_marks

    def bracket(self, insertions, beta) -> Fraction:
        beta = tuple(beta)
        self.check_envelope(insertions, beta)
        choices = [[(j, c) for j, c in enumerate(cls.coeffs) if c] for cls, _ in insertions]
        total = Fraction(0)
        for combo in itertools.product(*choices):
            key = (beta, tuple(sorted((j, a) for (j, _), (_, a) in zip(combo, insertions))))
            coef = Fraction(1)
            for _, c in combo:
                coef *= c
            total += coef * self.table.get(key, Fraction(0))
        return total


class ZeroProvider(InvariantProvider):
    """All brackets with beta != 0 vanish."""

    name = "zero"

    def __init__(self, ring: AmbientRing):
        self.ring = ring

    def bracket(self, insertions, beta) -> Fraction:
        return Fraction(0)


class SemiPositiveProvider(InvariantProvider):
    """Primary brackets with a fundamental-class insertion on a semi-positive target.

    <g, 1>_beta, <g, 1, c>_beta and <g, 1, c_1, ..., c_m>_beta (m >= 2) are read
    off from J_0 and J_1 at the given stability parameter.
    """

    name = "semi-positive"

    def __init__(self, ring: AmbientRing, J0: NovikovSeries, J1: NovikovSeries, epsilon="0+"):
        if not ring.target.is_semi_positive:
            raise UnsupportedTarget("provider needs a semi-positive target")
        self.ring = ring
        self.epsilon = parse_epsilon(epsilon)
        self.max_degree = J0.trunc.max_theta_degree
        inv = J0.invert()
        self.ratio = J1 * inv          # J_1 / J_0, class valued
        self.inv_minus_one = inv - 1   # J_0^{-1} - 1

    def bracket(self, insertions, beta) -> Fraction:
        beta = tuple(beta)
        self.check_envelope(insertions, beta)
        if any(a for _, a in insertions):
            raise OutOfEnvelope("semi-positive provider only knows primary brackets")
        one = self.ring.one
        idx = next((i for i, (c, _) in enumerate(insertions) if c == one), None)
        if idx is None:
            raise OutOfEnvelope("semi-positive provider needs a fundamental class insertion")
        rest = [c for i, (c, _) in enumerate(insertions) if i != idx]
        if not any(beta):
            raise OutOfEnvelope("degree-zero brackets are classical")
        if len(rest) == 1:
            val = self.ratio.get((beta, ()), None)
            return Fraction(0) if val is None else self.ring.pair(val, rest[0])
        if len(rest) == 2:
            c = self.inv_minus_one.get((beta, ()), Fraction(0))
            return c * self.ring.pair(rest[0], rest[1])
        return Fraction(0)


# -- S operator (ambient) ----------------------------------------------------------

def _multi_indices(n: int, total: int):
    if n == 0:
        if total == 0:
            yield ()
        return
    for combo in itertools.combinations_with_replacement(range(n), total):
        k = [0] * n
        for c in combo:
            k[c] += 1
        yield tuple(k)


def _kfact(k) -> int:
    out = 1
    for x in k:
        out *= math.factorial(x)
    return out


def _t_classes(ring, t_classes):
    return [ring.basis_class(i) for i in range(ring.size)] if t_classes is None else list(t_classes)


def exp_t_over_z_times(ring, trunc: TruncationSpec, t_classes, gamma: CohClass) -> ZSeries:
    """e^{t/z} gamma with t = sum_i t_i T_i."""
    T = ring.target
    n_t = len(t_classes)
    coeffs = {}
    for m in range(trunc.max_t_degree + 1):
        for k in _multi_indices(n_t, m):
            c = gamma
            for i, e in enumerate(k):
                for _ in range(e):
                    c = c * t_classes[i]
            if not c.is_zero():
                coeffs[((0,) * T.rank, k, -m)] = c * Fraction(1, _kfact(k))
    return ZSeries(T, trunc, n_t, coeffs)


def build_S(provider: InvariantProvider, gamma: CohClass, M: int, D: int, *,
            t_classes: Sequence[CohClass] | None = None, z_min: int | None = None) -> ZSeries:
    """S(gamma) = sum_i gamma_i <<gamma^i/(z - psi), gamma>> through q-degree D, t-order M."""
    ring = provider.ring
    T = ring.target
    tcs = _t_classes(ring, t_classes)
    n_t = len(tcs)
    if z_min is None:
        z_min = -(ring.dim + M + 2 * D + 2)
    trunc = TruncationSpec(D, M, z_min, 0)
    out = exp_t_over_z_times(ring, trunc, tcs, gamma)
    duals = ring.dual_basis()
    coeffs: dict = {}
    for beta in T.effective_classes(D):
        if not any(beta):
            continue
        for m in range(M + 1):
            for k in _multi_indices(n_t, m):
                tins = [(tcs[i], 0) for i, e in enumerate(k) for _ in range(e)]
                vd = virtual_dimension(T, beta, 2 + m)
                for i in range(ring.size):
                    for a in range(0, max(vd, 0) + 1):
                        try:
                            val = provider.bracket([(duals[i], a), (gamma, 0)] + tins, beta)
                        except OutOfEnvelope as exc:
                            raise OutOfEnvelope(f"S operator at class {beta}, t^{k}: {exc}") from exc
                        if val:
                            key = (tuple(beta), k, -(a + 1))
                            add = ring.basis_class(i) * (val / _kfact(k))
                            coeffs[key] = coeffs[key] + add if key in coeffs else add
    return out + ZSeries(T, trunc, n_t, coeffs)


def build_S_columns(provider: InvariantProvider, M: int, D: int, **kw) -> list[ZSeries]:
    ring = provider.ring
    return [build_S(provider, ring.basis_class(j), M, D, **kw) for j in range(ring.size)]


def pair_series(ring, A: ZSeries, B: ZSeries) -> ZSeries:
    """Coefficientwise convolution of the pairing <A, B>."""
    trunc = A.trunc.meet(B.trunc)
    out: dict = {}
    T = A.target
    for (b1, k1, e1), v1 in A.items():
        for (b2, k2, e2), v2 in B.items():
            b = tuple(x + y for x, y in zip(b1, b2))
            k = tuple(x + y for x, y in zip(k1, k2))
            if T.theta_degree(b) > trunc.max_theta_degree or sum(k) > trunc.max_t_degree:
                continue
            val = ring.pair(v1, v2)
            if val:
                key = (b, k, e1 + e2)
                out[key] = out.get(key, 0) + val
    return ZSeries(T, TruncationSpec(trunc.max_theta_degree, trunc.max_t_degree,
                                     A.trunc.z_min + B.trunc.z_min, A.trunc.z_max + B.trunc.z_max),
                   A.n_t, out)


@dataclass
class Report:
    ok: bool
    violations: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": [list(map(_jsonable, v)) if isinstance(v, tuple) else _jsonable(v)
                                              for v in self.violations],
                "detail": {k: _jsonable(v) for k, v in self.detail.items()}}


def _jsonable(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    if isinstance(x, (int, str, float)) or x is None:
        return x
    if isinstance(x, list):
        return [_jsonable(v) for v in x]
    return str(x)


def unitarity_check(columns: Sequence[ZSeries], ring: AmbientRing) -> Report:
    """<S(gamma_i)(z), S(gamma_j)(-z)> = <gamma_i, gamma_j> for every pair of basis classes."""
    violations = []
    for i, Si in enumerate(columns):
        for j, Sj in enumerate(columns):
            if j < i:
                continue
            prod = pair_series(ring, Si, Sj.z_negate())
            want = ring.gram[i][j]
            zero_key = ((0,) * ring.target.rank, (0,) * Si.n_t, 0)
            for key, val in prod.items():
                target_val = want if key == zero_key else 0
                if val != target_val:
                    violations.append((i, j, key))
            if want and prod.get(zero_key, 0) == 0:
                violations.append((i, j, zero_key))
    T = ring.target
    violations.sort(key=lambda v: (T.theta_degree(v[2][0]), sum(v[2][1]), v[2], v[0], v[1]))
    return Report(not violations, violations)


def specialize_t(series: ZSeries, shifts: Sequence[NovikovSeries]) -> ZSeries:
    """Evaluate a t-dependent series at t_i = shifts_i(q); each shift is O(q), t-free."""
    T = series.target
    n_t = series.n_t
    if len(shifts) != n_t:
        raise InvalidParameter("one shift per t-variable")
    trunc = TruncationSpec(series.trunc.max_theta_degree, series.trunc.max_t_degree)
    taus = []
    for i, g in enumerate(shifts):
        k = tuple(int(j == i) for j in range(n_t))
        lifted = NovikovSeries(T, trunc, n_t, {(key[0], (0,) * n_t): v for key, v in g.items()})
        taus.append(NovikovSeries.t_variable(T, trunc, n_t, i) + lifted)
    out = series.substitute_t(taus).restrict_t_zero()
    return ZSeries(T, out.trunc, 0, {(key[0], (), key[2]): v for key, v in out.items()})


def compute_P_from_J(columns: Sequence[ZSeries], ring: AmbientRing, J: ZSeries) -> ZSeries:
    """P = S^*(-z) J, i.e. <gamma_j, P> = <S(gamma_j)(-z), J>."""
    duals = ring.dual_basis()
    P = None
    for j, col in enumerate(columns):
        if col.n_t != J.n_t:
            raise Inconsistency("S and J use different t-variables")
        c = pair_series(ring, col.z_negate(), J)
        term = c.map(lambda v, d=duals[j]: d * v)
        P = term if P is None else P + term
    bad = P.z_regular_check()
    if bad:
        raise Inconsistency(f"P has negative z-powers at {bad[0]}")
    return P


# -- mirror maps ------------------------------------------------------------------------

@dataclass
class MirrorMap:
    g0: NovikovSeries
    g: list[NovikovSeries]
    labels: list[str]


def mirror_map_small(asym: IAsymptotics, eps="0+") -> MirrorMap:
    from .ifunction import epsilon_J0_J1
    T = asym.target
    if not T.is_semi_positive:
        raise UnsupportedTarget("mirror map needs a semi-positive target; use birkhoff_induction")
    J0, _ = epsilon_J0_J1(asym, eps)
    inv = J0.invert()
    from .target import chamber_truncate
    f0 = chamber_truncate(asym.f0, eps)
    fs = [chamber_truncate(f, eps) for f in asym.f]
    return MirrorMap(f0 * inv, [f * inv for f in fs], list(asym.h2_labels))


def mod2_J(asym: IAsymptotics, ring: AmbientRing, eps, z_min: int = -8) -> ZSeries:
    """J^eps at t = 0 mod 1/z^2 for a semi-positive target: J_0 1 + J_1/z."""
    from .ifunction import epsilon_J0_J1
    if not asym.target.is_semi_positive:
        raise UnsupportedTarget("J mod 1/z^2 from I needs a semi-positive target")
    J0, J1 = epsilon_J0_J1(asym, eps)
    T = asym.target
    trunc = TruncationSpec(J0.trunc.max_theta_degree, 0, z_min, 0)
    out = {(k[0], (), 0): ring.one * v for k, v in J0.items()}
    out.update({(k[0], (), -1): v for k, v in J1.items()})
    return ZSeries(T, trunc, 0, out)


def mirror_map_series(asym: IAsymptotics, ring: AmbientRing, eps="0+", t_classes=None,
                      t_order: int = 1) -> NovikovSeries:
    """tau^eps(t) = (t + J_1^eps)/J_0^eps with t = sum t_i T_i."""
    from .ifunction import epsilon_J0_J1
    if not asym.target.is_semi_positive:
        raise UnsupportedTarget("mirror map needs a semi-positive target; use birkhoff_induction")
    T = ring.target
    J0, J1 = epsilon_J0_J1(asym, eps)
    inv = J0.invert()
    tcs = _t_classes(ring, t_classes)
    n_t = len(tcs)
    trunc = TruncationSpec(J0.trunc.max_theta_degree, t_order)
    zt = (0,) * n_t
    out = NovikovSeries(T, trunc, n_t, {(k[0], zt): v for k, v in (J1 * inv).items()})
    for i, c in enumerate(tcs):
        k = tuple(int(j == i) for j in range(n_t))
        out = out + NovikovSeries(T, trunc, n_t, {(kk[0], k): c * v for kk, v in inv.items()})
    return out


def string_transform(provider: InvariantProvider, gamma: CohClass | None = None, *, M: int = 1,
                     D: int | None = None, t_classes=None) -> NovikovSeries:
    """tau_gamma(t) = sum_i gamma_i <<gamma^i, gamma>> - gamma, class valued in t."""
    ring = provider.ring
    T = ring.target
    gamma = ring.one if gamma is None else gamma
    try:
        ring.inverse(gamma)
    except Exception as exc:
        raise InvalidParameter("gamma must be invertible") from exc
    D = provider.max_degree if D is None else D
    tcs = _t_classes(ring, t_classes)
    n_t = len(tcs)
    trunc = TruncationSpec(D, M)
    duals = ring.dual_basis()
    coeffs: dict = {}
    zb = (0,) * T.rank
    for k in _multi_indices(n_t, 1):
        c = ring.zero
        for i, e in enumerate(k):
            if e:
                c = tcs[i]
        # beta = 0, m = 1: <gamma^i, gamma, t> classical
        val = gamma * c
        if not val.is_zero():
            coeffs[(zb, k)] = val
    for beta in T.effective_classes(D):
        if not any(beta):
            continue
        for m in range(M + 1):
            for k in _multi_indices(n_t, m):
                tins = [(tcs[i], 0) for i, e in enumerate(k) for _ in range(e)]
                acc = ring.zero
                for i in range(ring.size):
                    v = provider.bracket([(duals[i], 0), (gamma, 0)] + tins, beta)
                    if v:
                        acc = acc + ring.basis_class(i) * (v / _kfact(k))
                if not acc.is_zero():
                    coeffs[(tuple(beta), k)] = acc
    # classical terms with m >= 2 vanish on M_{0,m+2} for primary insertions
    return NovikovSeries(T, trunc, n_t, coeffs)


def class_coordinates(series: NovikovSeries, ring) -> list[NovikovSeries]:
    """Split a class-valued series into scalar series, one per basis element."""
    return [series.map(lambda v, i=i: v.coeffs[i]) for i in range(ring.size)]


def generalized_string_transform(tau1: Sequence[NovikovSeries], tau2: Sequence[NovikovSeries]):
    """(tau1)^{-1} o tau2 on coordinate series."""
    inv = invert_transformation(tau1)
    return [s.substitute_t(list(tau2)) for s in inv]


@dataclass
class MirrorRecord:
    q_of_Q: NovikovSeries
    smallJ: ZSeries
    g0: NovikovSeries
    g: list[NovikovSeries]
    h: list[NovikovSeries]


def _exp_class_over_z(ring, x: NovikovSeries, trunc: TruncationSpec) -> ZSeries:
    T = ring.target
    X = ZSeries(T, trunc, 0, {(k[0], (), -1): v for k, v in x.items()})
    out = ZSeries.monomial(T, trunc, 0, value=ring.one)
    term = out
    for m in range(1, trunc.max_theta_degree + ring.dim + 2):
        term = term * X * Fraction(1, m)
        if term.is_zero():
            break
        out = out + term
    return out


def mirror_transform(I: SmallIFunction, asym: IAsymptotics) -> MirrorRecord:
    """Small J in Q from I: e^{-(g_0 + g.D)/z} I/I_0 with q = q(Q)."""
    T = I.target
    ring = I.ring
    if not T.is_semi_positive:
        raise UnsupportedTarget("mirror transform needs a semi-positive target")
    if I.equivariant:
        raise ValueError("mirror transform works on the non-equivariant I")
    mm = mirror_map_small(asym, "0+")
    trunc = I.series.trunc
    inv = asym.I0.invert()
    X = I.series * inv
    h2 = [i for i, d in enumerate(ring.degrees) if d == 1]
    shift = mm.g0.map(lambda v: ring.one * v)
    for idx, gs in zip(h2, mm.g):
        shift = shift + gs.map(lambda v, idx=idx: ring.basis_class(idx) * v)
    Y = _exp_class_over_z(ring, -shift, trunc) * X
    if len(mm.g) != T.rank or len(asym.h2_chars) != T.rank:
        raise UnsupportedTarget("divisor basis does not coordinatize the Novikov variables")
    pairing = [list(ch) for ch in asym.h2_chars]
    h = invert_novikov_shift(mm.g, pairing)
    smallJ = Y.substitute_novikov(h, pairing)
    back = smallJ.substitute_novikov(mm.g, pairing)
    if back != Y:
        raise Inconsistency("mirror map round trip failed")
    q = NovikovSeries.monomial(T, asym.I0.trunc, 0, beta=[1 if a == 0 else 0 for a in range(T.rank)])
    return MirrorRecord(q.substitute_novikov(h, pairing), smallJ, mm.g0, mm.g, h)


# -- Yukawa coupling ----------------------------------------------------------------------

def parse_bmodel(expr: str, T: ToricTarget, trunc: TruncationSpec) -> NovikovSeries:
    """Expand a rational function of q (e.g. '5/(1-3125*q)') as a Novikov series."""
    q = sympy.Symbol("q")
    e = sympy.sympify(expr, locals={"q": q})
    num, den = sympy.fraction(sympy.together(e))

    def to_series(p):
        poly = sympy.Poly(sympy.expand(p), q)
        coeffs = {}
        for (d,), c in poly.terms():
            c = sympy.Rational(c)
            coeffs[((d,), ())] = Fraction(int(c.p), int(c.q))
        return NovikovSeries(T, trunc, 0, coeffs)
    return to_series(num) * to_series(den).invert()


def yukawa_cy3(I: SmallIFunction, asym: IAsymptotics, classical: int | Fraction,
               bmodel: NovikovSeries | str) -> NovikovSeries:
    """K(Q) = Y(q) I_0^{-2} (d log q / d log Q)^3 at q = q(Q)."""
    T = I.target
    if T.rank != 1 or T.dimension - len(T.convex) != 3 or not T.is_semi_positive \
            or T.classify()["index"] != 0:
        raise UnsupportedTarget("Yukawa coupling needs a one-parameter Calabi-Yau threefold")
    trunc = asym.I0.trunc
    Y = parse_bmodel(bmodel, T, trunc) if isinstance(bmodel, str) else bmodel
    if Y.get(((0,), ())) != classical:
        raise Inconsistency("B-model Yukawa does not start with the classical triple intersection")
    mm = mirror_map_small(asym, "0+")
    g = mm.g[0]
    dlogQ = g.euler_derivative(0) + 1          # d log Q / d log q
    F = Y * asym.I0.invert() ** 2 * dlogQ.invert() ** 3
    h = invert_novikov_shift([g])
    return F.substitute_novikov(h)


def instanton_numbers(K: NovikovSeries, classical) -> dict[int, Fraction]:
    """n_d from K = classical + sum_d n_d d^3 Q^d / (1 - Q^d)."""
    coeffs = {k[0][0]: v for k, v in K.items()}
    n: dict[int, Fraction] = {}
    for d in range(1, K.trunc.max_theta_degree + 1):
        c = Fraction(coeffs.get(d, 0))
        for e in range(1, d):
            if d % e == 0:
                c -= n[e] * e ** 3
        n[d] = c / d ** 3
    return n


# -- quantum differential operators ----------------------------------------------------------

def apply_D(J: ZSeries, ring: AmbientRing, times: int = 1) -> ZSeries:
    """D = H + z q d/dq on a one-parameter series."""
    H = ring.character((1,))
    out = J
    for _ in range(times):
        a = out.map(lambda v: H * v)
        b = ZSeries(out.target, out.trunc, out.n_t,
                    {(k[0], k[1], k[2] + 1): v * k[0][0] for k, v in out.items()})
        out = a + b
    return out


def _widen(J: ZSeries, up: int) -> ZSeries:
    t = J.trunc
    return J.with_trunc(TruncationSpec(t.max_theta_degree, t.max_t_degree, t.z_min, t.z_max + up))


def _shift(J: ZSeries, d: int) -> ZSeries:
    """q^d J."""
    return ZSeries(J.target, J.trunc, J.n_t, {((k[0][0] + d,), k[1], k[2]): v for k, v in J.items()})


def apply_qde(J: ZSeries, ring: AmbientRing, coeffs: Sequence[NovikovSeries]) -> ZSeries:
    """(D^n + sum_k a_k(q) D^k) J."""
    n = len(coeffs)
    powers = [_widen(J, n)]
    for _ in range(n):
        powers.append(apply_D(powers[-1], ring))
    out = powers[n]
    for k, a in enumerate(coeffs):
        for key, c in a.items():
            out = out + _shift(powers[k], key[0][0]) * c
    return out


def qde_find(J: ZSeries, ring: AmbientRing, n: int, q_degree: int | None = None) -> list[NovikovSeries]:
    """Monic order-n operator in D annihilating J through its truncation."""
    T = J.target
    if T.rank != 1:
        raise UnsupportedTarget("qde_find needs one Novikov variable")
    D = J.trunc.max_theta_degree
    q_degree = max(D - n, 0) if q_degree is None else q_degree
    powers = [_widen(J, n)]
    for _ in range(n):
        powers.append(apply_D(powers[-1], ring))
    unknowns = [(k, j) for k in range(n) for j in range(q_degree + 1)]
    contrib = [_shift(powers[k], j) for k, j in unknowns]
    keys = set(powers[n].keys())
    for c in contrib:
        keys |= set(c.keys())
    keys = sorted(kk for kk in keys if kk[0][0] <= D)
    rows, rhs = [], []
    for key in keys:
        for b in range(ring.size):
            rows.append([c.get(key, ring.zero).coeffs[b] if c.get(key, None) is not None else Fraction(0)
                         for c in contrib])
            v = powers[n].get(key, None)
            rhs.append(-(v.coeffs[b]) if v is not None else Fraction(0))
    try:
        sol = solve_linear(rows, rhs, zero=Fraction(0))
    except InconsistentSystem as exc:
        raise NotFound(f"no annihilator of order {n}; try a higher order") from exc
    except UnderdeterminedSystem as exc:
        raise NotFound(f"order {n} annihilator is not unique at this truncation") from exc
    trunc = TruncationSpec(q_degree)
    out = [NovikovSeries(T, trunc, 0, {}) for _ in range(n)]
    for (k, j), v in zip(unknowns, sol):
        if v:
            out[k] = out[k] + NovikovSeries(T, trunc, 0, {((j,), ()): v})
    return out


# -- Birkhoff factorization ----------------------------------------------------------------

@dataclass
class BirkhoffData:
    tau: NovikovSeries           # class valued, t = 0 slice
    P: ZSeries
    agrees: bool | None
    mismatches: list = field(default_factory=list)
    predicted: ZSeries | None = None     # S^infty_tau(P)


def apply_S_tau(provider: InvariantProvider, tau: NovikovSeries, P: ZSeries, D: int,
                z_min: int) -> ZSeries:
    """S^infty_tau(P) with tau = O(q) a class-valued series (t = 0 slice)."""
    ring = provider.ring
    T = ring.target
    duals = ring.dual_basis()
    trunc = TruncationSpec(D, 0, z_min, P.trunc.z_max)
    # brackets with tau insertions, expanded multinomially in the q-graded pieces of tau
    pieces = [(k[0], v) for k, v in tau.items()]
    out = ZSeries(T, trunc, 0, {})
    for j in range(ring.size):
        Pj = pair_series(ring, P, ZSeries.monomial(T, trunc, 0, value=ring.basis_class(j)))
        if Pj.is_zero():
            continue
        col = _S_tau_column(provider, duals, duals[j], pieces, D, trunc)
        for key, c in Pj.items():
            shifted = ZSeries(T, trunc, 0, {((tuple(x + y for x, y in zip(k[0], key[0]))), (), k[2] + key[2]): v * c
                                              for k, v in col.items()})
            out = out + shifted
    return out


def _S_tau_column(provider, duals, gamma, pieces, D, trunc) -> ZSeries:
    ring = provider.ring
    T = ring.target
    coeffs: dict = {}

    def add(key, val):
        coeffs[key] = coeffs[key] + val if key in coeffs else val

    # choose a multiset of tau pieces (each O(q)) and a curve class for the bracket
    for m in range(0, D + 1):
        for combo in itertools.combinations_with_replacement(range(len(pieces)), m):
            qdeg = [0] * T.rank
            for c in combo:
                qdeg = [x + y for x, y in zip(qdeg, pieces[c][0])]
            dq = T.theta_degree(qdeg)
            if dq > D:
                continue
            mult = math.factorial(m)
            for c in set(combo):
                mult //= math.factorial(combo.count(c))
            weight = Fraction(mult, math.factorial(m))
            tins = [(pieces[c][1], 0) for c in combo]
            for beta in T.effective_classes(D - dq):
                total = tuple(x + y for x, y in zip(beta, qdeg))
                if not any(beta):
                    if m == 0:
                        add((total, (), 0), gamma)
                        continue
                    # classical: gamma * prod tau / z^m
                    c = gamma
                    for t_cls, _ in tins:
                        c = c * t_cls
                    add((total, (), -m), c * weight)
                    continue
                vd = virtual_dimension(T, beta, 2 + m)
                for i in range(ring.size):
                    for a in range(0, max(vd, 0) + 1):
                        v = provider.bracket([(duals[i], a), (gamma, 0)] + tins, beta)
                        if v:
                            add((total, (), -(a + 1)), ring.basis_class(i) * (v * weight))
    return ZSeries(T, trunc, 0, coeffs)


def birkhoff_induction(J: ZSeries, provider: InvariantProvider, D: int | None = None, *,
                       exact: bool = True) -> BirkhoffData:
    """Unique (tau, P) with J = S^infty_tau(P) mod 1/z^2, built degree by degree (t = 0).

    Only the z^0 and z^-1 parts of J are read during the induction.  With
    ``exact`` the full J is compared against S^infty_tau(P) afterwards;
    otherwise J is treated as known mod 1/z^2 only.
    """
    ring = provider.ring
    T = ring.target
    if J.n_t != 0:
        raise InvalidParameter("birkhoff_induction works on the t = 0 slice")
    D = J.trunc.max_theta_degree if D is None else D
    z_min = J.trunc.z_min
    zb = (0,) * T.rank
    lead = J.filter(lambda k: T.theta_degree(k[0]) == 0)
    if lead != ZSeries.monomial(T, J.trunc, 0, value=ring.one):
        raise InvalidParameter("J must be 1 + O(q) at t = 0")
    ntrunc = TruncationSpec(D)
    tau = NovikovSeries(T, ntrunc, 0, {})
    P = ZSeries.monomial(T, TruncationSpec(D, 0, z_min, max(J.trunc.z_max, 0) + D), 0, value=ring.one)
    for d in range(1, D + 1):
        cur = apply_S_tau(provider, tau, P, d, z_min)
        diff = (J - cur).filter(lambda k: T.theta_degree(k[0]) == d)
        for (beta, _, e), v in diff.items():
            if e >= 0:
                P = P + ZSeries(T, P.trunc, 0, {(beta, (), e): v})
            elif e == -1:
                tau = tau + NovikovSeries(T, ntrunc, 0, {(beta, ()): v})
    final = apply_S_tau(provider, tau, P, D, z_min)
    delta = J - final
    mism = sorted(delta.keys())
    low = [k for k in mism if k[2] >= -1]
    if low:
        raise Inconsistency(f"mod 1/z^2 matching failed at {low[0]}")
    if not exact:
        return BirkhoffData(tau, P, None, [], final)
    return BirkhoffData(tau, P, not mism, mism, final)


# -- fixed-point S and checks -------------------------------------------------------------------

def build_S_fixed_point(T: ToricTarget, fld: ScalarField, gamma: CohClass, M: int, D: int,
                        t_classes: Sequence[CohClass] = (), twist: bool = True) -> list[NovikovSeries]:
    """S_mu(gamma) for every fixed point, exact in z; t-classes in the fixed-point ring."""
    gs = GraphSum(T, fld, twist)
    ring = gs.ring
    z = fld.z
    n_t = len(t_classes)
    trunc = TruncationSpec(D, M)
    zb = (0,) * T.rank
    out = []
    for mu in range(ring.size):
        dual = [(1 / ring.weights[mu]) if k == mu else fld.zero for k in range(ring.size)]
        coeffs: dict = {}
        for m in range(M + 1):
            for k in _multi_indices(n_t, m):
                # degree zero: e^{t/z} gamma restricted to mu
                val = gamma.coeffs[mu]
                for i, e in enumerate(k):
                    val = val * t_classes[i].coeffs[mu] ** e if e else val
                coeffs[(zb, k)] = val / (z ** m * _kfact(k)) if m else val
        for beta in T.effective_classes(D):
            if not any(beta):
                continue
            for m in range(M + 1):
                for k in _multi_indices(n_t, m):
                    marks = [DescendantMarking(dual, z), ClassMarking(gamma.coeffs)]
                    for i, e in enumerate(k):
                        marks += [ClassMarking(t_classes[i].coeffs)] * e
                    v = gs.invariant(marks, beta)
                    if not is_zero(v):
                        coeffs[(tuple(beta), k)] = v / _kfact(k)
        out.append(NovikovSeries(T, trunc, n_t, coeffs))
    return out


def unitarity_check_fixed_point(S_by_gamma: Sequence[Sequence[NovikovSeries]], ring: FixedPointRing,
                                gammas: Sequence[CohClass]) -> Report:
    fld = ring.field
    z = fld.z
    violations = []
    for a, Sa in enumerate(S_by_gamma):
        for b, Sb in enumerate(S_by_gamma):
            if b < a:
                continue
            total = None
            for mu in range(ring.size):
                neg = Sb[mu].map(lambda v: substitute_z(v, -z))
                term = (Sa[mu] * neg) * ring.weights[mu]
                total = term if total is None else total + term
            want = ring.pair(gammas[a], gammas[b])
            diff = total - want
            for key, _ in diff.items():
                violations.append((a, b, key))
    return Report(not violations, sorted(violations))


def polynomiality_check(S_mu: Sequence[NovikovSeries], fld: ScalarField, y_order: int = 2) -> Report:
    """z-regularity of D(S_mu) = S_mu(q, t, z) S_mu(q e^{-z y L_theta}, t, -z)."""
    violations = []
    for mu, S in enumerate(S_mu):
        T = S.target
        keys = set()
        for beta in T.effective_classes(S.trunc.max_theta_degree):
            for m in range(S.trunc.max_t_degree + 1):
                for k in _multi_indices(S.n_t, m):
                    keys.add((tuple(beta), k))
        for key in sorted(keys):
            polar = d_series_polar(S, key, y_order, fld)
            for p, pp in enumerate(polar):
                if pp:
                    violations.append((mu, key[0], key[1], p))
    return Report(not violations, violations)


__all__ = [n for n in dir() if not n.startswith("_")]
