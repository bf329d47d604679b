"""Cohomology rings of toric targets and classes in them.

The ambient ring is built from localization alone: monomials in the
character classes H_1..H_l are paired by summing over fixed points, and the
ring is the quotient of Q[H] by the kernel of that pairing (Poincare duality).
With a convex twist E the pairing carries e(E) and the quotient models the
cohomology pulled back to the zero locus.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Any, Sequence

from .scalars import IncompatibleOperands, NotInvertible, ScalarField, is_zero
from .target import ToricTarget

# generic rational specialization used to evaluate degree-balanced integrals
_GENERIC_LAMBDAS = (Fraction(3, 1), Fraction(-7, 2), Fraction(11, 3), Fraction(23, 5),
                    Fraction(-31, 7), Fraction(43, 11), Fraction(59, 13), Fraction(-71, 17))


def generic_lambdas(n: int) -> list[Fraction]:
    vals = list(_GENERIC_LAMBDAS)
    k = 0
    while len(vals) < n:
        vals.append(Fraction(101 + 37 * k, 19 + k))
        k += 1
    return vals[:n]


def _monomials(nvars: int, degree: int) -> list[tuple[int, ...]]:
    out = []
    for combo in itertools.combinations_with_replacement(range(nvars), degree):
        e = [0] * nvars
        for v in combo:
            e[v] += 1
        out.append(tuple(e))
    return sorted(out, reverse=True)


class CohClass:
    """Coordinates of a cohomology class in a ring's basis."""

    __slots__ = ("ring", "coeffs")

    def __init__(self, ring, coeffs: Sequence[Any]):
        if len(coeffs) != ring.size:
            raise IncompatibleOperands(f"class needs {ring.size} coordinates, got {len(coeffs)}")
        self.ring = ring
        self.coeffs = tuple(coeffs)

    def _check(self, other: "CohClass"):
        if other.ring is not self.ring:
            raise IncompatibleOperands("classes live in different rings")

    def __add__(self, other):
        if isinstance(other, CohClass):
            self._check(other)
            return CohClass(self.ring, [a + b for a, b in zip(self.coeffs, other.coeffs)])
        if is_zero(other):
            return self
        return self + self.ring.one * other

    __radd__ = __add__

    def __neg__(self):
        return CohClass(self.ring, [-a for a in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, CohClass):
            self._check(other)
            return self.ring.mul(self, other)
        return CohClass(self.ring, [a * other for a in self.coeffs])

    def __rmul__(self, other):
        return CohClass(self.ring, [other * a for a in self.coeffs])

    def __truediv__(self, other):
        if isinstance(other, CohClass):
            return self * other.inverse()
        return CohClass(self.ring, [a / other for a in self.coeffs])

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __eq__(self, other):
        if isinstance(other, CohClass):
            return self.ring is other.ring and all(is_zero(a - b) for a, b in zip(self.coeffs, other.coeffs))
        if is_zero(other):
            return self.is_zero()
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def is_zero(self) -> bool:
        return all(is_zero(a) for a in self.coeffs)

    def inverse(self) -> "CohClass":
        return self.ring.inverse(self)

    def map(self, fn) -> "CohClass":
        return CohClass(self.ring, [fn(a) for a in self.coeffs])

    def __getitem__(self, i):
        return self.coeffs[i]

    def __repr__(self):
        terms = [f"({c})*{lab}" for c, lab in zip(self.coeffs, self.ring.labels) if not is_zero(c)]
        return " + ".join(terms) if terms else "0"


class AmbientRing:
    """Non-equivariant H*(X, Q) (or its twisted quotient) in a monomial basis."""

    mode = "ambient"

    def __init__(self, target: ToricTarget, twisted: bool = True):
        self.target = target
        self.twisted = twisted and bool(target.convex)
        l = target.rank
        self.dim = target.dimension - (target.twist_rank if self.twisted else 0)
        if self.dim < 0:
            raise ValueError("twist rank exceeds dimension")
        fld = ScalarField(target.n_lambda, lam_values=generic_lambdas(target.n_lambda))
        self._fld = fld
        fps = target.fixed_points
        # restrictions of H_a and of the Euler factors at each fixed point
        self._h_at = [[fld.linear_form(target.character_weight(fp, [1 if b == a else 0 for b in range(l)]))
                       for a in range(l)] for fp in fps]
        self._weight = []
        for fp in fps:
            w = Fraction(1)
            for tw in target.tangent_weights(fp):
                w *= fld.linear_form(tw)
            num = Fraction(1)
            if self.twisted:
                for a in range(len(target.convex)):
                    num *= fld.linear_form(target.convex_weight(fp, a))
            self._weight.append(num / w)
        basis: list[tuple[int, ...]] = []
        degrees: list[int] = []
        for k in range(self.dim + 1):
            mons = _monomials(l, k)
            comp = _monomials(l, self.dim - k)
            rows = [[self._integral(m, c) for c in comp] for m in mons]
            chosen = _independent_rows(rows)
            basis += [mons[i] for i in chosen]
            degrees += [k] * len(chosen)
        self.monomials = basis
        self.degrees = degrees
        self.size = len(basis)
        self.labels = [_mon_label(m) for m in basis]
        self.gram = [[self._integral(a, b) if da + db == self.dim else Fraction(0)
                      for b, db in zip(basis, degrees)] for a, da in zip(basis, degrees)]
        self._gram_inv = _invert(self.gram)
        self._mon_cache: dict[tuple[int, ...], CohClass] = {}
        self._table: dict[tuple[int, int], tuple] = {}
        for i in range(self.size):
            for j in range(i, self.size):
                m = tuple(x + y for x, y in zip(basis[i], basis[j]))
                self._table[(i, j)] = self._table[(j, i)] = self.monomial(m).coeffs

    def _integral(self, m1, m2=None) -> Fraction:
        e = m1 if m2 is None else tuple(a + b for a, b in zip(m1, m2))
        total = Fraction(0)
        for hs, w in zip(self._h_at, self._weight):
            v = w
            for h, k in zip(hs, e):
                if k:
                    v *= h ** k
            total += v
        return total

    def monomial(self, exps: Sequence[int]) -> CohClass:
        """Class of prod_a H_a^{exps[a]} in the basis."""
        exps = tuple(exps)
        if exps in self._mon_cache:
            return self._mon_cache[exps]
        k = sum(exps)
        if k > self.dim:
            c = CohClass(self, [Fraction(0)] * self.size)
        else:
            # coordinates from pairing against the complementary-degree basis
            idx = [i for i, d in enumerate(self.degrees) if d == k]
            cidx = [i for i, d in enumerate(self.degrees) if d == self.dim - k]
            v = [self._integral(exps, self.monomials[j]) for j in cidx]
            sub = [[self.gram[i][j] for j in cidx] for i in idx]
            coeffs = [Fraction(0)] * self.size
            if idx:
                # sum_i c_i gram[i][j] = v_j
                tr = [[sub[i][j] for i in range(len(idx))] for j in range(len(cidx))]
                sol = _invert(tr)
                for a, i in enumerate(idx):
                    coeffs[i] = sum(sol[a][b] * v[b] for b in range(len(cidx)))
            c = CohClass(self, coeffs)
        self._mon_cache[exps] = c
        return c

    def basis_class(self, i: int) -> CohClass:
        return CohClass(self, [Fraction(int(j == i)) for j in range(self.size)])

    @property
    def one(self) -> CohClass:
        return self.monomial((0,) * self.target.rank)

    @property
    def zero(self) -> CohClass:
        return CohClass(self, [Fraction(0)] * self.size)

    def character(self, chi: Sequence[int]) -> CohClass:
        """Class of the line bundle L_chi: sum_a chi_a H_a."""
        out = self.zero
        for a, c in enumerate(chi):
            if c:
                e = [0] * self.target.rank
                e[a] = 1
                out = out + self.monomial(e) * c
        return out

    def divisor(self, i: int) -> CohClass:
        return self.character(self.target.column(i))

    def mul(self, a: CohClass, b: CohClass) -> CohClass:
        out = [0] * self.size
        for i, x in enumerate(a.coeffs):
            if is_zero(x):
                continue
            for j, y in enumerate(b.coeffs):
                if is_zero(y):
                    continue
                xy = x * y
                for k, c in enumerate(self._table[(i, j)]):
                    if c:
                        out[k] = out[k] + xy * c
        return CohClass(self, out)

    def pair(self, a: CohClass, b: CohClass):
        total = 0
        for i, x in enumerate(a.coeffs):
            if is_zero(x):
                continue
            for j, y in enumerate(b.coeffs):
                g = self.gram[i][j]
                if g and not is_zero(y):
                    total = total + x * y * g
        return total

    def integrate(self, a: CohClass):
        return self.pair(a, self.one)

    def dual_basis(self) -> list[CohClass]:
        # gamma^j = sum_k ginv[k][j] gamma_k so that <gamma_i, gamma^j> = delta
        return [CohClass(self, [self._gram_inv[k][j] for k in range(self.size)]) for j in range(self.size)]

    def inverse(self, a: CohClass) -> CohClass:
        c0 = a.coeffs[0] if self.degrees[0] == 0 else None
        if c0 is None or is_zero(c0):
            raise NotInvertible("class has no invertible degree-0 part")
        nil = a * (1 / c0) - self.one
        out, term = self.one, self.one
        for _ in range(self.dim):
            term = -(term * nil)
            out = out + term
        return out * (1 / c0)

    def degree_part(self, a: CohClass, k: int) -> CohClass:
        return CohClass(self, [c if d == k else 0 * c for c, d in zip(a.coeffs, self.degrees)])


class FixedPointRing:
    """Localized equivariant cohomology in the idempotent basis phi_mu.

    phi_mu restricts to 1 at mu and 0 elsewhere; multiplication is
    componentwise and the (twisted) pairing is sum_mu a_mu b_mu e(E_mu)/e(T_mu).
    """

    mode = "fixed-point"

    def __init__(self, target: ToricTarget, fld: ScalarField, twisted: bool = True):
        self.target = target
        self.field = fld
        self.twisted = twisted
        self.fps = target.fixed_points
        self.size = len(self.fps)
        self.labels = [fp.label() for fp in self.fps]
        self.euler_tangent = []
        self.euler_twist = []
        for fp in self.fps:
            w = fld.one
            for tw in target.tangent_weights(fp):
                w = w * fld.linear_form(tw)
            self.euler_tangent.append(w)
            e = fld.one
            if twisted:
                for a in range(len(target.convex)):
                    e = e * fld.linear_form(target.convex_weight(fp, a))
                for a in range(len(target.concave)):
                    e = e / fld.linear_form(target.concave_weight(fp, a))
            self.euler_twist.append(e)
        self.weights = [e / t for e, t in zip(self.euler_twist, self.euler_tangent)]

    def from_values(self, values: Sequence[Any]) -> CohClass:
        return CohClass(self, [self.field.convert(v) for v in values])

    def restriction(self, weight_vector_fn) -> CohClass:
        return CohClass(self, [self.field.linear_form(weight_vector_fn(fp)) for fp in self.fps])

    def character(self, chi: Sequence[int]) -> CohClass:
        return self.restriction(lambda fp: self.target.character_weight(fp, chi))

    def divisor(self, i: int) -> CohClass:
        return self.restriction(lambda fp: self.target.divisor_weight(fp, i))

    def idempotent(self, k: int) -> CohClass:
        return CohClass(self, [self.field.one if j == k else self.field.zero for j in range(self.size)])

    basis_class = idempotent

    @property
    def one(self) -> CohClass:
        return CohClass(self, [self.field.one] * self.size)

    @property
    def zero(self) -> CohClass:
        return CohClass(self, [self.field.zero] * self.size)

    def mul(self, a: CohClass, b: CohClass) -> CohClass:
        return CohClass(self, [x * y for x, y in zip(a.coeffs, b.coeffs)])

    def pair(self, a: CohClass, b: CohClass):
        total = self.field.zero
        for x, y, w in zip(a.coeffs, b.coeffs, self.weights):
            total = total + x * y * w
        return total

    def integrate(self, a: CohClass):
        return self.pair(a, self.one)

    def dual_basis(self) -> list[CohClass]:
        return [CohClass(self, [(1 / w) if j == k else self.field.zero for j in range(self.size)])
                for k, w in enumerate(self.weights)]

    def inverse(self, a: CohClass) -> CohClass:
        if any(is_zero(x) for x in a.coeffs):
            raise NotInvertible("class vanishes at a fixed point")
        return CohClass(self, [1 / x for x in a.coeffs])

    def equivariant_monomial(self, exps: Sequence[int]) -> CohClass:
        """Equivariant lift of prod_a H_a^{exps[a]} restricted to the fixed points."""
        l = self.target.rank
        out = []
        for fp in self.fps:
            v = self.field.one
            for a, k in enumerate(exps):
                if k:
                    v = v * self.field.linear_form(
                        self.target.character_weight(fp, [1 if b == a else 0 for b in range(l)])) ** k
            out.append(v)
        return CohClass(self, out)

    def to_ambient(self, a: CohClass, ambient: AmbientRing) -> list:
        """Coordinates of an equivariant class in the lifted monomial basis of ``ambient``."""
        if ambient.size != self.size:
            raise IncompatibleOperands("ambient basis size differs from number of fixed points")
        lifts = [self.equivariant_monomial(m) for m in ambient.monomials]
        rows = [[lifts[j].coeffs[i] for j in range(self.size)] for i in range(self.size)]
        from .scalars import solve_linear
        return solve_linear(rows, list(a.coeffs), zero=self.field.zero)


def _mon_label(m: tuple[int, ...]) -> str:
    if not any(m):
        return "1"
    parts = []
    for a, k in enumerate(m):
        if k:
            name = "H" if len(m) == 1 else f"H{a + 1}"
            parts.append(name if k == 1 else f"{name}^{k}")
    return "*".join(parts)


def _independent_rows(rows: list[list[Fraction]]) -> list[int]:
    chosen: list[int] = []
    reduced: list[tuple[int, list[Fraction]]] = []
    for i, r in enumerate(rows):
        v = list(r)
        for col, piv in reduced:
            if v[col] != 0:
                f = v[col] / piv[col]
                v = [a - f * b for a, b in zip(v, piv)]
        nz = next((c for c, x in enumerate(v) if x != 0), None)
        if nz is not None:
            reduced.append((nz, v))
            chosen.append(i)
    return chosen


def _invert(m: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(m)
    aug = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for c in range(n):
        p = next((r for r in range(c, n) if aug[r][c] != 0), None)
        if p is None:
            raise NotInvertible("singular pairing matrix")
        aug[c], aug[p] = aug[p], aug[c]
        piv = aug[c][c]
        aug[c] = [v / piv for v in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[c])]
    return [row[n:] for row in aug]
