"""Exact scalars: rationals and rational functions in the torus parameters.

Rationals are ``fractions.Fraction``.  Rational functions live in a sympy
sparse fraction field, which keeps numerator and denominator gcd-reduced
after every operation.  The formal variable ``z`` can be adjoined to the
same field so that coefficients of equivariant series are honest rational
functions of ``z``.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Any, Iterable, Sequence

from sympy import QQ
from sympy.polys.fields import FracElement, field


class IncompatibleOperands(ValueError):
    pass


class NotInvertible(ArithmeticError):
    pass


Scalar = Any  # Fraction | int | FracElement


def is_zero(x: Any) -> bool:
    if isinstance(x, (int, Fraction)):
        return x == 0
    if isinstance(x, FracElement):
        return not x.numer
    iz = getattr(x, "is_zero", None)
    if iz is not None:
        return iz() if callable(iz) else bool(iz)
    return x == 0


def as_fraction(x: Any) -> Fraction:
    """Convert an exact scalar with no free variables to ``Fraction``."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, FracElement):
        num, den = x.numer, x.denom
        if num.is_ground and den.is_ground:
            c = QQ.to_sympy(num.LC) / QQ.to_sympy(den.LC) if num else 0
            return Fraction(str(c))
        raise ValueError(f"scalar {x} is not constant")
    try:
        return Fraction(str(x))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"cannot convert {x!r} to a rational") from exc


def is_constant(x: Any) -> bool:
    if isinstance(x, FracElement):
        return x.numer.is_ground and x.denom.is_ground
    return True


def fmt_rational(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(s: str) -> Fraction:
    return Fraction(s)


class ScalarField:
    """Factory for the coefficient field used by equivariant computations.

    ``lam_values=None`` keeps the torus parameters symbolic, giving the field
    K = Q(lambda_1..lambda_r) (optionally with ``z`` adjoined).  Passing numbers
    specializes every parameter to that rational value; identities that hold
    in K then hold at the specialization, which is the cheap evaluation mode.
    """

    def __init__(self, n_lambda: int, *, with_z: bool = False,
                 lam_values: Sequence[Fraction] | None = None):
        self.n_lambda = n_lambda
        self.with_z = with_z
        self.symbolic = lam_values is None
        names: list[str] = []
        if with_z:
            names.append("z")
        if self.symbolic:
            names += [f"l{i + 1}" for i in range(n_lambda)]
        if names:
            self.field, *gens = field(",".join(names), QQ)
        else:
            self.field, gens = None, []
        self._z = gens[0] if with_z else None
        if self.symbolic:
            self._lams = list(gens[1:] if with_z else gens)
        else:
            vals = [Fraction(v) for v in lam_values]
            if len(vals) != n_lambda:
                raise ValueError("need one value per torus parameter")
            self._lams = [self.convert(v) for v in vals]
        self.lam_values = None if self.symbolic else [Fraction(v) for v in lam_values]

    @classmethod
    def random_specialization(cls, n_lambda: int, *, with_z: bool = False,
                              seed: int = 0, bound: int = 10**6) -> "ScalarField":
        rng = random.Random(seed)
        vals = [Fraction(rng.randint(-bound, bound), rng.randint(1, 97)) for _ in range(n_lambda)]
        return cls(n_lambda, with_z=with_z, lam_values=vals)

    @property
    def z(self):
        if self._z is None:
            raise ValueError("field was built without z")
        return self._z

    def lam(self, i: int):
        """Torus parameter lambda_{i+1} (0-based index)."""
        return self._lams[i]

    def convert(self, x: Any):
        if self.field is None:
            return Fraction(x) if not isinstance(x, Fraction) else x
        if isinstance(x, FracElement) and x.field == self.field:
            return x
        if isinstance(x, Fraction):
            return self.field(QQ(x.numerator, x.denominator))
        return self.field(x)

    @property
    def one(self):
        return self.convert(1)

    @property
    def zero(self):
        return self.convert(0)

    def linear_form(self, coeffs: Iterable[Fraction]):
        """Evaluate sum_i c_i lambda_i in this field."""
        acc = self.zero
        for c, lam in zip(coeffs, self._lams):
            if c:
                acc = acc + self.convert(Fraction(c)) * lam
        return acc

    def subs_lambda_zero(self, x):
        """Non-equivariant limit of a scalar that is polynomial in lambda."""
        if not self.symbolic or self.n_lambda == 0:
            raise ValueError("limit requires symbolic parameters")
        if not isinstance(x, FracElement):
            return x
        off = 1 if self.with_z else 0
        num, den = x.numer, x.denom

        def drop(p):
            out = p.ring.zero
            for mon, c in p.terms():
                if all(e == 0 for e in mon[off:]):
                    out += p.ring({mon: c})
            return out
        dn = drop(den)
        if not dn:
            raise ZeroDivisionError("denominator vanishes at lambda = 0")
        return self.field(drop(num)) / self.field(dn)


def solve_linear(rows: list[list[Any]], rhs: list[Any], zero: Any = 0) -> list[Any]:
    """Solve ``rows @ x = rhs`` exactly; unique solution required.

    Raises ``InconsistentSystem`` when no solution exists and
    ``UnderdeterminedSystem`` when the solution is not unique.
    """
    n = len(rows[0]) if rows else 0
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    piv_cols: list[int] = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, len(aug)) if not is_zero(aug[i][c])), None)
        if p is None:
            continue
        aug[r], aug[p] = aug[p], aug[r]
        inv = 1 / aug[r][c] if not isinstance(aug[r][c], int) else Fraction(1, aug[r][c])
        aug[r] = [v * inv for v in aug[r]]
        for i in range(len(aug)):
            if i != r and not is_zero(aug[i][c]):
                f = aug[i][c]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[r])]
        piv_cols.append(c)
        r += 1
        if r == len(aug):
            break
    for i in range(r, len(aug)):
        if not is_zero(aug[i][n]):
            raise InconsistentSystem(f"row {i} cannot be satisfied")
    if len(piv_cols) < n:
        free = sorted(set(range(n)) - set(piv_cols))
        raise UnderdeterminedSystem(f"unknowns {free} are not determined")
    x = [zero] * n
    for i, c in enumerate(piv_cols):
        x[c] = aug[i][n]
    return x


class InconsistentSystem(ArithmeticError):
    pass


class UnderdeterminedSystem(ArithmeticError):
    pass


# -- rational functions of z ------------------------------------------------

def _z_parts(p, fld) -> dict[int, Any]:
    """Group a polynomial of ``fld``'s ring by the exponent of z (generator 0)."""
    ring = p.ring
    parts: dict[int, Any] = {}
    for mon, c in p.terms():
        e = mon[0]
        rest = (0,) + tuple(mon[1:])
        parts[e] = parts.get(e, ring.zero) + ring({rest: c})
    return {e: fld(v) for e, v in parts.items()}


def has_pole_at_zero(f) -> bool:
    """True if the reduced rational function ``f`` (z = generator 0) has a pole at z = 0."""
    if not isinstance(f, FracElement):
        return False
    den = f.denom
    return not any(mon[0] == 0 for mon, _ in den.terms())


def laurent_at_infinity(f, z_min: int) -> dict[int, Any]:
    """Expansion of ``f`` in powers of 1/z, keeping exponents >= z_min."""
    if not isinstance(f, FracElement):
        return {0: f} if not is_zero(f) and z_min <= 0 else {}
    fld = f.field
    num = _z_parts(f.numer, fld)
    den = _z_parts(f.denom, fld)
    if not num:
        return {}
    dn, dd = max(den), max(num)
    # f = z^(dd-dn) * (sum a_i w^i) / (sum b_i w^i), w = 1/z
    a = {dd - e: c for e, c in num.items()}
    b = {dn - e: c for e, c in den.items()}
    lead = dd - dn
    n_terms = lead - z_min + 1
    if n_terms <= 0:
        return {}
    b0inv = 1 / b[0]
    out: list[Any] = []
    for i in range(n_terms):
        acc = a.get(i, fld.zero)
        for j in range(1, i + 1):
            bj = b.get(j)
            if bj is not None:
                acc = acc - bj * out[i - j]
        out.append(acc * b0inv)
    return {lead - i: c for i, c in enumerate(out) if c}


def laurent_at_zero(f, max_exp: int) -> dict[int, Any]:
    """Expansion of ``f`` around z = 0, keeping exponents <= max_exp."""
    if not isinstance(f, FracElement):
        return {0: f} if not is_zero(f) and max_exp >= 0 else {}
    fld = f.field
    num = _z_parts(f.numer, fld)
    den = _z_parts(f.denom, fld)
    if not num:
        return {}
    ln, ld = min(num), min(den)
    a = {e - ln: c for e, c in num.items()}
    b = {e - ld: c for e, c in den.items()}
    lead = ln - ld
    n_terms = max_exp - lead + 1
    if n_terms <= 0:
        return {}
    b0inv = 1 / b[0]
    out: list[Any] = []
    for i in range(n_terms):
        acc = a.get(i, fld.zero)
        for j in range(1, i + 1):
            bj = b.get(j)
            if bj is not None:
                acc = acc - bj * out[i - j]
        out.append(acc * b0inv)
    return {lead + i: c for i, c in enumerate(out) if c}


def principal_part_at_zero(f) -> dict[int, Any]:
    """Coefficients of strictly negative powers of z in the expansion at 0."""
    if not has_pole_at_zero(f):
        return {}
    return {e: c for e, c in laurent_at_zero(f, -1).items() if e < 0}


def substitute_z(f, value):
    """Evaluate the z-dependence of ``f`` at ``value`` (an element of the same field)."""
    if not isinstance(f, FracElement):
        return f
    fld = f.field
    num = _z_parts(f.numer, fld)
    den = _z_parts(f.denom, fld)

    def ev(parts):
        acc = fld.zero
        for e, c in parts.items():
            acc = acc + (c * value ** e if e else c)
        return acc
    d = ev(den)
    if is_zero(d):
        raise ZeroDivisionError("pole at the evaluation point")
    return ev(num) / d
