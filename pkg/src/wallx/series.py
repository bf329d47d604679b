"""Truncated Novikov series and Laurent-in-z series.

A ``NovikovSeries`` is a sparse map (beta, k) -> value where beta is a curve
class (integer vector pairing with the characters), k a multi-index in the
t-variables and value an exact scalar or a ``CohClass``.  A ``ZSeries`` adds the
exponent of z to the key.  Truncation is by theta-degree beta(L_theta), by
total t-degree and, for ``ZSeries``, by a window of z-exponents.

Values may also be rational functions of z (a scalar field with z adjoined);
such Novikov series are how the equivariant machinery carries K(z)-valued
coefficients without any z-truncation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Sequence

from sympy import QQ
from sympy.polys.fields import FracElement

from .cohomology import CohClass
from .scalars import (IncompatibleOperands, NotInvertible, fmt_rational, has_pole_at_zero,
                      is_zero)
from .target import ToricTarget, UnsupportedTarget


class InvalidTransformation(ValueError):
    pass


@dataclass(frozen=True)
class TruncationSpec:
    max_theta_degree: int
    max_t_degree: int = 0
    z_min: int = -16
    z_max: int = 16

    def __post_init__(self):
        if self.max_theta_degree < 0 or self.max_t_degree < 0:
            raise ValueError("truncation degrees must be nonnegative")
        if self.z_min > self.z_max:
            raise ValueError("z window is empty")

    def meet(self, other: "TruncationSpec") -> "TruncationSpec":
        return TruncationSpec(min(self.max_theta_degree, other.max_theta_degree),
                              min(self.max_t_degree, other.max_t_degree),
                              max(self.z_min, other.z_min), min(self.z_max, other.z_max))

    def to_json(self) -> dict:
        return {"max_theta_degree": self.max_theta_degree, "max_t_degree": self.max_t_degree,
                "z_window": [self.z_min, self.z_max]}


def _mul(x, y):
    if isinstance(y, CohClass) and not isinstance(x, CohClass):
        return y * x
    return x * y


def _add_to(d: dict, key, val):
    cur = d.get(key)
    d[key] = val if cur is None else cur + val


def _vadd(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


class _Base:
    """Shared storage and arithmetic; subclasses fix the key shape."""

    _zkey = False

    def __init__(self, target: ToricTarget, trunc: TruncationSpec, n_t: int = 0,
                 coeffs: dict | None = None):
        self.target = target
        self.trunc = trunc
        self.n_t = n_t
        self._c: dict = {}
        for key, val in (coeffs or {}).items():
            key = self._norm_key(key)
            if isinstance(val, int):
                val = Fraction(val)
            if self._in_range(key) and not is_zero(val):
                self._c[key] = val

    # -- keys ---------------------------------------------------------------
    def _norm_key(self, key):
        beta, k = tuple(int(x) for x in key[0]), tuple(int(x) for x in key[1])
        if len(beta) != self.target.rank or len(k) != self.n_t:
            raise IncompatibleOperands(f"key {key} has the wrong shape")
        if self._zkey:
            return (beta, k, int(key[2]))
        return (beta, k)

    def _in_range(self, key) -> bool:
        if self.target.theta_degree(key[0]) > self.trunc.max_theta_degree:
            return False
        if sum(key[1]) > self.trunc.max_t_degree:
            return False
        if self._zkey and not (self.trunc.z_min <= key[2] <= self.trunc.z_max):
            return False
        return True

    def theta_degree(self, beta: Sequence[int]) -> int:
        return self.target.theta_degree(beta)

    def _new(self, coeffs: dict, trunc: TruncationSpec | None = None):
        return type(self)(self.target, trunc or self.trunc, self.n_t, coeffs)

    # -- container protocol ---------------------------------------------------
    def items(self):
        return sorted(self._c.items(), key=lambda kv: kv[0])

    def keys(self):
        return sorted(self._c)

    def __getitem__(self, key):
        return self._c.get(self._norm_key(key), 0)

    def get(self, key, default=0):
        return self._c.get(self._norm_key(key), default)

    def __len__(self):
        return len(self._c)

    def is_zero(self) -> bool:
        return not self._c

    def filter(self, pred: Callable[[tuple], bool]):
        return self._new({k: v for k, v in self._c.items() if pred(k)})

    def map(self, fn: Callable[[Any], Any]):
        return self._new({k: fn(v) for k, v in self._c.items()})

    def map_items(self, fn: Callable[[tuple, Any], Any]):
        return self._new({k: fn(k, v) for k, v in self._c.items()})

    def with_trunc(self, trunc: TruncationSpec):
        return type(self)(self.target, trunc, self.n_t, self._c)

    # -- arithmetic -----------------------------------------------------------
    def _check(self, other):
        if other.target != self.target:
            raise IncompatibleOperands("series are bound to different targets")
        if other.n_t != self.n_t:
            raise IncompatibleOperands("series use different numbers of t-variables")

    def _coerce(self, other):
        if isinstance(other, _Base):
            self._check(other)
            if isinstance(self, ZSeries) and not isinstance(other, ZSeries):
                other = ZSeries.from_novikov(other, self.trunc)
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            if is_zero(other):
                return self
            o = self._new({self._unit_key(): other})
        if isinstance(o, ZSeries) and not isinstance(self, ZSeries):
            return o + self
        out = dict(self._c)
        for k, v in o._c.items():
            _add_to(out, k, v)
        return self._new(out, self.trunc.meet(o.trunc))

    __radd__ = __add__

    def __neg__(self):
        return self.map(lambda v: -v)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _unit_key(self):
        z = (0,) * self.target.rank, (0,) * self.n_t
        return z + (0,) if self._zkey else z

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return self.map(lambda v: _mul(v, other))
        if isinstance(o, ZSeries) and not isinstance(self, ZSeries):
            return o.__mul__(self)
        trunc = self.trunc.meet(o.trunc)
        D, M = trunc.max_theta_degree, trunc.max_t_degree
        out: dict = {}
        theta = self.target.theta_degree
        right = [(k, v, theta(k[0]), sum(k[1])) for k, v in o._c.items()]
        for ka, va in self._c.items():
            da, ma = theta(ka[0]), sum(ka[1])
            for kb, vb, db, mb in right:
                if da + db > D or ma + mb > M:
                    continue
                if self._zkey:
                    e = ka[2] + kb[2]
                    if e < trunc.z_min or e > trunc.z_max:
                        continue
                    key = (_vadd(ka[0], kb[0]), _vadd(ka[1], kb[1]), e)
                else:
                    key = (_vadd(ka[0], kb[0]), _vadd(ka[1], kb[1]))
                _add_to(out, key, _mul(va, vb))
        return self._new(out, trunc)

    def __rmul__(self, other):
        if isinstance(other, _Base):
            return other.__mul__(self)
        return self.map(lambda v: _mul(v, other))

    def __truediv__(self, other):
        if isinstance(other, _Base):
            return self * other.invert()
        return self.map(lambda v: v / other)

    def __pow__(self, n: int):
        if n < 0:
            return self.invert() ** (-n)
        out = self.one_like()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def one_like(self, unit=None):
        return self._new({self._unit_key(): 1 if unit is None else unit})

    def __eq__(self, other):
        if isinstance(other, _Base):
            d = self - other
            return d.is_zero()
        if is_zero(other):
            return self.is_zero()
        return self == self.one_like(other)

    __hash__ = None

    def invert(self):
        """Multiplicative inverse; the (0, 0[, z^0]) coefficient must be a unit."""
        u = self._unit_key()
        c0 = self._c.get(u)
        if c0 is None or is_zero(c0):
            raise NotInvertible("leading coefficient is zero")
        if self._zkey:
            for k in self._c:
                if k[0] == u[0] and k[1] == u[1] and k[2] > 0:
                    raise NotInvertible("leading part has positive z-powers")
        try:
            c0inv = c0.inverse() if isinstance(c0, CohClass) else 1 / c0
        except (ZeroDivisionError, NotInvertible) as exc:
            raise NotInvertible(str(exc)) from exc
        nil = self * c0inv - 1
        out = self.one_like(1)
        term = self.one_like(1)
        for _ in range(10_000):
            term = -(term * nil)
            if term.is_zero():
                break
            out = out + term
        else:  # pragma: no cover - guarded by truncation
            raise NotInvertible("inversion did not terminate")
        return out * c0inv

    # -- Novikov/t operations ---------------------------------------------------
    def euler_derivative(self, a: int):
        """q_a d/dq_a: multiply each coefficient by beta_a."""
        return self.map_items(lambda k, v: v * k[0][a])

    def t_derivative(self, i: int):
        def shift(k):
            kk = list(k[1])
            kk[i] -= 1
            return (k[0], tuple(kk)) + k[2:]
        return self._new({shift(k): v * k[1][i] for k, v in self._c.items() if k[1][i] > 0})

    def restrict_t_zero(self):
        return self.filter(lambda k: not any(k[1]))

    def substitute_t(self, tau: Sequence["NovikovSeries"]):
        """Compose with t_i -> tau_i; each tau_i must be t_i + O(q)."""
        _check_tau(tau, self)
        if self.n_t == 0:
            return self
        # powers of each tau_i, cached
        pows: list[list] = [[NovikovSeries.monomial(self.target, self.trunc, self.n_t)] for _ in tau]
        out = self._new({})
        grouped: dict[tuple, dict] = {}
        for key, val in self._c.items():
            rest = (key[0],) + key[2:]
            grouped.setdefault(key[1], {})[rest] = val
        for k, parts in grouped.items():
            mono = NovikovSeries.monomial(self.target, self.trunc, self.n_t)
            for i, e in enumerate(k):
                while len(pows[i]) <= e:
                    pows[i].append(pows[i][-1] * tau[i])
                if e:
                    mono = mono * pows[i][e]
            zero_t = (0,) * self.n_t
            base = self._new({(r[0], zero_t) + r[1:]: v for r, v in parts.items()})
            out = out + base * mono
        return out

    def substitute_novikov(self, g: Sequence["NovikovSeries"], pairing: Sequence[Sequence[int]] | None = None):
        """Replace q^beta by q^beta exp(sum_j g_j (p_j . beta))."""
        G = _character_shift(self.target, g, pairing)
        if G is None:
            return self
        exps: dict[tuple, Any] = {}
        out: dict = {}
        for key, val in self._c.items():
            beta = key[0]
            if beta not in exps:
                x = None
                for a, b in enumerate(beta):
                    if b and G[a] is not None:
                        x = G[a] * b if x is None else x + G[a] * b
                exps[beta] = _exp_nilpotent(x, self.target, self.trunc, self.n_t)
            e = exps[beta]
            rest = key[2:]
            for (b2, k2), v2 in e._c.items():
                nk = (_vadd(beta, b2), _vadd(key[1], k2)) + rest
                _add_to(out, nk, _mul(val, v2))
        return self._new(out)

    # -- serialization ---------------------------------------------------------
    def to_json(self, basis_labels: Sequence[str] | None = None) -> dict:
        gens = None
        terms = []
        for key, val in self.items():
            enc, g = _encode_value(val)
            gens = gens or g
            entry = {"beta": list(key[0]), "t_exp": list(key[1]), "value": enc}
            entry["z_exp"] = key[2] if self._zkey else 0
            terms.append(entry)
        out = {"kind": "zseries" if self._zkey else "novikov",
               "rank": self.target.rank, "n_t": self.n_t,
               "truncation": self.trunc.to_json(), "terms": terms}
        if gens:
            out["generators"] = list(gens)
        if basis_labels is not None:
            out["basis"] = list(basis_labels)
        return out

    def dumps(self, **kw) -> str:
        return json.dumps(self.to_json(**kw), sort_keys=True, indent=1)

    def __repr__(self):
        body = ", ".join(f"{k}: {v}" for k, v in self.items()[:8])
        more = "" if len(self) <= 8 else f", ... ({len(self)} terms)"
        return f"{type(self).__name__}({{{body}{more}}})"


class NovikovSeries(_Base):
    _zkey = False

    @classmethod
    def monomial(cls, target, trunc, n_t=0, beta=None, k=None, value=1):
        beta = tuple(beta) if beta is not None else (0,) * target.rank
        k = tuple(k) if k is not None else (0,) * n_t
        return cls(target, trunc, n_t, {(beta, k): value})

    @classmethod
    def t_variable(cls, target, trunc, n_t, i, value=1):
        k = [0] * n_t
        k[i] = 1
        return cls.monomial(target, trunc, n_t, k=k, value=value)

    def z_regular_check(self) -> list[tuple]:
        """Keys whose rational-in-z value has a pole at z = 0."""
        bad = []
        for key, val in self.items():
            vals = val.coeffs if isinstance(val, CohClass) else (val,)
            if any(isinstance(v, FracElement) and has_pole_at_zero(v) for v in vals):
                bad.append(key)
        return bad


class ZSeries(_Base):
    _zkey = True

    @classmethod
    def from_novikov(cls, s: NovikovSeries, trunc: TruncationSpec | None = None, z_exp: int = 0):
        t = trunc or TruncationSpec(s.trunc.max_theta_degree, s.trunc.max_t_degree)
        return cls(s.target, t, s.n_t, {(k[0], k[1], z_exp): v for k, v in s._c.items()})

    @classmethod
    def monomial(cls, target, trunc, n_t=0, beta=None, k=None, z_exp=0, value=1):
        beta = tuple(beta) if beta is not None else (0,) * target.rank
        k = tuple(k) if k is not None else (0,) * n_t
        return cls(target, trunc, n_t, {(beta, k, z_exp): value})

    def z_coefficient(self, e: int) -> NovikovSeries:
        return NovikovSeries(self.target, self.trunc, self.n_t,
                             {(k[0], k[1]): v for k, v in self._c.items() if k[2] == e})

    def z_exponents(self) -> list[int]:
        return sorted({k[2] for k in self._c})

    def z_negate(self) -> "ZSeries":
        return self.map_items(lambda k, v: -v if k[2] % 2 else v)

    def shift_z(self, n: int) -> "ZSeries":
        t = self.trunc
        trunc = TruncationSpec(t.max_theta_degree, t.max_t_degree, t.z_min + n, t.z_max + n)
        return ZSeries(self.target, trunc, self.n_t, {(k[0], k[1], k[2] + n): v for k, v in self._c.items()})

    def nonnegative_part(self) -> "ZSeries":
        return self.filter(lambda k: k[2] >= 0)

    def z_regular_check(self) -> list[tuple]:
        """(beta, k) keys carrying a nonzero strictly negative z-power."""
        return sorted({(k[0], k[1]) for k in self._c if k[2] < 0})

    def z_truncate_mod(self, power: int = 2) -> "ZSeries":
        """Keep exactly the z-exponents >= 1 - power (power=2: mod 1/z^2)."""
        return self.filter(lambda k: k[2] >= 1 - power)


def z_regular_check(a) -> list[tuple]:
    return a.z_regular_check()


def z_truncate_mod(a: ZSeries, power: int = 2) -> ZSeries:
    return a.z_truncate_mod(power)


def series_multiply(a, b):
    return a * b


def series_invert(a):
    return a.invert()


def substitute_t(a, tau):
    return a.substitute_t(tau)


def substitute_novikov(a, g, pairing=None):
    return a.substitute_novikov(g, pairing)


def exp_t_over_z(target, trunc: TruncationSpec, t_classes: Sequence[Any], unit=1) -> ZSeries:
    """e^{t/z} with t = sum_i t_i T_i for the classes (or scalars) T_i."""
    n_t = len(t_classes)
    x = ZSeries(target, trunc, n_t, {})
    for i, c in enumerate(t_classes):
        k = [0] * n_t
        k[i] = 1
        x = x + ZSeries(target, trunc, n_t, {((0,) * target.rank, tuple(k), -1): c})
    out = ZSeries.monomial(target, trunc, n_t, value=unit)
    term = out
    for m in range(1, trunc.max_t_degree + 1):
        term = term * x / m
        if term.is_zero():
            break
        out = out + term
    return out


# -- helpers -------------------------------------------------------------------

def _check_tau(tau, a):
    if len(tau) != a.n_t:
        raise InvalidTransformation(f"need {a.n_t} substitutions, got {len(tau)}")
    zero_b = (0,) * a.target.rank
    for i, s in enumerate(tau):
        if s.n_t != a.n_t:
            raise InvalidTransformation("substitution uses a different number of t-variables")
        lead = {k[1]: v for k, v in s._c.items() if k[0] == zero_b}
        want = tuple(int(j == i) for j in range(a.n_t))
        if set(lead) != {want} or lead[want] != 1:
            raise InvalidTransformation(f"tau_{i + 1} is not t_{i + 1} + O(q)")


def identity_transformation(target, trunc, n_t) -> list[NovikovSeries]:
    return [NovikovSeries.t_variable(target, trunc, n_t, i) for i in range(n_t)]


def invert_transformation(tau: Sequence[NovikovSeries]) -> list[NovikovSeries]:
    """Functional inverse sigma with tau(sigma(t)) = t, order by order in q."""
    if not tau:
        return []
    s0 = tau[0]
    ident = identity_transformation(s0.target, s0.trunc, s0.n_t)
    _check_tau(tau, s0)
    sigma = list(ident)
    for _ in range(s0.trunc.max_theta_degree + 1):
        sigma = [t - (ti.substitute_t(sigma) - sg) for t, ti, sg in zip(ident, tau, sigma)]
    return sigma


def _character_shift(target, g, pairing):
    """G_a = sum_j g_j p_j[a]: the shift of log q_a."""
    if not g:
        return None
    l = target.rank
    P = [list(p) for p in pairing] if pairing is not None else [[int(a == j) for a in range(l)] for j in range(l)]
    if len(P) != len(g):
        raise UnsupportedTarget("need one shift per divisor coordinate")
    if len(P) < l or _rank_int(P) < l:
        raise UnsupportedTarget("divisors do not coordinatize the curve classes")
    G = []
    for a in range(l):
        acc = None
        for j, gj in enumerate(g):
            if P[j][a]:
                term = gj * P[j][a]
                acc = term if acc is None else acc + term
        G.append(acc)
    zb = (0,) * l
    for x in G:
        if x is not None and any(k[0] == zb for k in x._c):
            raise InvalidTransformation("Novikov shift must be O(q)")
    return G


def invert_novikov_shift(g: Sequence[NovikovSeries], pairing=None) -> list[NovikovSeries]:
    """Shift h with substitute_novikov(substitute_novikov(a, g), h) == a."""
    if not g:
        return []
    target = g[0].target
    l = target.rank
    P = [list(p) for p in pairing] if pairing is not None else [[int(a == j) for a in range(l)] for j in range(l)]
    if len(P) != l:
        raise UnsupportedTarget("inverse shift needs a square divisor coordinatization")
    G = _character_shift(target, g, P)
    zero = g[0].map(lambda v: 0 * v).filter(lambda k: False)
    Gf = [x if x is not None else zero for x in G]
    H = [zero] * l
    for _ in range(g[0].trunc.max_theta_degree + 1):
        Hj = _to_divisor_coords(H, P)
        H = [-(x.substitute_novikov(Hj, P)) for x in Gf]
    return _to_divisor_coords(H, P)


def _to_divisor_coords(H, P):
    # solve sum_j h_j P[j][a] = H_a for h_j
    l = len(P)
    Pt = [[Fraction(P[j][a]) for j in range(l)] for a in range(l)]
    inv = _invert_int(Pt)
    return [sum((H[a] * inv[j][a] for a in range(l) if inv[j][a]), H[0] * 0) for j in range(l)]


def _invert_int(m):
    n = len(m)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(m)]
    for c in range(n):
        p = next(r for r in range(c, n) if aug[r][c] != 0)
        aug[c], aug[p] = aug[p], aug[c]
        pv = aug[c][c]
        aug[c] = [v / pv for v in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[c])]
    return [r[n:] for r in aug]


def _rank_int(rows) -> int:
    m = [[Fraction(x) for x in r] for r in rows]
    rank = 0
    for c in range(len(m[0]) if m else 0):
        p = next((r for r in range(rank, len(m)) if m[r][c] != 0), None)
        if p is None:
            continue
        m[rank], m[p] = m[p], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / m[rank][c]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def _exp_nilpotent(x, target, trunc, n_t) -> NovikovSeries:
    one = NovikovSeries.monomial(target, trunc, n_t)
    if x is None or x.is_zero():
        return one
    out, term = one, one
    for m in range(1, trunc.max_theta_degree + trunc.max_t_degree + 2):
        term = term * x / m
        if term.is_zero():
            break
        out = out + term
    return out


# -- value encoding --------------------------------------------------------------

def _encode_poly(p) -> list[dict]:
    return [{"coeff": fmt_rational(Fraction(int(c.numerator), int(c.denominator))),
             "exponents": list(mon)} for mon, c in sorted(p.terms())]


def _encode_scalar(v):
    if isinstance(v, FracElement):
        gens = [str(g) for g in v.field.gens]
        if v.numer.is_ground and v.denom.is_ground:
            from .scalars import as_fraction
            return fmt_rational(as_fraction(v)), None
        return {"num": _encode_poly(v.numer), "den": _encode_poly(v.denom)}, gens
    return fmt_rational(Fraction(v)), None


def _encode_value(v):
    if isinstance(v, CohClass):
        out, gens = [], None
        for c in v.coeffs:
            e, g = _encode_scalar(c)
            out.append(e)
            gens = gens or g
        return {"class": out}, gens
    return _encode_scalar(v)


def _decode_poly(entries, ring):
    out = ring.zero
    for e in entries:
        q = Fraction(e["coeff"])
        out += ring({tuple(e["exponents"]): QQ(q.numerator, q.denominator)})
    return out


def _decode_scalar(enc, fld):
    if isinstance(enc, str):
        q = Fraction(enc)
        return fld.convert(q) if fld is not None else q
    if fld is None or fld.field is None:
        raise ValueError("rational function value needs a scalar field")
    ring = fld.field.ring
    return fld.field(_decode_poly(enc["num"], ring)) / fld.field(_decode_poly(enc["den"], ring))


def series_from_json(data: dict | str, target: ToricTarget, *, ring=None, fld=None):
    """Inverse of ``to_json``: ``ring`` rebuilds class values, ``fld`` rational functions."""
    if isinstance(data, str):
        data = json.loads(data)
    tj = data["truncation"]
    trunc = TruncationSpec(tj["max_theta_degree"], tj["max_t_degree"], *tj["z_window"])
    if fld is None and ring is not None:
        fld = getattr(ring, "field", None)
    coeffs = {}
    zkey = data["kind"] == "zseries"
    for t in data["terms"]:
        enc = t["value"]
        if isinstance(enc, dict) and "class" in enc:
            if ring is None:
                raise ValueError("class-valued series needs a ring to parse")
            val = CohClass(ring, [_decode_scalar(c, fld) for c in enc["class"]])
        else:
            val = _decode_scalar(enc, fld)
        key = (tuple(t["beta"]), tuple(t["t_exp"])) + ((t["z_exp"],) if zkey else ())
        coeffs[key] = val
    cls = ZSeries if zkey else NovikovSeries
    return cls(target, trunc, data["n_t"], coeffs)


__all__ = ["TruncationSpec", "NovikovSeries", "ZSeries", "InvalidTransformation",
           "series_multiply", "series_invert", "substitute_t", "substitute_novikov",
           "z_regular_check", "z_truncate_mod", "exp_t_over_z", "invert_transformation",
           "invert_novikov_shift", "identity_transformation", "series_from_json"]
