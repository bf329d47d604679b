"""Fixed-point recursion and reconstruction from mod-1/z^2 data.

Each fixed-point component S_mu is a Novikov series whose coefficients are
rational functions of z.  At a key (beta, k) the coefficient splits as

    S_mu = R_mu(1/z) + sum_{nu, n} C_{mu,nu,n} / (z + w/n) * S_nu(-w/n)

where the recursion part only involves keys of smaller theta-degree.  The
polynomial R_mu is pinned down by the supplied z^0, z^-1 coefficients and by
requiring D(S_mu) = S_mu(q, z) S_mu(q e^{-z y L_theta}, -z) to have no pole at
z = 0 order by order in y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

from .cohomology import FixedPointRing
from .oracle import recursion_coefficient
from .scalars import (InconsistentSystem, ScalarField, UnderdeterminedSystem, is_zero,
                      laurent_at_infinity, principal_part_at_zero, solve_linear, substitute_z)
from .series import NovikovSeries, TruncationSpec
from .target import ToricTarget


class ReconstructionError(ArithmeticError):
    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class RecursionTerm:
    nu: int
    n: int
    beta: tuple[int, ...]     # n times the orbit class
    weight: Any               # w(mu, nu), tangent weight at mu
    coefficient: Any          # C_{mu,nu,n}


def recursion_data(T: ToricTarget, fld: ScalarField, max_degree: int,
                   twist: bool = True) -> dict[int, list[RecursionTerm]]:
    ring = FixedPointRing(T, fld, twisted=twist)
    out: dict[int, list[RecursionTerm]] = {k: [] for k in range(len(T.fixed_points))}
    for o in T.orbits:
        step = T.theta_degree(o.beta)
        w = fld.linear_form(T.divisor_weight(T.fixed_points[o.start], o.direction))
        n = 1
        while n * step <= max_degree:
            C = recursion_coefficient(T, o, n, fld, ring, twist)
            out[o.start].append(RecursionTerm(o.end, n, tuple(n * b for b in o.beta), w, C))
            n += 1
    return out


def _z_coeffs_mod2(f) -> tuple[Any, Any]:
    lt = laurent_at_infinity(f, -1)
    pos = [e for e in lt if e > 0]
    if pos:
        raise ReconstructionError("initial data has positive z-powers")
    return lt.get(0, 0), lt.get(-1, 0)


def d_series_polar(S: NovikovSeries, key, y_order: int, fld: ScalarField, skip_unknown: bool = False):
    """Polar parts at z = 0 of the y^p coefficients of D(S) at ``key``."""
    beta, k = key
    T = S.target
    z = fld.z
    items = S.items()
    out = []
    for p in range(y_order + 1):
        acc = fld.zero
        for (b1, k1), v1 in items:
            b2 = tuple(x - y for x, y in zip(beta, b1))
            k2 = tuple(x - y for x, y in zip(k, k1))
            if any(x < 0 for x in k2):
                continue
            v2 = S.get((b2, k2), None)
            if v2 is None:
                continue
            if skip_unknown and ((b1, k1) == key or (b2, k2) == key):
                continue
            d2 = T.theta_degree(b2)
            if p and d2 == 0:
                continue
            factor = (-z * d2) ** p / math.factorial(p) if p else fld.one
            acc = acc + v1 * substitute_z(v2, -z) * factor
        out.append(principal_part_at_zero(acc))
    return out


def uniqueness_reconstruct(T: ToricTarget, initial: Sequence[NovikovSeries],
                           recursion: dict[int, list[RecursionTerm]],
                           base: Sequence[NovikovSeries], fld: ScalarField,
                           trunc: TruncationSpec, y_order: int = 2) -> list[NovikovSeries]:
    """Unique system {S_mu} with given mod-1/z^2 data, recursion and polynomiality.

    ``base[mu]`` holds the beta = 0 part (i_mu^* e^{t/z} gamma); ``initial[mu]``
    holds values whose z^0 and z^-1 Laurent coefficients at infinity are
    prescribed for every beta != 0 key.
    """
    z = fld.z
    nfp = len(initial)
    n_t = base[0].n_t
    zero_b = (0,) * T.rank
    S = [NovikovSeries(T, trunc, n_t, dict(base[mu].items())) for mu in range(nfp)]
    for mu in range(nfp):
        if any(k[0] != zero_b for k in base[mu].keys()):
            raise ReconstructionError("base data must be supported in degree zero")
    g = [S[mu].get((zero_b, (0,) * n_t), fld.zero) for mu in range(nfp)]
    for mu in range(nfp):
        if is_zero(g[mu]) or not is_zero(g[mu] - substitute_z(g[mu], fld.zero * z)):
            raise ReconstructionError("leading coefficient must be a nonzero constant", (mu, zero_b))
    keys = []
    for beta in T.effective_classes(trunc.max_theta_degree):
        if not any(beta):
            continue
        for m in range(trunc.max_t_degree + 1):
            for k in _multi_indices(n_t, m):
                keys.append((tuple(beta), k))
    keys.sort(key=lambda bk: (T.theta_degree(bk[0]), sum(bk[1]), bk))
    for key in keys:
        beta, k = key
        for mu in range(nfp):
            rec = fld.zero
            for term in recursion[mu]:
                rest = tuple(b - x for b, x in zip(beta, term.beta))
                if any(x < 0 for x in rest) and not T.is_effective(rest):
                    continue
                prev = S[term.nu].get((rest, k), None)
                if prev is None:
                    continue
                shift = term.weight / term.n
                rec = rec + term.coefficient / (z + shift) * substitute_z(prev, -shift)
            c0, c1 = _z_coeffs_mod2(initial[mu].get(key, fld.zero))
            rec0, rec1 = _z_coeffs_mod2(rec)
            r0 = fld.convert(c0) - rec0
            r1 = fld.convert(c1) - rec1
            known = rec + r0 + r1 / z
            trial = S[mu]._new(dict(S[mu].items()))
            trial._c[key] = known
            polar = d_series_polar(trial, key, y_order, fld)
            d = T.theta_degree(beta)
            top = max((max(-e for e in pp) for pp in polar if pp), default=0)
            J = top + y_order + 1
            unknowns = list(range(2, J + 1))
            rows, rhs = [], []
            for p, pp in enumerate(polar):
                for e in range(1, top + y_order + 2):
                    row = []
                    for j in unknowns:
                        c = fld.zero
                        if p == 0 and j == e:
                            c = c + g[mu]
                        if j - p == e:
                            c = c + g[mu] * (-1) ** j * fld.convert((-d) ** p) / math.factorial(p)
                        row.append(c)
                    rows.append(row)
                    rhs.append(-pp.get(-e, fld.zero))
            try:
                sol = solve_linear(rows, rhs, zero=fld.zero) if unknowns else []
            except InconsistentSystem as exc:
                raise ReconstructionError(
                    f"no solution at fixed point {mu}, class {beta}, t-exponent {k}", (mu, beta, k)) from exc
            except UnderdeterminedSystem as exc:
                raise ReconstructionError(
                    f"solution not unique at fixed point {mu}, class {beta}, t-exponent {k}", (mu, beta, k)) from exc
            value = known
            for j, r in zip(unknowns, sol):
                if not is_zero(r):
                    value = value + r / z ** j
            S[mu] = S[mu] + NovikovSeries(T, trunc, n_t, {key: value})
    return S


def _multi_indices(n: int, total: int):
    if n == 0:
        if total == 0:
            yield ()
        return
    if n == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _multi_indices(n - 1, total - first):
            yield (first,) + rest


def recursion_reconstruct(T: ToricTarget, initial: Sequence[NovikovSeries], d_max: int,
                          fld: ScalarField, *, base: Sequence[NovikovSeries] | None = None,
                          twist: bool = True, y_order: int = 2) -> list[NovikovSeries]:
    """S_mu(gamma) at t = 0 from mod-1/z^2 data, using edge-factor recursion coefficients."""
    trunc = TruncationSpec(d_max)
    nfp = len(T.fixed_points)
    if base is None:
        base = [NovikovSeries.monomial(T, trunc, 0, value=fld.one) for _ in range(nfp)]
    data = recursion_data(T, fld, d_max, twist)
    return uniqueness_reconstruct(T, initial, data, base, fld, trunc, y_order)
