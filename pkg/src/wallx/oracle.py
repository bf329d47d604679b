"""Torus-localization graph sums for genus-zero stable-map invariants.

Fixed loci of the torus action on the moduli of stable maps are indexed by
decorated trees: vertices sit at fixed points, edges are degree-n covers of
one-dimensional orbits.  Summing over vertex-labelled trees (Pruefer codes)
and dividing by V! accounts for graph automorphisms; each edge carries the
cover automorphism 1/n.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

from .cohomology import AmbientRing, CohClass, FixedPointRing
from .scalars import ScalarField, as_fraction, is_zero
from .series import NovikovSeries, TruncationSpec, ZSeries
from .target import Orbit, ToricTarget, UnsupportedTarget

log = logging.getLogger(__name__)

DEFAULT_DEGREE_BOUND = 2


class UnstableModuli(ValueError):
    pass


class DegenerateOrbit(ArithmeticError):
    pass


class InternalConsistencyError(ArithmeticError):
    pass


def psi_integral(a: Sequence[int]) -> Fraction:
    """Integral of prod psi_i^{a_i} over M_{0,k}-bar."""
    k = len(a)
    if k < 3:
        raise UnstableModuli(f"M_0,{k} is unstable")
    if any(x < 0 for x in a) or sum(a) != k - 3:
        return Fraction(0)
    den = 1
    for x in a:
        den *= math.factorial(x)
    return Fraction(math.factorial(k - 3), den)


# -- markings ------------------------------------------------------------------

class Marking:
    """An insertion at a marked point, as a function of its psi class.

    ``coeff(k, a)`` is the coefficient of psi^a at fixed point k and
    ``at(k, x)`` the value with psi replaced by the weight x.
    """

    def coeff(self, k: int, a: int):
        raise NotImplementedError

    def at(self, k: int, x):
        raise NotImplementedError


@dataclass
class ClassMarking(Marking):
    values: Sequence[Any]   # restriction of the class at each fixed point
    psi: int = 0

    def coeff(self, k, a):
        return self.values[k] if a == self.psi else 0

    def at(self, k, x):
        return self.values[k] * x ** self.psi if self.psi else self.values[k]


@dataclass
class DescendantMarking(Marking):
    """values / (z - psi)."""
    values: Sequence[Any]
    z: Any

    def coeff(self, k, a):
        return self.values[k] / self.z ** (a + 1)

    def at(self, k, x):
        return self.values[k] / (self.z - x)


# -- edges -----------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeData:
    start: int
    end: int
    n: int
    beta: tuple[int, ...]      # class of the covered orbit times n
    direction: int


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def edge_weights(T: ToricTarget, orbit: Orbit, n: int, fld: ScalarField):
    """(w, H^0 weights, H^1 weights) of the pulled-back Euler sequence, zeros kept."""
    mu = T.fixed_points[orbit.start]
    w = fld.linear_form(T.divisor_weight(mu, orbit.direction))
    if is_zero(w):
        raise DegenerateOrbit(f"orbit {orbit.start}->{orbit.end} has zero tangent weight")
    omega = w / n
    h0, h1 = [], []
    for i in range(T.n_coords):
        u = fld.linear_form(T.divisor_weight(mu, i))
        delta = n * _dot(orbit.beta, T.column(i))
        if delta >= 0:
            h0 += [u - k * omega for k in range(delta + 1)]
        else:
            h1 += [u + k * omega for k in range(1, -delta)]
    return w, h0, h1


def twist_section_weights(T: ToricTarget, orbit: Orbit, n: int, fld: ScalarField):
    """Numerator and denominator weights contributed by the twisting bundles."""
    mu = T.fixed_points[orbit.start]
    w = fld.linear_form(T.divisor_weight(mu, orbit.direction))
    omega = w / n
    num, den = [], []
    for a, eps in enumerate(T.convex):
        u = fld.linear_form(T.convex_weight(mu, a))
        delta = n * _dot(orbit.beta, eps)
        if delta < 0:
            raise UnsupportedTarget("convex twist has negative degree on an orbit")
        num += [u - k * omega for k in range(delta + 1)]
    for a, eps in enumerate(T.concave):
        u = fld.linear_form(T.concave_weight(mu, a))
        delta = n * _dot(orbit.beta, eps)
        if delta >= 0:
            den += [u - k * omega for k in range(delta + 1)]
        else:
            num += [u + k * omega for k in range(1, -delta)]
    return num, den


def edge_factor(T: ToricTarget, orbit: Orbit, n: int, fld: ScalarField, twist: bool = True):
    """Contribution of an unbroken degree-n cover of ``orbit``, cover automorphism included."""
    if n < 1:
        raise ValueError("cover degree must be positive")
    _, h0, h1 = edge_weights(T, orbit, n, fld)
    zeros = [x for x in h0 if is_zero(x)]
    if len(zeros) != T.rank + 1 or any(is_zero(x) for x in h1):
        raise DegenerateOrbit(f"unexpected zero weights on orbit {orbit.start}->{orbit.end}")
    val = fld.one
    for x in h0:
        if not is_zero(x):
            val = val / x
    for x in h1:
        val = val * x
    if twist:
        num, den = twist_section_weights(T, orbit, n, fld)
        for x in num:
            val = val * x
        for x in den:
            if is_zero(x):
                raise DegenerateOrbit("zero weight in the twisting bundle")
            val = val / x
    return val / n


def recursion_coefficient(T: ToricTarget, orbit: Orbit, n: int, fld: ScalarField,
                          ring: FixedPointRing | None = None, twist: bool = True):
    """C_{mu,nu,n}: the residue coefficient at z = -w/n in the fixed-point recursion."""
    ring = ring or FixedPointRing(T, fld, twisted=twist)
    mu = orbit.start
    return edge_factor(T, orbit, n, fld, twist) / ring.weights[mu]


# -- trees ---------------------------------------------------------------------------

def _prufer_decode(seq: Sequence[int], V: int) -> list[tuple[int, int]]:
    degree = [1] * V
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = next(i for i in range(V) if degree[i] == 1)
        edges.append((leaf, x))
        degree[leaf] -= 1
        degree[x] -= 1
    u, v = [i for i in range(V) if degree[i] == 1]
    edges.append((u, v))
    return edges


def labelled_trees(V: int):
    if V == 1:
        yield []
    elif V == 2:
        yield [(0, 1)]
    else:
        for seq in itertools.product(range(V), repeat=V - 2):
            yield _prufer_decode(seq, V)


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class GraphSum:
    """Evaluator of localization sums for one target and one scalar field."""

    def __init__(self, T: ToricTarget, fld: ScalarField, twist: bool = True):
        self.T = T
        self.fld = fld
        self.twist = twist
        self.ring = FixedPointRing(T, fld, twisted=twist)
        self.fps = T.fixed_points
        self.between: dict[tuple[int, int], Orbit] = {}
        for o in T.orbits:
            if (o.start, o.end) in self.between:
                raise UnsupportedTarget("several orbits join the same fixed points")
            self.between[(o.start, o.end)] = o
        self._edge: dict[tuple[int, int, int], Any] = {}
        self._omega: dict[tuple[int, int, int], Any] = {}

    def edge(self, a: int, b: int, n: int):
        key = (a, b, n)
        if key not in self._edge:
            o = self.between[(a, b)]
            self._edge[key] = edge_factor(self.T, o, n, self.fld, self.twist)
            w = self.fld.linear_form(self.T.divisor_weight(self.fps[a], o.direction))
            self._omega[key] = w / n
            self._omega[(b, a, n)] = -w / n
        return self._edge[key]

    def omega(self, a: int, b: int, n: int):
        self.edge(min(a, b), max(a, b), n)
        return self._omega[(a, b, n)]

    def _vertex(self, k: int, omegas: list, marks: list[Marking]):
        f, m = len(omegas), len(marks)
        eT, etw = self.ring.euler_tangent[k], self.ring.euler_twist[k]
        base = (eT / etw) ** (f - 1) if f >= 1 else etw / eT
        val = f + m
        if f == 1 and m == 0:
            return base * omegas[0]
        if f == 1 and m == 1:
            return base * marks[0].at(k, -omegas[0])
        if f == 2 and m == 0:
            return base / (omegas[0] + omegas[1])
        if val < 3:
            raise UnstableModuli("contracted component with fewer than three special points")
        total = self.fld.zero
        inv_om = [1 / o for o in omegas]
        for expo in _compositions(val - 3, val):
            term = self.fld.convert(psi_integral(expo))
            for b, io in zip(expo[:f], inv_om):
                term = term * io ** (b + 1)
            for b, mk in zip(expo[f:], marks):
                c = mk.coeff(k, b)
                if is_zero(c):
                    term = None
                    break
                term = term * c
            if term is not None:
                total = total + term
        return base * total

    def invariant(self, marks: Sequence[Marking], beta: Sequence[int]):
        """Equivariant <marks>_{0,len(marks),beta} as an element of the field."""
        T = self.T
        beta = tuple(beta)
        d = T.theta_degree(beta)
        nm = len(marks)
        total = self.fld.zero
        if d == 0:
            if any(beta):
                return total
            if nm < 3:
                raise UnstableModuli("degree zero needs at least three markings")
            for k in range(len(self.fps)):
                total = total + self._vertex(k, [], list(marks))
            return total
        if not T.is_effective(beta):
            return total
        for V in range(2, d + 2):
            sub = self.fld.zero
            for edges in labelled_trees(V):
                adj = [[] for _ in range(V)]
                for e_i, (a, b) in enumerate(edges):
                    adj[a].append(e_i)
                    adj[b].append(e_i)
                for labels in self._assign_fixed_points(edges, V):
                    for degs in self._assign_degrees(edges, labels, beta):
                        sub = sub + self._tree_term(edges, adj, labels, degs, marks, V)
            total = total + sub / math.factorial(V)
        return total

    def _assign_fixed_points(self, edges, V):
        order = [0]
        parent = {0: None}
        nbrs = [[] for _ in range(V)]
        for a, b in edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        i = 0
        while i < len(order):
            v = order[i]
            for u in nbrs[v]:
                if u not in parent:
                    parent[u] = v
                    order.append(u)
            i += 1
        nfp = len(self.fps)
        labels = [None] * V

        def rec(pos):
            if pos == V:
                yield tuple(labels)
                return
            v = order[pos]
            p = parent[v]
            for k in range(nfp):
                if p is not None and (labels[p], k) not in self.between:
                    continue
                labels[v] = k
                yield from rec(pos + 1)
            labels[v] = None
        yield from rec(0)

    def _assign_degrees(self, edges, labels, beta):
        obetas = [self.between[(labels[a], labels[b])].beta for a, b in edges]
        T = self.T

        def rec(i, remaining):
            if i == len(edges):
                if not any(remaining):
                    yield ()
                return
            ob = obetas[i]
            step = T.theta_degree(ob)
            rem_d = T.theta_degree(remaining) - sum(T.theta_degree(x) for x in obetas[i + 1:])
            n = 1
            while n * step <= rem_d:
                nxt = tuple(r - n * x for r, x in zip(remaining, ob))
                for rest in rec(i + 1, nxt):
                    yield (n,) + rest
                n += 1
        yield from rec(0, beta)

    def _tree_term(self, edges, adj, labels, degs, marks, V):
        val = self.fld.one
        for (a, b), n in zip(edges, degs):
            la, lb = labels[a], labels[b]
            if la < lb:
                val = val * self.edge(la, lb, n)
            else:
                val = val * self.edge(lb, la, n)
        flag_omegas = []
        for v in range(V):
            om = []
            for e_i in adj[v]:
                a, b = edges[e_i]
                other = b if a == v else a
                om.append(self.omega(labels[v], labels[other], degs[e_i]))
            flag_omegas.append(om)
        total = self.fld.zero
        nm = len(marks)
        cache: dict[tuple[int, tuple[int, ...]], Any] = {}
        for dist in itertools.product(range(V), repeat=nm):
            term = val
            for v in range(V):
                ms = tuple(i for i in range(nm) if dist[i] == v)
                key = (v, ms)
                if key not in cache:
                    cache[key] = self._vertex(labels[v], flag_omegas[v], [marks[i] for i in ms])
                c = cache[key]
                if is_zero(c):
                    term = None
                    break
                term = term * c
            if term is not None:
                total = total + term
        return total


# -- non-equivariant front end ----------------------------------------------------------

def parse_insertion(label: str, T: ToricTarget) -> tuple[int, ...]:
    """'1', 'H', 'H^2', 'H1*H2', 'pt' -> exponent vector in the character classes."""
    s = label.strip()
    l = T.rank
    if s == "1":
        return (0,) * l
    if s == "pt":
        ring = AmbientRing(T, twisted=bool(T.convex))
        top = [m for m, d in zip(ring.monomials, ring.degrees) if d == ring.dim]
        if len(top) != 1:
            raise ValueError("no unique point class")
        return top[0]
    exps = [0] * l
    for part in s.split("*"):
        part = part.strip()
        base, _, power = part.partition("^")
        k = int(power) if power else 1
        if base == "H" and l == 1:
            a = 0
        elif base.startswith("H") and base[1:].isdigit():
            a = int(base[1:]) - 1
        else:
            raise ValueError(f"cannot parse insertion {label!r}")
        if not 0 <= a < l:
            raise ValueError(f"no character class {base}")
        exps[a] += k
    return tuple(exps)


def virtual_dimension(T: ToricTarget, beta: Sequence[int], n_marks: int) -> int:
    dim = T.dimension - len(T.convex) + len(T.concave)
    return dim + T.grading(beta)["twisted_index"] + n_marks - 3


def _lambda_values(T: ToricTarget, seed: int) -> list[Fraction]:
    fld = ScalarField.random_specialization(T.n_lambda, seed=seed)
    return fld.lam_values


def gw_invariant(T: ToricTarget, insertions: Sequence[Sequence[int]], psi: Sequence[int] | None,
                 beta: Sequence[int] | int, *, bound: int = DEFAULT_DEGREE_BOUND,
                 check_seeds: Sequence[int] = (1, 2), twist: bool = True) -> Fraction:
    """Non-equivariant <prod H^e psi^a>_{0,k,beta} from the equivariant graph sum.

    Classes are lifted equivariantly, the sum is evaluated at random rational
    torus weights and the result is required to agree across ``check_seeds``.
    """
    if isinstance(beta, int):
        beta = (beta,)
    beta = tuple(beta)
    psi = list(psi) if psi is not None else [0] * len(insertions)
    if len(psi) != len(insertions):
        raise ValueError("one psi power per insertion")
    d = T.theta_degree(beta)
    if d > bound:
        raise ValueError(f"degree {d} exceeds the oracle bound {bound}")
    if d > DEFAULT_DEGREE_BOUND:
        log.warning("degree %d graph sum requested; this can take minutes", d)
    deg = sum(sum(e) for e in insertions) + sum(psi)
    if deg != virtual_dimension(T, beta, len(insertions)):
        return Fraction(0)
    results = []
    for seed in check_seeds:
        fld = ScalarField(T.n_lambda, lam_values=_lambda_values(T, seed))
        gs = GraphSum(T, fld, twist)
        marks = [ClassMarking(gs.ring.equivariant_monomial(e).coeffs, a) for e, a in zip(insertions, psi)]
        results.append(as_fraction(gs.invariant(marks, beta)))
    if any(r != results[0] for r in results[1:]):
        raise InternalConsistencyError(f"non-equivariant limit depends on torus weights: {results}")
    return results[0]


def graph_sum_invariant(T: ToricTarget, marks: Sequence[Marking], beta, fld: ScalarField,
                        twist: bool = True):
    """Equivariant invariant for explicit markings (restrictions in ``fld``)."""
    if isinstance(beta, int):
        beta = (beta,)
    return GraphSum(T, fld, twist).invariant(marks, beta)


def oracle_small_J(T: ToricTarget, d_max: int, *, bound: int = DEFAULT_DEGREE_BOUND,
                   ring: AmbientRing | None = None, z_min: int | None = None) -> ZSeries:
    """1 + sum_beta q^beta sum_i gamma_i <gamma^i psi^a>_{0,1,beta} z^{-a-2}."""
    if d_max > bound:
        raise ValueError(f"degree {d_max} exceeds the oracle bound {bound}")
    ring = ring or AmbientRing(T, twisted=bool(T.convex))
    duals = ring.dual_basis()
    classes = T.effective_classes(d_max)
    if z_min is None:
        worst = max((T.grading(b)["twisted_index"] for b in classes), default=0)
        z_min = -ring.dim - max(worst, 0) - 2
    trunc = TruncationSpec(d_max, 0, z_min, 1)
    coeffs: dict = {((0,) * T.rank, (), 0): ring.one}
    for beta in classes:
        if not any(beta):
            continue
        vd = virtual_dimension(T, beta, 1)
        for i in range(ring.size):
            dual = duals[i]
            deg = ring.dim - ring.degrees[i]
            a = vd - deg
            if a < 0:
                continue
            val = Fraction(0)
            for j, c in enumerate(dual.coeffs):
                if c and ring.degrees[j] == deg:
                    val += c * gw_invariant(T, [ring.monomials[j]], [a], beta, bound=bound)
            if val:
                key = (tuple(beta), (), -(a + 2))
                coeffs[key] = coeffs.get(key, ring.zero) + ring.basis_class(i) * val
    return ZSeries(T, trunc, 0, coeffs)


def oracle_J_fixed_point(T: ToricTarget, d_max: int, fld: ScalarField, twist: bool = True) -> NovikovSeries:
    """Fixed-point restrictions of the small J, exact in z (``fld`` has z adjoined)."""
    gs = GraphSum(T, fld, twist)
    ring = gs.ring
    z = fld.z
    coeffs: dict = {((0,) * T.rank, ()): ring.one}
    for beta in T.effective_classes(d_max):
        if not any(beta):
            continue
        vals = []
        for mu in range(ring.size):
            dual = [(1 / (ring.weights[mu] * z)) if k == mu else fld.zero for k in range(ring.size)]
            vals.append(gs.invariant([DescendantMarking(dual, z)], beta))
        coeffs[(tuple(beta), ())] = CohClass(ring, vals)
    return NovikovSeries(T, TruncationSpec(d_max), 0, coeffs)
