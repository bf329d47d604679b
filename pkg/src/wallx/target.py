"""Toric GIT targets C^N // (C*)^l with optional twists and torus data."""

from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class TargetValidationError(ValueError):
    pass


class NonIsolatedFixedPoint(ValueError):
    pass


class UnsupportedTarget(ValueError):
    pass


Vector = tuple[int, ...]


def _dot(a: Sequence, b: Sequence):
    return sum(x * y for x, y in zip(a, b))


def _solve_square(cols: list[Vector], rhs: Sequence) -> list[Fraction] | None:
    """Solve sum_j x_j cols[j] = rhs for square, independent columns."""
    n = len(cols)
    m = [[Fraction(cols[j][i]) for j in range(n)] + [Fraction(rhs[i])] for i in range(n)]
    for c in range(n):
        p = next((r for r in range(c, n) if m[r][c] != 0), None)
        if p is None:
            return None
        m[c], m[p] = m[p], m[c]
        piv = m[c][c]
        m[c] = [v / piv for v in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [a - f * b for a, b in zip(m[r], m[c])]
    return [m[i][n] for i in range(n)]


def _rank(vectors: list[Sequence]) -> int:
    rows = [[Fraction(x) for x in v] for v in vectors]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        p = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if p is None:
            continue
        rows[rank], rows[p] = rows[p], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][c] != 0:
                f = rows[r][c] / rows[rank][c]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def _in_cone(cols: list[Vector], v: Sequence, strict: bool = False) -> bool:
    """Is v a (strictly) positive combination of linearly independent ``cols``?"""
    if not cols:
        return not strict and all(x == 0 for x in v)
    if _rank(cols) < len(cols):
        return False
    l = len(v)
    # least-squares free: solve on an independent set of coordinate rows
    k = len(cols)
    rows = [tuple(c[i] for c in cols) for i in range(l)]
    for pick in itertools.combinations(range(l), k):
        sub = [rows[i] for i in pick]
        if _rank(sub) == k:
            sol = _solve_square([tuple(sub[i][j] for i in range(k)) for j in range(k)],
                                [v[i] for i in pick])
            if sol is None:
                return False
            if any(_dot([c[i] for c in cols], sol) != v[i] for i in range(l)):
                return False
            return all(x > 0 for x in sol) if strict else all(x >= 0 for x in sol)
    return False


@dataclass(frozen=True)
class FixedPoint:
    sigma: tuple[int, ...]          # 0-based coordinate indices
    coeffs: tuple[tuple[Fraction, ...], ...]  # mu_sigma(e_a) as lambda-coefficient vectors

    def label(self) -> str:
        return "{" + ",".join(str(i + 1) for i in self.sigma) + "}"


@dataclass(frozen=True)
class Orbit:
    """A torus-invariant P^1 joining two fixed points."""
    start: int                      # index into fixed point list
    end: int
    beta: Vector
    direction: int                  # coordinate whose tangent direction is the orbit


@dataclass(frozen=True)
class ToricTarget:
    weights: tuple[Vector, ...]     # l rows, N columns
    theta: Vector
    convex: tuple[Vector, ...] = ()
    concave: tuple[Vector, ...] = ()
    torus_enabled: bool = True
    name: str = ""

    # -- basic data --------------------------------------------------------
    @property
    def rank(self) -> int:
        return len(self.weights)

    @property
    def n_coords(self) -> int:
        return len(self.weights[0])

    @property
    def n_lambda(self) -> int:
        return self.n_coords + len(self.concave)

    def column(self, i: int) -> Vector:
        return tuple(row[i] for row in self.weights)

    @property
    def columns(self) -> list[Vector]:
        return [self.column(i) for i in range(self.n_coords)]

    @property
    def dimension(self) -> int:
        return self.n_coords - self.rank

    @property
    def twist_rank(self) -> int:
        return len(self.convex)

    @property
    def is_twisted(self) -> bool:
        return bool(self.convex or self.concave)

    # -- validation --------------------------------------------------------
    def validate(self) -> "ToricTarget":
        l, n = self.rank, self.n_coords
        if any(len(r) != n for r in self.weights):
            raise TargetValidationError("weight rows have unequal length")
        if len(self.theta) != l:
            raise TargetValidationError(f"theta must have {l} entries")
        if all(x == 0 for x in self.theta):
            raise TargetValidationError("theta = 0: no positive pairing possible")
        cols = self.columns
        if _rank(cols) < l:
            raise TargetValidationError("weight columns do not span Z^l")
        if _rank(cols + [self.theta]) > _rank(cols):
            raise TargetValidationError("theta lies outside the span of the weights")
        for k in range(1, l):
            for sub in itertools.combinations(cols, k):
                if _in_cone(list(sub), self.theta):
                    raise TargetValidationError(
                        f"theta lies on a wall spanned by {list(sub)}; stable != semistable")
        if not self.fixed_points:
            raise TargetValidationError("empty fixed-point set (unstable theta)")
        for v in self.convex + self.concave:
            if len(v) != l:
                raise TargetValidationError(f"twist weight {v} must have {l} entries")
        for v in self.convex:
            if not _nonneg_combination(cols, v):
                raise TargetValidationError(
                    f"convex twist {v} is not a nonnegative combination of the weights")
        return self

    # -- fixed points ------------------------------------------------------
    @cached_property
    def fixed_points(self) -> list[FixedPoint]:
        l = self.rank
        out = []
        for sigma in itertools.combinations(range(self.n_coords), l):
            cols = [self.column(j) for j in sigma]
            if _rank(cols) < l or not _in_cone(cols, self.theta, strict=True):
                continue
            coeffs = []
            for a in range(l):
                e = [1 if b == a else 0 for b in range(l)]
                sol = _solve_square(cols, e)
                vec = [Fraction(0)] * self.n_lambda
                for j, c in zip(sigma, sol):
                    vec[j] = c
                coeffs.append(tuple(vec))
            out.append(FixedPoint(sigma, tuple(coeffs)))
        return out

    def mu(self, fp: FixedPoint, chi: Sequence[int]) -> tuple[Fraction, ...]:
        """mu_sigma(chi) as a vector of lambda coefficients."""
        vec = [Fraction(0)] * self.n_lambda
        for a, ca in enumerate(chi):
            if ca:
                for k, x in enumerate(fp.coeffs[a]):
                    vec[k] += ca * x
        return tuple(vec)

    def character_weight(self, fp: FixedPoint, chi: Sequence[int]) -> tuple[Fraction, ...]:
        """Restriction of the class of L_chi at a fixed point (= -mu_sigma(chi))."""
        return tuple(-x for x in self.mu(fp, chi))

    def divisor_weight(self, fp: FixedPoint, i: int) -> tuple[Fraction, ...]:
        """D_i restricted at ``fp``: lambda_i - mu_sigma(xi_i)."""
        v = list(self.character_weight(fp, self.column(i)))
        v[i] += 1
        return tuple(v)

    def convex_weight(self, fp: FixedPoint, a: int) -> tuple[Fraction, ...]:
        return self.character_weight(fp, self.convex[a])

    def concave_weight(self, fp: FixedPoint, a: int) -> tuple[Fraction, ...]:
        v = list(self.character_weight(fp, self.concave[a]))
        v[self.n_coords + a] += 1
        return tuple(v)

    def tangent_weights(self, fp: FixedPoint) -> list[tuple[Fraction, ...]]:
        out = []
        for i in range(self.n_coords):
            if i in fp.sigma:
                continue
            w = self.divisor_weight(fp, i)
            if all(x == 0 for x in w):
                raise NonIsolatedFixedPoint(f"zero tangent weight at {fp.label()}")
            out.append(w)
        return out

    def tangent_directions(self, fp: FixedPoint) -> list[int]:
        return [i for i in range(self.n_coords) if i not in fp.sigma]

    # -- one-dimensional orbits ---------------------------------------------
    @cached_property
    def orbits(self) -> list[Orbit]:
        fps = self.fixed_points
        index = {fp.sigma: k for k, fp in enumerate(fps)}
        out = []
        for k, fp in enumerate(fps):
            for j in self.tangent_directions(fp):
                w = self.divisor_weight(fp, j)
                partner = None
                for i in fp.sigma:
                    sig2 = tuple(sorted(set(fp.sigma) - {i} | {j}))
                    if sig2 in index:
                        if partner is not None:
                            raise UnsupportedTarget("tangent direction meets several fixed points")
                        partner = index[sig2]
                if partner is None:
                    continue  # non-compact direction
                other = fps[partner]
                beta = []
                for a in range(self.rank):
                    e = [1 if b == a else 0 for b in range(self.rank)]
                    diff = [x - y for x, y in zip(self.character_weight(fp, e),
                                                  self.character_weight(other, e))]
                    ratio = _proportional(diff, w)
                    if ratio is None or ratio.denominator != 1:
                        raise UnsupportedTarget(
                            f"orbit {fp.label()}-{other.label()} has no integral class")
                    beta.append(int(ratio))
                out.append(Orbit(k, partner, tuple(beta), j))
        return out

    def orbits_from(self, k: int) -> list[Orbit]:
        return [o for o in self.orbits if o.start == k]

    # -- curve classes -------------------------------------------------------
    def theta_degree(self, beta: Sequence[int]) -> int:
        return _dot(beta, self.theta)

    def is_effective(self, beta: Sequence[int]) -> bool:
        """Quasimap-effective: some fixed-point subset pairs nonnegatively with beta."""
        if all(x == 0 for x in beta):
            return True
        if self.theta_degree(beta) <= 0:
            return False
        return any(all(_dot(beta, self.column(j)) >= 0 for j in fp.sigma)
                   for fp in self.fixed_points)

    def effective_classes(self, max_degree: int) -> list[Vector]:
        found: set[Vector] = set()
        l = self.rank
        for fp in self.fixed_points:
            cols = [self.column(j) for j in fp.sigma]
            tc = _solve_square(cols, self.theta)
            bounds = [int(math.floor(Fraction(max_degree) / c)) for c in tc]
            # beta is determined by its pairings a_j with the sigma columns
            rows_t = [tuple(cols[j][i] for i in range(l)) for j in range(l)]
            for a in itertools.product(*[range(b + 1) for b in bounds]):
                if sum(c * x for c, x in zip(tc, a)) > max_degree:
                    continue
                sol = _solve_square([tuple(rows_t[j][i] for j in range(l)) for i in range(l)], a)
                if sol is None or any(x.denominator != 1 for x in sol):
                    continue
                found.add(tuple(int(x) for x in sol))
        return sorted(found, key=lambda b: (self.theta_degree(b), b))

    def relaxed_classes(self, max_degree: int, box: int | None = None) -> list[Vector]:
        """All integer classes with 0 <= beta.theta <= max_degree in a box (no cone test)."""
        box = box if box is not None else max_degree + 2
        out = [b for b in itertools.product(range(-box, box + 1), repeat=self.rank)
               if 0 <= self.theta_degree(b) <= max_degree]
        return sorted(out, key=lambda b: (self.theta_degree(b), b))

    def grading(self, beta: Sequence[int]) -> dict[str, int]:
        anti = sum(_dot(beta, c) for c in self.columns)
        twisted = anti - sum(_dot(beta, e) for e in self.convex) \
            + sum(_dot(beta, e) for e in self.concave)
        return {"ltheta_degree": self.theta_degree(beta),
                "anticanonical_degree": anti,
                "twisted_index": twisted}

    def extreme_rays(self) -> list[Vector]:
        rays: set[Vector] = set()
        l = self.rank
        for fp in self.fixed_points:
            cols = [self.column(j) for j in fp.sigma]
            rows_t = [tuple(cols[j][i] for j in range(l)) for i in range(l)]
            for k in range(l):
                a = [1 if j == k else 0 for j in range(l)]
                sol = _solve_square(rows_t, a)
                den = math.lcm(*[x.denominator for x in sol])
                v = [int(x * den) for x in sol]
                g = math.gcd(*v)
                rays.add(tuple(x // g for x in v))
        return sorted(rays)

    def classify(self, probe: int = 10) -> dict:
        classes = [b for b in self.effective_classes(probe) if any(b)]
        classes += [r for r in self.extreme_rays() if self.is_effective(r)]
        if not classes:
            return {"kind": "fano", "index": None, "probe_bound": probe}
        k = min(self.grading(b)["twisted_index"] for b in classes)
        kind = "fano" if k >= 1 else ("semi-positive" if k == 0 else "general")
        return {"kind": kind, "index": k, "probe_bound": probe}

    @property
    def is_semi_positive(self) -> bool:
        return self.classify()["kind"] in ("fano", "semi-positive")

    def fano_index(self) -> int | None:
        c = self.classify()
        return c["index"] if c["kind"] == "fano" else None


def _proportional(v: Sequence[Fraction], w: Sequence[Fraction]) -> Fraction | None:
    ratio = None
    for x, y in zip(v, w):
        if y == 0:
            if x != 0:
                return None
            continue
        r = Fraction(x) / Fraction(y)
        if ratio is None:
            ratio = r
        elif r != ratio:
            return None
    return ratio if ratio is not None else Fraction(0)


def _nonneg_combination(cols: list[Vector], v: Vector, limit: int = 64) -> bool:
    target = tuple(v)
    if all(x == 0 for x in target):
        return True
    frontier = {tuple(0 for _ in target)}
    seen = set(frontier)
    for _ in range(limit):
        nxt = set()
        for p in frontier:
            for c in cols:
                q = tuple(a + b for a, b in zip(p, c))
                if q == target:
                    return True
                if q not in seen and all(abs(x) <= limit for x in q):
                    nxt.add(q)
        seen |= nxt
        frontier = nxt
        if not frontier:
            break
    return False


# -- chamber arithmetic --------------------------------------------------------

EPS_ZERO_PLUS = "0+"
EPS_INFINITY = "inf"


def parse_epsilon(eps) -> Fraction | str:
    if isinstance(eps, str):
        s = eps.strip().lower()
        if s in ("0+", "0plus"):
            return EPS_ZERO_PLUS
        if s in ("inf", "infinity", "oo"):
            return EPS_INFINITY
        eps = Fraction(s)
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError(f"stability parameter must be positive, got {eps}")
    return eps


def max_surviving_degree(eps) -> int | None:
    """Largest theta-degree kept at stability ``eps`` (None = unbounded)."""
    eps = parse_epsilon(eps)
    if eps == EPS_ZERO_PLUS:
        return None
    if eps == EPS_INFINITY or eps > 1:
        return 0
    return math.floor(1 / eps)


def walls(degree: int) -> list[Fraction]:
    return [Fraction(1, k) for k in range(1, degree + 1)]


def chamber_truncate(series, eps):
    """Drop every coefficient whose theta-degree exceeds floor(1/eps)."""
    top = max_surviving_degree(eps)
    if top is None:
        return series
    return series.filter(lambda key: series.theta_degree(key[0]) <= top)


# -- config --------------------------------------------------------------------

def parse_target(text: str, name: str = "") -> ToricTarget:
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise TargetValidationError(f"malformed config: {exc}") from exc
    t = cfg.get("target")
    if t is None:
        raise TargetValidationError("missing [target] table")

    def ints(v, what):
        if isinstance(v, bool) or not isinstance(v, int):
            raise TargetValidationError(f"{what} must be integers, got {v!r}")
        return v

    weights = tuple(tuple(ints(x, "weights") for x in row) for row in t["weights"])
    theta = tuple(ints(x, "theta") for x in t["theta"])
    if "rank" in t and t["rank"] != len(weights):
        raise TargetValidationError("rank does not match number of weight rows")
    if "n_coords" in t and any(len(r) != t["n_coords"] for r in weights):
        raise TargetValidationError("n_coords does not match weight rows")
    tw = cfg.get("twist", {})
    convex = tuple(tuple(ints(x, "twist") for x in v) for v in tw.get("convex", []))
    concave = tuple(tuple(ints(x, "twist") for x in v) for v in tw.get("concave", []))
    torus = bool(cfg.get("torus", {}).get("enabled", True))
    return ToricTarget(weights, theta, convex, concave, torus, name or t.get("name", "")).validate()


def load_target(path) -> ToricTarget:
    from pathlib import Path
    p = Path(path)
    return parse_target(p.read_text(encoding="utf-8"), name=p.stem)


# -- standard targets ----------------------------------------------------------

def projective_space(n: int) -> ToricTarget:
    """P^{n-1} = C^n // C*."""
    return ToricTarget(((1,) * n,), (1,), name=f"P{n - 1}").validate()


def product_p1p1() -> ToricTarget:
    return ToricTarget(((1, 1, 0, 0), (0, 0, 1, 1)), (1, 1), name="P1xP1").validate()


def quintic() -> ToricTarget:
    return ToricTarget(((1,) * 5,), (1,), convex=((5,),), name="quintic").validate()


def hypersurface(n: int, degree: int) -> ToricTarget:
    return ToricTarget(((1,) * n,), (1,), convex=((degree,),),
                       name=f"X{degree}_P{n - 1}").validate()


def local_p1() -> ToricTarget:
    """Total space of O(-1)+O(-1) over P^1."""
    return ToricTarget(((1, 1),), (1,), concave=((-1,), (-1,)), name="localP1").validate()
