"""Command-line front end: ``wallx <command> --target file.toml ...``.

Exit codes: 0 success, 1 validation error, 2 mathematical inconsistency,
64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from . import __version__

log = logging.getLogger("wallx")

EXIT_OK, EXIT_INVALID, EXIT_INCONSISTENT, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- requests and cache -----------------------------------------------------------

@dataclass(frozen=True)
class Request:
    command: str
    params: tuple   # sorted (key, value) pairs

    @classmethod
    def build(cls, command: str, params: dict) -> "Request":
        return cls(command, tuple(sorted((k, _canon(v)) for k, v in params.items() if v is not None)))

    def canonical(self) -> str:
        return json.dumps({"command": self.command, "params": [list(p) for p in self.params]},
                          sort_keys=True, separators=(",", ":"))

    def key(self) -> str:
        h = hashlib.sha256()
        h.update(f"wallx-{__version__}\n".encode())
        h.update(self.canonical().encode())
        return h.hexdigest()


def _canon(v):
    if isinstance(v, Path):
        # the cache must notice edits to the target file, so hash its content
        return "sha256:" + hashlib.sha256(v.read_bytes()).hexdigest()
    if isinstance(v, (list, tuple)):
        return [_canon(x) for x in v]
    if isinstance(v, Fraction):
        return str(v)
    return v


class Cache:
    def __init__(self, root: Path | None = None, enabled: bool = True):
        self.root = Path(root or os.environ.get("WALLX_CACHE", ".wallx-cache"))
        self.enabled = enabled

    def _paths(self, key: str) -> tuple[Path, Path]:
        return self.root / f"{key}.out", self.root / f"{key}.meta.json"

    def get(self, req: Request) -> str | None:
        if not self.enabled:
            return None
        data_p, meta_p = self._paths(req.key())
        if not data_p.exists():
            return None
        try:
            payload = data_p.read_text(encoding="utf-8")
            meta = json.loads(meta_p.read_text(encoding="utf-8"))
            if meta.get("sha256") != hashlib.sha256(payload.encode()).hexdigest() \
                    or meta.get("version") != __version__:
                raise ValueError("checksum or version mismatch")
        except (OSError, ValueError) as exc:
            print(f"wallx: warning: corrupted cache entry {data_p.name} ({exc}); recomputing",
                  file=sys.stderr)
            return None
        return payload

    def put(self, req: Request, payload: str, runtime: float) -> None:
        if not self.enabled:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        data_p, meta_p = self._paths(req.key())
        meta = {"version": __version__, "request": req.canonical(), "runtime": round(runtime, 3),
                "timestamp": time.time(), "sha256": hashlib.sha256(payload.encode()).hexdigest()}
        for path, text in ((data_p, payload), (meta_p, json.dumps(meta, sort_keys=True))):
            fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)


# -- rendering ----------------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def series_rows(doc: dict) -> tuple[list[str], list[list[str]]]:
    """Flatten a serialized series into CSV rows; class values get one column per basis element."""
    terms = doc["terms"]
    basis = doc.get("basis")
    if any(isinstance(t["value"], dict) and "class" not in t["value"] for t in terms):
        raise ValueError("CSV output needs rational coefficients")
    if any(isinstance(t["value"], dict) for t in terms):
        width = len(basis) if basis else len(terms[0]["value"]["class"])
        labels = basis or [f"c{i}" for i in range(width)]
        head = ["beta", "t_exp", "z_exp"] + labels
        rows = []
        for t in terms:
            vals = t["value"]["class"]
            if any(not isinstance(v, str) for v in vals):
                raise ValueError("CSV output needs rational coefficients")
            rows.append([" ".join(map(str, t["beta"])), " ".join(map(str, t["t_exp"])), str(t["z_exp"])] + vals)
        return head, rows
    head = ["beta", "t_exp", "z_exp", "value"]
    rows = [[" ".join(map(str, t["beta"])), " ".join(map(str, t["t_exp"])), str(t["z_exp"]), t["value"]]
            for t in terms]
    return head, rows


def render(result: dict, fmt: str) -> str:
    if fmt == "json":
        return _dumps({k: v for k, v in result.items() if k != "table"})
    table = result.get("table")
    if table is None:
        series = result.get("series")
        if series is None:
            raise ValueError(f"no flat table in {result.get('command')} output; use JSON")
        table = series_rows(series)
    head, rows = table
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(head)
    w.writerows(rows)
    return buf.getvalue()


# -- commands -----------------------------------------------------------------------

def _target(args):
    from .target import load_target
    p = Path(args.target)
    if not p.is_file():
        raise UsageError(f"target file not found: {p}")
    return load_target(p)


def _eps(s: str):
    from .target import parse_epsilon
    return parse_epsilon(s)


def cmd_ifun(args) -> dict:
    from .ifunction import default_truncation, small_I, small_I_fixed_point
    from .scalars import ScalarField
    from .series import TruncationSpec
    T = _target(args)
    if args.equivariant:
        fld = ScalarField(T.n_lambda, with_z=True)
        I = small_I_fixed_point(T, args.order, fld)
        labels = [f"fp{k}" for k in range(len(T.fixed_points))]
        return {"command": "ifun", "mode": "fixed-point", "series": I.series.to_json(labels)}
    trunc = default_truncation(T, args.order)
    if args.z_min is not None or args.z_max is not None:
        trunc = TruncationSpec(args.order, 0, trunc.z_min if args.z_min is None else args.z_min,
                               trunc.z_max if args.z_max is None else args.z_max)
    I = small_I(T, trunc)
    return {"command": "ifun", "mode": "ambient", "series": I.series.to_json(I.ring.labels)}


def cmd_mirror(args) -> dict:
    from .ifunction import i0_i1, small_I
    from . import wallcross as wc
    T = _target(args)
    I = small_I(T, args.order)
    asym = i0_i1(I)
    rec = wc.mirror_transform(I, asym)
    return {"command": "mirror", "q_of_Q": rec.q_of_Q.to_json(), "g0": rec.g0.to_json(),
            "g": [g.to_json() for g in rec.g], "divisors": asym.h2_labels,
            "series": rec.smallJ.to_json(I.ring.labels)}


def cmd_birkhoff(args) -> dict:
    from .ifunction import i0_i1, small_I
    from .target import EPS_ZERO_PLUS
    from . import wallcross as wc
    T = _target(args)
    eps = _eps(args.epsilon)
    I = small_I(T, args.order)
    ring = I.ring
    provider = wc.OracleProvider(ring, max_degree=max(args.order, 2))
    if eps == EPS_ZERO_PLUS:
        B = wc.birkhoff_induction(I.series, provider, args.order)
    else:
        asym = i0_i1(I)
        J = wc.mod2_J(asym, ring, eps, I.series.trunc.z_min)
        B = wc.birkhoff_induction(J, provider, args.order, exact=False)
    out = {"command": "birkhoff", "epsilon": str(eps), "tau": B.tau.to_json(ring.labels),
           "P": B.P.to_json(ring.labels), "agrees": B.agrees,
           "series": B.predicted.to_json(ring.labels)}
    if B.agrees is False:
        out["mismatches"] = [list(map(str, k)) for k in B.mismatches]
        raise _Inconsistent(out, "J is not S_tau(P) beyond mod 1/z^2")
    return out


def cmd_gw(args) -> dict:
    from .oracle import ClassMarking, GraphSum, gw_invariant, parse_insertion
    from .scalars import ScalarField, fmt_rational
    from .series import _encode_scalar
    T = _target(args)
    labels = [s for s in args.insertions.split(",") if s.strip()]
    exps = [parse_insertion(s, T) for s in labels]
    psi = [int(x) for x in args.psi.split(",")] if args.psi else [0] * len(exps)
    if len(psi) != len(exps):
        raise ValueError("one psi power per insertion")
    beta = tuple(int(x) for x in args.degree.split(","))
    if args.non_equivariant:
        enc = fmt_rational(gw_invariant(T, exps, psi, beta, bound=args.bound))
        return {"command": "gw", "degree": list(beta), "insertions": labels, "psi": psi,
                "value": enc, "table": (["value"], [[enc]])}
    fld = ScalarField(T.n_lambda)
    gs = GraphSum(T, fld)
    marks = [ClassMarking(gs.ring.equivariant_monomial(e).coeffs, a) for e, a in zip(exps, psi)]
    v = gs.invariant(marks, beta)
    enc, gens = _encode_scalar(v)
    out = {"command": "gw", "degree": list(beta), "insertions": labels, "psi": psi, "value": enc,
           "generators": gens}
    if isinstance(enc, str):
        out["table"] = (["value"], [[enc]])
    return out


def cmd_oracle_j(args) -> dict:
    from .cohomology import AmbientRing
    from .oracle import oracle_small_J
    T = _target(args)
    ring = AmbientRing(T, twisted=bool(T.convex))
    J = oracle_small_J(T, args.dmax, bound=max(args.dmax, 2), ring=ring)
    return {"command": "oracle-j", "series": J.to_json(ring.labels)}


def cmd_yukawa(args) -> dict:
    from .ifunction import i0_i1, small_I
    from . import wallcross as wc
    T = _target(args)
    I = small_I(T, args.order)
    asym = i0_i1(I)
    ring = I.ring
    classical = ring.integrate(ring.character((1,)) * ring.character((1,)) * ring.character((1,)))
    K = wc.yukawa_cy3(I, asym, classical, args.bmodel)
    n = wc.instanton_numbers(K, classical)
    return {"command": "yukawa", "classical": str(classical), "series": K.to_json(),
            "instantons": {str(d): str(v) for d, v in n.items()}}


class _Inconsistent(Exception):
    def __init__(self, payload: dict, message: str):
        super().__init__(message)
        self.payload = payload


def cmd_check(args) -> dict:
    from .cohomology import AmbientRing, FixedPointRing
    from .scalars import ScalarField
    from . import wallcross as wc
    T = _target(args)
    D = args.order
    M = args.t_order
    if args.suite == "unitarity":
        ring = AmbientRing(T, twisted=bool(T.convex))
        rep = wc.unitarity_check(wc.build_S_columns(wc.OracleProvider(ring, max_degree=max(D, 2)), M, D), ring)
    elif args.suite == "polynomiality":
        fld = ScalarField.random_specialization(T.n_lambda, with_z=True)
        ring = FixedPointRing(T, fld)
        tcs = [ring.one] + [ring.character(tuple(int(a == b) for b in range(T.rank))) for a in range(T.rank)]
        S = wc.build_S_fixed_point(T, fld, ring.one, M, D, tcs if M else [])
        rep = wc.polynomiality_check(S, fld, args.y_order)
    else:
        rep = _wallcross_suite(T, D)
    out = {"command": "check", "suite": args.suite, "report": rep.to_json()}
    if not rep.ok:
        raise _Inconsistent(out, f"{args.suite} check failed with {len(rep.violations)} violations")
    return out


def _wallcross_suite(T, D):
    """Mirror map against string transform and Birkhoff at eps = 0+."""
    from .ifunction import i0_i1, small_I
    from . import wallcross as wc
    I = small_I(T, D)
    ring = I.ring
    asym = i0_i1(I)
    tcs = [ring.character(tuple(int(a == b) for b in range(T.rank))) for a in range(T.rank)]
    rep = wc.Report(True)
    tau = wc.mirror_map_series(asym, ring, "0+", t_classes=tcs)
    st = wc.string_transform(wc.SemiPositiveProvider(ring, asym.I0, asym.I1, "0+"), t_classes=tcs, M=1, D=D)
    if tau != st:
        rep.violations.append(("mirror-vs-string", [list(map(str, k)) for k in (tau - st).keys()]))
    oracle = wc.OracleProvider(ring, max_degree=max(D, 2))
    inf = wc.string_transform(oracle, t_classes=tcs, M=2, D=D)
    if not inf.filter(lambda k: any(k[0])).is_zero():
        rep.violations.append(("string-at-infinity", [list(map(str, k)) for k in inf.keys()]))
    B = wc.birkhoff_induction(I.series, oracle, D)
    if not B.agrees:
        rep.violations.append(("birkhoff", [list(map(str, k)) for k in B.mismatches]))
    rep.ok = not rep.violations
    return rep


def cmd_verify(args) -> dict:
    from .acceptance import CHECKS, run
    names = list(CHECKS) if args.suite == "all" else [s.strip() for s in args.suite.split(",")]
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise UsageError(f"unknown criteria {unknown}")
    results = []
    for n in names:
        r = run(n)
        print(r.line(), file=sys.stderr, flush=True)
        results.append(r)
    out = {"command": "verify",
           "results": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
           "table": (["criterion", "result", "detail"],
                     [[r.name, "PASS" if r.passed else "FAIL", r.detail] for r in results])}
    if not all(r.passed for r in results):
        raise _Inconsistent(out, "some acceptance criteria failed")
    return out


COMMANDS: dict[str, Callable[[Any], dict]] = {
    "ifun": cmd_ifun, "mirror": cmd_mirror, "birkhoff": cmd_birkhoff, "gw": cmd_gw,
    "oracle-j": cmd_oracle_j, "yukawa": cmd_yukawa, "check": cmd_check, "verify": cmd_verify,
}

NO_CACHE = {"verify"}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wallx", description="Exact genus-zero wall-crossing computations.")
    p.add_argument("--version", action="version", version=f"wallx {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, target=True):
        if target:
            sp.add_argument("--target", required=True, help="target TOML file")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--no-cache", action="store_true", help="bypass the result cache")
        return sp

    sp = common(sub.add_parser("ifun", help="small I-function"))
    sp.add_argument("--order", type=int, required=True)
    sp.add_argument("--equivariant", action="store_true")
    sp.add_argument("--z-min", type=int)
    sp.add_argument("--z-max", type=int)

    sp = common(sub.add_parser("mirror", help="mirror map and small J"))
    sp.add_argument("--order", type=int, required=True)

    sp = common(sub.add_parser("birkhoff", help="Birkhoff factorization of J at t = 0"))
    sp.add_argument("--order", type=int, required=True)
    sp.add_argument("--epsilon", default="0+")

    sp = common(sub.add_parser("gw", help="one genus-zero invariant by localization"))
    sp.add_argument("--degree", required=True, help="curve class, comma separated")
    sp.add_argument("--insertions", required=True, help='e.g. "pt,pt,H"')
    sp.add_argument("--psi", help="psi powers, comma separated")
    sp.add_argument("--non-equivariant", action="store_true")
    sp.add_argument("--bound", type=int, default=2, help="largest degree allowed")

    sp = common(sub.add_parser("oracle-j", help="small J from the localization oracle"))
    sp.add_argument("--dmax", type=int, required=True)

    sp = common(sub.add_parser("yukawa", help="A-model Yukawa coupling of a Calabi-Yau threefold"))
    sp.add_argument("--order", type=int, required=True)
    sp.add_argument("--bmodel", required=True, help='B-model coupling in q, e.g. "5/(1-3125*q)"')

    sp = common(sub.add_parser("check", help="exact property suites"))
    sp.add_argument("--suite", choices=("unitarity", "polynomiality", "wallcross"), required=True)
    sp.add_argument("--order", type=int, required=True)
    sp.add_argument("--t-order", type=int, default=1)
    sp.add_argument("--y-order", type=int, default=2)

    sp = common(sub.add_parser("verify", help="acceptance battery"), target=False)
    sp.add_argument("--suite", default="all", help="'all' or comma separated names like A1,A7")
    return p


def _threads() -> int:
    raw = os.environ.get("WALLX_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"WALLX_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError("WALLX_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _request(args) -> Request:
    skip = {"out", "format", "no_cache", "command"}
    params = {k: v for k, v in vars(args).items() if k not in skip}
    if "target" in params:
        params["target"] = Path(params["target"])
    params["format"] = args.format
    return Request.build(args.command, params)


def main(argv: list[str] | None = None) -> int:
    from .target import TargetValidationError, UnsupportedTarget, NonIsolatedFixedPoint
    from .oracle import InternalConsistencyError, DegenerateOrbit
    from .recursion import ReconstructionError
    from .scalars import InconsistentSystem
    from . import wallcross as wc
    logging.basicConfig(level=logging.WARNING, format="wallx: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        _threads()
        if getattr(args, "target", None) is not None and not Path(args.target).is_file():
            raise UsageError(f"target file not found: {args.target}")
    except UsageError as exc:
        print(f"wallx: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cache = Cache(enabled=not args.no_cache and args.command not in NO_CACHE)
    code = EXIT_OK
    try:
        req = _request(args)
        text = cache.get(req)
        if text is None:
            t0 = time.perf_counter()
            try:
                result = COMMANDS[args.command](args)
            except _Inconsistent as exc:
                result, code = exc.payload, EXIT_INCONSISTENT
                print(f"wallx: inconsistency: {exc}", file=sys.stderr)
            text = render(result, args.format)
            if code == EXIT_OK:
                cache.put(req, text, time.perf_counter() - t0)
    except UsageError as exc:
        print(f"wallx: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (wc.Inconsistency, InternalConsistencyError, ReconstructionError, InconsistentSystem) as exc:
        print(f"wallx: inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (TargetValidationError, UnsupportedTarget, NonIsolatedFixedPoint, DegenerateOrbit,
            wc.OutOfEnvelope, wc.InvalidParameter, wc.NotFound, ValueError, KeyError) as exc:
        print(f"wallx: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
