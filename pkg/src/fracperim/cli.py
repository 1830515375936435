"""Command-line entry point.

Exit status 0 on success, 2 when a hypothesis of the requested operation
fails, 1 on I/O or parse errors. JSON goes to stdout (or ``--out``); sweeps
emit CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import _engine, covers, functionals, generators, inequalities
from .errors import PreconditionError, SpaceError
from .space import SCHEMA_VERSION, MetricMeasureSpace, PointSet


class UsageError(ValueError):
    pass


# -- argument parsing helpers -------------------------------------------------


def parse_set(space: MetricMeasureSpace, spec: str) -> PointSet:
    """``all``, ``none``, ``halfspace:AXIS:T`` (coordinate <= T), ``ball:C:R``,
    ``@file.json`` (index list) or a comma list of indices and ``a-b`` ranges."""
    if spec is None:
        raise UsageError("a set is required (--set)")
    spec = spec.strip()
    if spec == "all":
        return space.full()
    if spec in ("none", "empty"):
        return space.empty()
    if spec.startswith("@"):
        return space.point_set(json.loads(Path(spec[1:]).read_text()))
    head, _, rest = spec.partition(":")
    if head == "halfspace":
        if space.coords is None:
            raise UsageError("halfspace sets need a space with coordinates")
        axis, t = rest.split(":")
        return PointSet(space, space.coords[:, int(axis)] <= float(t))
    if head == "ball":
        c, r = parse_ball(rest)
        return space.ball(c, r)
    indices: list[int] = []
    for part in filter(None, spec.split(",")):
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            indices.extend(range(int(a), int(b) + 1))
        else:
            indices.append(int(part))
    return space.point_set(indices)


def parse_function(space: MetricMeasureSpace, spec: str) -> np.ndarray:
    """``coord:AXIS``, ``dist:C``, ``const:V``, ``indicator:SET`` or ``@file.json`` (value list)."""
    if spec is None:
        raise UsageError("a function is required (--u)")
    if spec.startswith("@"):
        vals = np.asarray(json.loads(Path(spec[1:]).read_text()), dtype=np.float64)
        if vals.shape != (space.n,):
            raise UsageError(f"function file has shape {vals.shape}, expected ({space.n},)")
        return vals
    head, _, rest = spec.partition(":")
    if head == "coord":
        if space.coords is None:
            raise UsageError("coord functions need a space with coordinates")
        return space.coords[:, int(rest)].copy()
    if head == "dist":
        return space.distances_from(int(rest)).copy()
    if head == "const":
        return np.full(space.n, float(rest))
    if head == "indicator":
        return parse_set(space, rest).mask.astype(np.float64)
    raise UsageError(f"unknown function spec {spec!r}")


def parse_ball(spec: str) -> tuple[int, float]:
    if spec is None:
        raise UsageError("a ball CENTER:RADIUS is required")
    try:
        c, r = spec.split(":")
        return int(c), float(r)
    except ValueError:
        raise UsageError(f"bad ball {spec!r}; expected CENTER:RADIUS") from None


def parse_thetas(spec: str) -> list[float]:
    """``lo:hi:count`` (evenly spaced, rounded to 12 decimals) or a comma list."""
    try:
        if ":" in spec:
            lo, hi, k = spec.split(":")
            lo, hi, k = float(lo), float(hi), int(k)
            if k == 1:
                return [lo]
            return [round(lo + i * (hi - lo) / (k - 1), 12) for i in range(k)]
        return [float(t) for t in spec.split(",")]
    except ValueError:
        raise UsageError(f"bad theta grid {spec!r}; expected LO:HI:COUNT or a comma list") from None


def _clean(obj):
    """Make floats JSON-safe: non-finite values become strings."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(args, payload) -> None:
    if isinstance(payload, str):
        text = payload
    else:
        text = json.dumps(_clean({"schema_version": SCHEMA_VERSION, **payload}), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _space(args) -> MetricMeasureSpace:
    return MetricMeasureSpace.load(args.space)


# -- subcommands ---------------------------------------------------------------


def cmd_gen(args) -> dict | str:
    if args.generator == "grid":
        space = generators.grid(args.dim, args.n)
    elif args.generator == "weighted":
        space = generators.weighted_space(MetricMeasureSpace.load(args.base), args.alpha, args.origin)
    elif args.generator == "snowflake":
        space = generators.snowflake(MetricMeasureSpace.load(args.base), args.eps)
    else:
        space = generators.bowtie(args.n, args.wing_dim)
    return space.to_json()


def cmd_compute(args) -> dict:
    space = _space(args)
    q = args.quantity
    omega = parse_set(space, args.omega) if args.omega else None
    out: dict = {"quantity": q, "theta": args.theta}
    if q == "perimeter":
        out.update(functionals.fractional_perimeter(space, parse_set(space, args.set), omega, args.theta).to_dict())
    elif q == "energy":
        u = parse_function(space, args.u)
        out.update(functionals.fractional_energy(space, u, omega, args.theta, args.kernel).to_dict())
        out["kernel"] = args.kernel
    elif q == "coarea":
        out.update(functionals.coarea_rhs(space, parse_function(space, args.u), omega, args.theta).to_dict())
    elif q == "graph_perimeter":
        out = {"quantity": q, "value": functionals.graph_perimeter(space, parse_set(space, args.set), omega)}
    elif q == "mean_deviation":
        c, r = parse_ball(args.ball)
        mean, dev = functionals.mean_and_deviation(space, parse_function(space, args.u), c, r, args.q or 1.0)
        out = {"quantity": q, "mean": mean, "deviation": dev, "ball": [c, r]}
    elif q == "lip_r":
        c, r = parse_ball(args.ball)
        out = {"quantity": q, "value": functionals.lip_r(space, parse_function(space, args.u), c, r, omega)}
    elif q == "sandwich":
        out.update(functionals.rho_sandwich_check(space, args.theta).to_dict())
    elif q == "tail":
        out["delta"] = args.delta
        out["value"] = functionals.rho_tail(space, args.theta, args.delta)
    return out


def cmd_cover(args) -> dict:
    space = _space(args)
    alg = args.algorithm
    if alg == "five_r":
        cands = [parse_ball(b) for b in args.candidates.split(",")]
        cover = covers.five_r_cover(space, cands)
    elif alg == "cz":
        cover = covers.cz_decomposition(space, parse_ball(args.ball), parse_set(space, args.set), args.lam)
    elif alg == "boundary":
        cover = covers.boundary_balls(space, parse_ball(args.ball), parse_set(space, args.set), args.lam, args.k)
    elif alg == "boxing":
        cover = covers.boxing_cover(space, parse_set(space, args.set), args.theta, args.tau)
    else:
        cover = covers.local_boxing_cover(
            space, parse_ball(args.ball), parse_set(space, args.set), args.kappa, args.theta, args.tau
        )
    out = cover.to_dict()
    if alg == "boxing" and args.theta is not None:
        ratio_sum, quotient = covers.boxing_quotient(space, cover, args.theta)
        out["ratio_sum"], out["quotient"] = ratio_sum, quotient
    return out


def cmd_verify(args) -> dict:
    space = _space(args)
    kind = args.kind
    E = parse_set(space, args.set) if args.set else None
    if kind == "frac_iso_lemma":
        ball = parse_ball(args.ball)
        if args.k is None:
            best, reports = inequalities.frac_iso_scan(space, ball, E)
            out = best.to_dict()
            out["scan"] = [[rep.extra["k"], rep.ratio] for rep in reports]
            return out
        return inequalities.frac_iso_report(space, ball, E, args.k).to_dict()
    if kind == "annuli_lemma":
        rep = inequalities.annuli_report(space, parse_ball(args.b0), parse_ball(args.b1), E, args.a, args.eps)
        return rep.to_dict()
    if kind == "theta_iso_lemma":
        R = args.R if args.R is not None else inequalities.growth_scale(space, E, args.x0, args.gamma)
        return inequalities.theta_iso_report(space, E, args.x0, R, args.gamma, args.theta).to_dict()
    u = parse_function(space, args.u) if args.u else None
    ball = parse_ball(args.ball) if args.ball else None
    rep = inequalities.report(
        space, kind, args.theta, q=args.q, tau=args.tau, u=u, E=E, ball=ball, rescale=not args.no_rescale
    )
    return rep.to_dict()


def cmd_sweep(args) -> str:
    space = _space(args)
    members = tuple(args.members.split(",")) if args.members else inequalities.FamilySpec.members
    family = inequalities.FamilySpec(members, args.count, args.seed)
    result = inequalities.sweep(
        space, args.kind, parse_thetas(args.thetas), family, q=args.q, tau=args.tau, rescale=not args.no_rescale
    )
    return f"# schema_version={SCHEMA_VERSION} family={json.dumps(family.to_dict(), sort_keys=True)}\n" + result.to_csv()


def cmd_constants(args) -> dict:
    space = _space(args)
    return space.estimate_constants(args.Q).to_dict()


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracperim", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_space=True):
        sp.add_argument("--out", help="write output to this file instead of stdout")
        if needs_space:
            sp.add_argument("--space", required=True, help="space JSON file")

    g = sub.add_parser("gen", help="generate a space file")
    common(g, needs_space=False)
    g.add_argument("generator", choices=["grid", "weighted", "snowflake", "bowtie"])
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--n", type=int, default=65)
    g.add_argument("--base", help="base space file (weighted, snowflake)")
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--origin", type=int, default=0)
    g.add_argument("--eps", type=float, default=0.5)
    g.add_argument("--wing-dim", type=int, default=1)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("compute", help="evaluate a functional")
    common(c)
    c.add_argument(
        "quantity",
        choices=["perimeter", "energy", "coarea", "graph_perimeter", "mean_deviation", "lip_r", "sandwich", "tail"],
    )
    c.add_argument("--set")
    c.add_argument("--omega")
    c.add_argument("--u")
    c.add_argument("--ball")
    c.add_argument("--theta", type=float, default=0.5)
    c.add_argument("--q", type=float)
    c.add_argument("--kernel", choices=["asymmetric", "symmetric"], default="asymmetric")
    c.add_argument("--delta", type=float, default=0.25)
    c.set_defaults(func=cmd_compute)

    cv = sub.add_parser("cover", help="build and certify a ball cover")
    common(cv)
    cv.add_argument("algorithm", choices=["five_r", "cz", "boundary", "boxing", "local_boxing"])
    cv.add_argument("--candidates", help="comma list of C:R balls (five_r)")
    cv.add_argument("--ball", help="ambient ball C:R")
    cv.add_argument("--set")
    cv.add_argument("--lam", type=float)
    cv.add_argument("--k", type=int)
    cv.add_argument("--kappa", type=float)
    cv.add_argument("--theta", type=float)
    cv.add_argument("--tau", type=float, default=1.0)
    cv.set_defaults(func=cmd_cover)

    v = sub.add_parser("verify", help="evaluate one inequality instance")
    common(v)
    v.add_argument("--kind", required=True, choices=list(inequalities.KINDS))
    v.add_argument("--theta", type=float, default=0.5)
    v.add_argument("--q", type=float)
    v.add_argument("--tau", type=float, default=1.0)
    v.add_argument("--u")
    v.add_argument("--set")
    v.add_argument("--ball")
    v.add_argument("--no-rescale", action="store_true")
    v.add_argument("--k", type=int)
    v.add_argument("--b0")
    v.add_argument("--b1")
    v.add_argument("--a", type=float)
    v.add_argument("--eps", type=float)
    v.add_argument("--x0", type=int)
    v.add_argument("--R", type=float)
    v.add_argument("--gamma", type=float, default=0.5)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="theta sweep over a test family (CSV)")
    common(s)
    s.add_argument("--kind", required=True, choices=list(inequalities.BALL_KINDS + inequalities.GLOBAL_KINDS))
    s.add_argument("--thetas", default="0.1:0.9:9")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=2)
    s.add_argument("--members", help="comma list of family members")
    s.add_argument("--q", type=float)
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--no-rescale", action="store_true")
    s.set_defaults(func=cmd_sweep)

    k = sub.add_parser("constants", help="estimate structural constants")
    common(k)
    k.add_argument("--Q", type=float)
    k.set_defaults(func=cmd_constants)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return 1
        _engine.set_threads(args.threads)
    try:
        _emit(args, args.func(args))
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SpaceError, UsageError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
