"""Command-line entry point: ``pulledsaw <command> [options]``.

Failures print one JSON error record on stderr and exit nonzero
(2 for usage errors, 1 for everything else).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pulledsaw import __version__, kernels
from pulledsaw.enumeration import (
    CountTable,
    WalkClass,
    enumerate_walks,
    plane_from_full,
    verify_oracle,
)
from pulledsaw.flatperm import DoSEstimate, hybrid_table, run_flatperm
from pulledsaw.legendre import (
    asymptote_check,
    convexity_report,
    density_consistency,
    inequality_report,
    limit_inequality_report,
    transform_curve,
)
from pulledsaw.phase import boundary_curve, estimate_critical, force_curve
from pulledsaw.tableio import (
    GridSpec,
    ManifestError,
    TableCache,
    TableFormatError,
    checksum,
    read_manifest,
    read_table,
    serialize_table,
    write_json,
    write_tsv,
)
from pulledsaw.thermo import (
    DEFAULT_LOG_GRID,
    FreeEnergyLimits,
    Kind,
    WeightPoint,
    a_grid,
    free_energy_curve,
    limit_from_logz,
    log_partition,
    moment_arrays,
)

log = logging.getLogger("pulledsaw")

ORACLE_CAP = {2: 10, 3: 7}
DEFAULT_T_GRID = "0.1,0.2,0.3,0.4,0.5,0.7,1"
DEFAULT_A_GRID = "4,6,8,10,15,20"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- table sets ---------------------------------------------------------------

@dataclass
class TableSet:
    d: int
    positive: CountTable
    unfolded: CountTable | None
    full: CountTable | None
    plane: CountTable | None

    def limits(self) -> FreeEnergyLimits:
        return FreeEnergyLimits(self.positive, self.full, self.plane)


def load_dir(directory) -> list[tuple[Path, CountTable]]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"table directory {directory} not found")
    out = []
    for p in sorted(directory.glob("*.csv")):
        out.append((p, read_table(p)))
    if not out:
        raise FileNotFoundError(f"no tables in {directory}")
    return out


def assemble(directory, d: int | None = None) -> TableSet:
    """Pick the longest table of each class; a stochastic positive table
    longer than the exact one extends it."""
    tables = [t for _, t in load_dir(directory)]

    def best(cls, dim, stochastic=False):
        cand = [t for t in tables if t.walk_class is cls and t.dimension == dim
                and t.stochastic == stochastic]
        return max(cand, key=lambda t: t.n_max, default=None)

    if d is None:
        dims = [t.dimension for t in tables if t.walk_class is WalkClass.POSITIVE]
        if not dims:
            raise FileNotFoundError("no positive-walk table in the directory")
        d = max(dims)
    positive = best(WalkClass.POSITIVE, d)
    mc = best(WalkClass.POSITIVE, d, stochastic=True)
    if positive is None and mc is None:
        raise FileNotFoundError(f"no positive-walk table for d={d}")
    if positive is None:
        positive = mc
    elif mc is not None and mc.n_max > positive.n_max:
        positive = hybrid_table(positive, DoSEstimate.from_table(mc))
    plane = best(WalkClass.PLANE, d - 1)
    if plane is None:
        lower = best(WalkClass.FULL_LATTICE, d - 1)
        plane = plane_from_full(lower) if lower is not None else None
    return TableSet(d, positive, best(WalkClass.POSITIVE_UNFOLDED, d),
                    best(WalkClass.FULL_LATTICE, d), plane)


# -- commands -----------------------------------------------------------------

def cmd_enumerate(args) -> dict:
    def build():
        return enumerate_walks(args.dim, args.nmax, args.walk_class, workers=args.workers,
                               symmetric=args.symmetric)

    t0 = time.perf_counter()
    if args.no_cache:
        table = build()
    else:
        table = TableCache(args.cache_dir).get_or_build(args.dim, args.walk_class, args.nmax, build)
    man = serialize_table(table, args.out, wall_time=time.perf_counter() - t0)
    return {"out": str(args.out), "checksum": man.checksum, "n_max": table.n_max,
            "class": table.walk_class.value, "kernel": kernels.IMPLEMENTATION}


def cmd_thermo(args) -> dict:
    table = read_table(args.table)
    la = GridSpec.parse(args.a_grid).log_values
    ly = GridSpec.parse(args.y_grid).log_values
    A, Y = np.meshgrid(la, ly, indexing="ij")
    A, Y = A.ravel(), Y.ravel()
    rows = []
    logz = np.array([log_partition(table, n, Kind.C, A, Y) for n in range(table.n_max + 1)])
    for n in range(1, table.n_max + 1):
        mv, vv = moment_arrays(table, n, "visits", Kind.C, A, Y)
        mh, vh = moment_arrays(table, n, "height", Kind.C, A, Y)
        for j in range(A.size):
            rows.append((n, math.exp(A[j]), math.exp(Y[j]), float(logz[n, j]), float(logz[n, j] / n),
                         float(mv[j]), float(vv[j]), float(mh[j]), float(vh[j])))
    limits = []
    if table.n_max >= 7:
        for j in range(A.size):
            e = limit_from_logz(logz[:, j])
            limits.append((math.exp(A[j]), math.exp(Y[j]), e.limit, e.half_width))
    write_tsv(args.out, ("n", "a", "y", "log_z", "free_energy", "visits_mean", "visits_var",
                         "height_mean", "height_var"), rows)
    lim_path = Path(args.out).with_suffix(".limits.tsv")
    write_tsv(lim_path, ("a", "y", "limit", "half_width"), limits)
    return {"out": str(args.out), "limits": str(lim_path), "rows": len(rows)}


def _legendre_summary(ts: TableSet, ns) -> list:
    curve = free_energy_curve(ts.positive, a_grid(DEFAULT_LOG_GRID), Kind.C)
    out = []
    for n in ns:
        if n > ts.positive.n_max:
            continue
        lt = transform_curve(curve, n)
        out.append({"n": n, "concave": lt.is_concave(),
                    "max_interior_residual": float(lt.interior_residuals.max()),
                    "boundary_flags": int(lt.boundary.sum())})
    return out


def cmd_analyze(args) -> dict:
    ts = assemble(args.tables, args.dim)
    if ts.unfolded is None or ts.plane is None:
        raise FileNotFoundError("analyze needs positive, positive-unfolded and plane tables")
    exact = [r.summary() for r in inequality_report(ts.positive, ts.unfolded, ts.plane)]
    exact.append(convexity_report(ts.positive).summary())
    limits = ts.limits()
    report = {
        "dimension": ts.d,
        "exact": exact,
        "legendre": _legendre_summary(ts, (8, 12, 16)),
        "density": [
            {k: v for k, v in vars(density_consistency(ts.positive, WeightPoint(a), n)).items()
             if k != "w"} | {"a": a}
            for a in (1.0, 5.0) for n in (8, 12, 16) if n <= ts.positive.n_max
        ],
        "limit": [r.summary() for r in limit_inequality_report(limits)],
    }
    ac = asymptote_check(limits)
    report["asymptote"] = {"kappa_ratio": ac.kappa_ratio, "kappa_tolerance": ac.kappa_tolerance,
                           "lambda_ratio": ac.lambda_ratio, "lambda_tolerance": ac.lambda_tolerance,
                           "monotone": ac.monotone, "pass": ac.passed}
    write_json(args.out, report)
    return {"out": str(args.out)}


def cmd_phase(args) -> dict:
    ts = assemble(args.tables, args.dim)
    limits = ts.limits()
    pd = boundary_curve(GridSpec.parse(args.a_grid).values, limits)
    write_tsv(args.out, ("a", "y_c", "log_y_c", "half_width", "in_bounds"),
              [(p.a, p.y, p.log_y, p.half_width, p.in_bounds and p.in_kappa_bracket)
               for p in pd.boundary])
    summary = {
        "a_c": list(pd.a_c), "y_c0": list(pd.y_c0),
        "monotone": pd.monotone, "bounds": pd.bounds, "asymptote": pd.asymptote,
        "asymptote_ratio": pd.asymptote_ratio, "skipped": [list(s) for s in pd.skipped],
    }
    write_json(Path(args.out).with_suffix(".json"), summary)
    return {"out": str(args.out), **summary}


def cmd_force(args) -> dict:
    ts = assemble(args.tables, args.dim)
    limits = ts.limits()
    a_c = estimate_critical("a", ts.positive)
    fc = force_curve(args.epsilon, GridSpec.parse(args.t_grid).values, limits,
                     a_threshold=a_c.value + a_c.half_width)
    write_tsv(args.out, ("T", "f_c", "half_width"), fc.samples)
    summary = {"epsilon": fc.epsilon, "slope_at_low_T": fc.slope_at_low_T,
               "slope_half_width": fc.slope_half_width, "skipped": [list(s) for s in fc.skipped]}
    write_json(Path(args.out).with_suffix(".json"), summary)
    return {"out": str(args.out), **summary}


def cmd_mc(args) -> dict:
    est = run_flatperm(args.dim, args.nmax, args.tours, args.seed, workers=args.workers)
    table = est.to_table()
    man = serialize_table(table, args.out, wall_time=est.meta["wall_time"],
                          extra={"batches": est.meta["batches"]})
    return {"out": str(args.out), "checksum": man.checksum, "tours": args.tours, "seed": args.seed}


def cmd_check(args) -> dict:
    entries = load_dir(args.tables)
    results, ok = [], True

    def record(name, passed, **info):
        nonlocal ok
        ok = ok and bool(passed)
        results.append({"check": name, "pass": bool(passed), **info})

    for path, t in entries:
        man = read_manifest(path)
        record("checksum", checksum(t) == man.checksum, table=path.name)
        if t.stochastic:
            continue
        cap = min(t.n_max, ORACLE_CAP.get(t.dimension, 4))
        if t.walk_class is WalkClass.PLANE:
            cap = min(t.n_max, ORACLE_CAP.get(t.dimension + 1, 4))
        for n in range(cap + 1):
            res = verify_oracle(t.dimension, n, t.walk_class, t)
            if not res:
                record("oracle", False, table=path.name, n=n, mismatch=list(res.first_mismatch))
                break
        else:
            record("oracle", True, table=path.name, n_max=cap)
        # double run with a different worker count
        n_re = min(t.n_max, 12 if t.dimension <= 2 else 8)
        a = enumerate_walks(t.dimension, n_re, t.walk_class, workers=1)
        b = enumerate_walks(t.dimension, n_re, t.walk_class, workers=2)
        record("determinism", a == b == t.truncated(n_re), table=path.name, n_max=n_re)
    dims = sorted({t.dimension for _, t in entries if t.walk_class is WalkClass.POSITIVE and not t.stochastic})
    for d in dims:
        ts = assemble(args.tables, d)
        if ts.unfolded is None or ts.plane is None:
            continue
        n_max = min(ts.positive.n_max, ts.unfolded.n_max, ts.plane.n_max)
        exact_pos = next(t for _, t in entries if t.walk_class is WalkClass.POSITIVE
                         and t.dimension == d and not t.stochastic and t.n_max >= n_max)
        for r in inequality_report(exact_pos.truncated(n_max), ts.unfolded.truncated(n_max),
                                   ts.plane.truncated(n_max)):
            record(r.name, r.passed, d=d, min_slack=r.min_slack)
        conv = convexity_report(exact_pos, n_max=n_max)
        record(conv.name, conv.min_slack >= -1e-10, d=d, min_slack=conv.min_slack)
    return {"pass": ok, "results": results}


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pulledsaw", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("enumerate", help="exact count table for one walk class")
    e.add_argument("--dim", type=int, required=True)
    e.add_argument("--nmax", type=int, required=True)
    e.add_argument("--class", dest="walk_class", required=True, choices=[c.value for c in WalkClass])
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--symmetric", action="store_true", help="canonicalise the first lateral step")
    e.add_argument("--workers", type=int, default=None)
    e.add_argument("--no-cache", action="store_true")
    e.add_argument("--cache-dir", type=Path, default=None)
    e.set_defaults(func=cmd_enumerate)

    t = sub.add_parser("thermo", help="free energies and moments on a weight grid")
    t.add_argument("--table", type=Path, required=True)
    t.add_argument("--a-grid", default="-1:0.1:3")
    t.add_argument("--y-grid", default="0:1:0")
    t.add_argument("--out", type=Path, required=True)
    t.set_defaults(func=cmd_thermo)

    for name, func, hlp in (("analyze", cmd_analyze, "Legendre and inequality reports"),
                            ("phase", cmd_phase, "critical points and the phase boundary"),
                            ("force", cmd_force, "critical force against temperature")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--tables", type=Path, required=True)
        s.add_argument("--dim", type=int, default=None)
        s.add_argument("--out", type=Path, required=True)
        if name == "phase":
            s.add_argument("--a-grid", default=DEFAULT_A_GRID)
        if name == "force":
            s.add_argument("--epsilon", type=float, required=True)
            s.add_argument("--t-grid", default=DEFAULT_T_GRID)
        s.set_defaults(func=func)

    m = sub.add_parser("mc", help="flatPERM estimate of positive-walk counts")
    m.add_argument("--dim", type=int, required=True)
    m.add_argument("--nmax", type=int, required=True)
    m.add_argument("--tours", type=int, required=True)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--workers", type=int, default=None)
    m.add_argument("--out", type=Path, required=True)
    m.set_defaults(func=cmd_mc)

    c = sub.add_parser("check", help="oracle, checksum, determinism and exact inequality suite")
    c.add_argument("--tables", type=Path, required=True)
    c.set_defaults(func=cmd_check)
    return p


def _error(kind: str, exc: BaseException, command) -> None:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc), "command": command}
    print(json.dumps(record), file=sys.stderr)


GRID_FLAGS = ("--a-grid", "--y-grid", "--t-grid", "--epsilon")


def _glue_values(argv: list[str]) -> list[str]:
    """``--a-grid -1:0.1:3`` -> ``--a-grid=-1:0.1:3`` (argparse would read
    the value as an option)."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in GRID_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = _glue_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _error("usage", exc, argv[0] if argv else None)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except (FileNotFoundError, ManifestError, TableFormatError, ValueError, OSError,
            RuntimeError) as exc:
        _error("runtime", exc, args.command)
        return 1
    print(json.dumps(result, sort_keys=True, default=str))
    if args.command == "check" and not result["pass"]:
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
