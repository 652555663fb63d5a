"""Command-line entry point: ``naming-game <verb> [options]``.

Exit status is 0 when every check passes, 1 when a statistical check fails
and 2 for usage or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import harness
from .core import ContractError, simulate_agent_clock
from .fast import run_full
from .observables import SeriesRecorder, Tracker, time_grid, write_series
from .ode import DomainError, IntegrationError, integrate, write_trajectory
from .rng import replicate_seed

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _n_grid(args) -> list[int]:
    if args.n_grid:
        return [int(v) for v in args.n_grid.split(",") if v]
    if args.n is not None:
        return [args.n]
    return []


def _spec(args, kind: str, **extra) -> harness.ExperimentSpec:
    """Spec file values, overridden by any flag given on the command line."""
    data: dict = {}
    if args.spec:
        data = json.loads(Path(args.spec).read_text())
    data["kind"] = kind
    grid = _n_grid(args)
    if grid:
        data["n_grid"] = grid
    data.setdefault("n_grid", [])
    for key, value in (("replicates", args.reps), ("seed", args.seed), ("mode", args.mode),
                       ("horizon", args.horizon), ("snapshot_dt", args.snapshot_dt), ("out", args.out)):
        if value is not None:
            data[key] = value
    for key, value in extra.items():
        if value is not None:
            data[key] = value
    return harness.ExperimentSpec.from_dict(data)


def _emit_json(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        harness.atomic_write(out, text + "\n")
    else:
        print(text)


def _suffixed(out: str, rep: int, reps: int) -> str:
    if reps == 1:
        return out
    p = Path(out)
    return str(p.with_name(f"{p.stem}_r{rep}{p.suffix}"))


def cmd_sim_full(args) -> int:
    spec = _spec(args, "early-phase")
    if len(spec.n_grid) != 1:
        raise UsageError("sim-full takes a single --n")
    n = spec.n_grid[0]
    horizon = spec.horizon if spec.horizon is not None else 2.0 * math.log(n)
    out = spec.out or "series.csv"
    for rep in range(spec.replicates):
        seed = replicate_seed(spec.seed, rep, (0, n))
        if spec.snapshot_dt is not None:
            grid = time_grid(horizon, spec.snapshot_dt)
            rows = run_full(n, seed, horizon=horizon, grid=grid).series_rows()
        else:
            recorder = SeriesRecorder(Tracker(n))
            simulate_agent_clock(n, horizon, seed, observers=[recorder])
            rows = recorder.finish(horizon)
        path = _suffixed(out, rep, spec.replicates)
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        write_series(rows, path)
    return EXIT_OK


def cmd_final(args) -> int:
    spec = _spec(args, "final-phase", init=args.init)
    if not spec.n_grid:
        raise UsageError("final needs --n or --n-grid")
    table = harness.run(spec)
    if not spec.out:
        sys.stdout.write(table.to_csv())
    if table.metadata["failures"]:
        print(f"{len(table.metadata['failures'])} replicate(s) failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_ode(args) -> int:
    init = [float(v) for v in args.init.split(",")] if args.init else None
    system = args.system
    if init is None:
        init = {"xy": [0.5, 0.5], "uz": [0.0, 0.0], "diagonal": [0.0]}[system]
    horizon = args.horizon if args.horizon is not None else 30.0
    every = max(1, int(round((args.snapshot_dt or 0.01) / args.h)))
    traj = integrate(system, init, h=args.h, horizon=horizon, sample_every=every)
    if args.out:
        write_trajectory(traj, args.out)
    else:
        print(",".join(("t",) + traj.names))
        for t, row in zip(traj.t, traj.state):
            print(",".join(f"{v:.12g}" for v in (t, *row)))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .concentration.suite import DEFAULT_CHECKS

    checks = args.checks.split(",") if args.checks else list(DEFAULT_CHECKS)
    spec = _spec(args, "verify-bounds", checks=checks)
    out = spec.out
    spec.out = None
    table = harness.run(spec)
    reports = table.metadata["reports"]
    for rep in reports:
        bad = sum(not c["pass"] for c in rep["cells"])
        print(f"{rep['name']}: {len(rep['cells']) - bad}/{len(rep['cells'])} cells pass", file=sys.stderr)
    _emit_json({"spec_digest": table.metadata["spec_digest"], "seed": spec.seed, "reports": reports}, out)
    return EXIT_OK if all(r["passed"] for r in reports) else EXIT_FAIL


def cmd_equivalence(args) -> int:
    variant = args.variant
    default_n = 5 if variant == "graphical" else 4
    if args.n is None and not args.n_grid and not args.spec:
        args.n = default_n
    init = args.init if args.init else ("half" if variant == "graphical" else "0,0,1")
    spec = _spec(args, "oracle-equivalence", variant=variant, init=init)
    out = spec.out
    spec.out = None
    table = harness.run(spec)
    result = harness.equivalence_report(table)
    result.update(variant=variant, n=spec.n_grid, seed=spec.seed, spec_digest=table.metadata["spec_digest"])
    _emit_json(result, out)
    return EXIT_OK if result["pass"] else EXIT_FAIL


def cmd_fit(args) -> int:
    if not args.table:
        raise UsageError("fit needs --table")
    table = harness.ResultTable.read_csv(args.table)
    result = harness.fit_log_slope(table, x=args.x, y=args.y)
    if args.expect:
        lo, hi = (float(v) for v in args.expect.split(","))
        result["expect"] = [lo, hi]
        result["pass"] = lo <= result["slope"] <= hi
    _emit_json(result, args.out)
    return EXIT_OK if result.get("pass", True) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int)
    common.add_argument("--n-grid", help="comma-separated, strictly increasing")
    common.add_argument("--reps", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=("exact", "normalized"))
    common.add_argument("--horizon", type=float)
    common.add_argument("--snapshot-dt", type=float)
    common.add_argument("--out")
    common.add_argument("--spec", help="JSON experiment spec; flags override its values")

    parser = argparse.ArgumentParser(prog="naming-game", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("sim-full", parents=[common], help="full model time series (t,V,Vo,Vx,S,A,Z)")
    p.set_defaults(func=cmd_sim_full)

    p = sub.add_parser("final", parents=[common], help="two-word chain consensus times")
    p.add_argument("--init", help="'half' or fractions x,y,z")
    p.set_defaults(func=cmd_final)

    p = sub.add_parser("ode", parents=[common], help="integrate the mean-field ODE")
    p.add_argument("--system", choices=("xy", "uz", "diagonal"), default="xy")
    p.add_argument("--init", help="comma-separated initial state")
    p.add_argument("--h", type=float, default=1e-3)
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("verify", parents=[common], help="concentration falsification suite (JSON report)")
    p.add_argument("--checks", help="comma-separated subset of the checks")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("equivalence", parents=[common], help="oracle equivalence tests")
    p.add_argument("--variant", choices=("graphical", "projection"), default="graphical")
    p.add_argument("--init", help="fractions x,y,z for the projection variant (default all AB)")
    p.set_defaults(func=cmd_equivalence)

    p = sub.add_parser("fit", parents=[common], help="slope of mean(y) against ln n from a CSV table")
    p.add_argument("--table")
    p.add_argument("--x", default="n")
    p.add_argument("--y", default="Tc")
    p.add_argument("--expect", help="lo,hi band for the slope")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ContractError, DomainError, IntegrationError, ValueError, OSError, KeyError) as exc:
        print(f"naming-game: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
