"""
Command-line pipeline: simulate, sample, extract, canonical, sweep, trace,
verify and savings.

Exit codes
    0  success
    2  bad input: missing file, wrong schema_version or kind, malformed field
    3  a simulation diverged, or more than half the Monte Carlo runs did
    4  the static model lacks the required key-point structure
    5  trace, sweep or savings computation failed (e.g. infeasible --actual)
    6  ordering verification found a counterexample

Every output file is written to a temporary name and renamed into place, so
failures never leave partial output.  Outputs depend only on the inputs and
the seed, never on timing or thread schedule.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import agents, param_opt
from .dynamics import simulate_period
from .errors import (
    CalibrationError,
    DomainError,
    HvacIncentiveError,
    ModelError,
    ModelShapeError,
    PreconditionError,
    SamplingFailed,
    SchemaError,
    SimulationDiverged,
)
from .serialization import (
    atomic_write_text,
    csv_text,
    load_building_model,
    load_configuration,
    load_disturbance,
    load_key_points,
    load_sample_spec,
    load_static_model,
    simulation_output_to_dict,
    static_model_to_dict,
    write_csv,
    write_json,
)
from .static_model import (
    DEFAULT_BANDWIDTH,
    DEFAULT_DILATION,
    OperatingPoint,
    build_static_model,
    canonical_model,
    monte_carlo_cloud,
)

DEFAULT_SEED = 20130611

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_SHAPE, EXIT_ANALYSIS, EXIT_COUNTEREXAMPLE = 0, 2, 3, 4, 5, 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# --- argument parsing helpers -----------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _point(text: str) -> OperatingPoint:
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected S,E, got {text!r}")
    return OperatingPoint(*vals)


def _resolution(text: str) -> tuple[int, int]:
    parts = text.lower().replace("x", ",").split(",")
    try:
        vals = [int(p) for p in parts if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or NxM, got {text!r}") from None
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2 or min(vals) < 2:
        raise argparse.ArgumentTypeError(f"expected N or NxM with N, M >= 2, got {text!r}")
    return vals[0], vals[1]


def _load(loader, path):
    try:
        return loader(path)
    except SchemaError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: {exc}") from None


# --- commands -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    model = _load(load_building_model, args.model)
    cfg = _load(load_configuration, args.config)
    dist = _load(load_disturbance, args.disturbance)
    T0 = None if args.t0 is None else _float_list(args.t0)
    if dist.K != model.dt_steps:
        raise SchemaError(f"disturbance has K={dist.K} steps, model expects dt_steps={model.dt_steps}")
    out = simulate_period(model, cfg, dist, T_0=T0)
    write_json(args.out, simulation_output_to_dict(out))
    print(f"S={out.S!r} E={out.E!r}")
    return EXIT_OK


def _spec_with_overrides(args):
    spec = _load(load_sample_spec, args.spec)
    changes = {}
    if args.n is not None:
        changes["N"] = args.n
    if args.seed is not None:
        changes["seed"] = args.seed
    return dataclasses.replace(spec, **changes) if changes else spec


def cmd_sample(args) -> int:
    model = _load(load_building_model, args.model)
    spec = _spec_with_overrides(args)
    cloud = monte_carlo_cloud(model, spec, workers=args.workers)
    write_csv(args.out, ["S", "E"], zip(cloud.S.tolist(), cloud.E.tolist()))
    print(f"{len(cloud)} points, {cloud.n_diverged} diverged, seed {spec.seed}")
    return EXIT_OK


def _print_key_points(kp):
    for key, value in kp.as_dict().items():
        print(f"{key:6s} {value}")


def cmd_extract(args) -> int:
    model = _load(load_building_model, args.model)
    spec = _spec_with_overrides(args)
    cloud = monte_carlo_cloud(model, spec, workers=args.workers)
    static = build_static_model(cloud.S, cloud.E, resolution=args.resolution,
                                bandwidth=args.bandwidth, dilation=args.dilation)
    write_json(args.out, static_model_to_dict(static))
    _print_key_points(static.key_points)
    return EXIT_OK


def cmd_canonical(args) -> int:
    kp = _load(load_key_points, args.key_points)
    try:
        static = canonical_model(kp, resolution=args.resolution)
    except ValueError as exc:
        raise CliError(EXIT_SHAPE, f"key points cannot form a canonical model: {exc}") from None
    write_json(args.out, static_model_to_dict(static))
    _print_key_points(static.key_points)
    return EXIT_OK


def _load_static_with_key_points(path):
    static = _load(load_static_model, path)
    if static.key_points is None:
        raise CliError(EXIT_ANALYSIS, f"{path}: static model has no key points")
    return static


def cmd_sweep(args) -> int:
    static = _load_static_with_key_points(args.static)
    cells = agents.Cells.of(static)
    spec = agents.manager_objective(cells) if args.objective == "manager" else agents.owner_objective(cells)
    rows = param_opt.sweep(spec, args.lambdas)
    write_csv(args.out, ["lambda", "x_lo", "x_hi"], param_opt.sweep_csv_rows(rows))
    print(f"{len(rows)} rows written")
    return EXIT_OK


def cmd_trace(args) -> int:
    static = _load_static_with_key_points(args.static)
    rows = agents.trace(static, args.scheme, args.params, lam=args.lam)
    name = "lambda" if args.scheme == "none" else "gamma"
    write_csv(args.out, ["period", name, "S_lo", "S_hi", "E_lo", "E_hi"], rows)
    print(f"{len(rows)} rows written")
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = DEFAULT_SEED if args.seed is None else args.seed
    if args.replay:
        text = Path(args.replay).read_text(encoding="utf-8") if Path(args.replay).is_file() else None
        if text is None:
            raise SchemaError(f"no such file: {args.replay}")
        try:
            spec, lams, direction = param_opt.instance_from_json(text)
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{args.replay}: {exc}") from None
        swapped = None
        if args.corrupt:
            swapped = param_opt.Family.TYPE2 if spec.family is param_opt.Family.TYPE1 else param_opt.Family.TYPE1
        verdict = param_opt.check_theorem(spec, lams, direction, tie_tol=0.0, solver_family=swapped)
        print(verdict.describe())
        return EXIT_OK if verdict.ok else EXIT_COUNTEREXAMPLE
    report = param_opt.verify_theorems(args.instances, seed, corrupt=args.corrupt)
    for name, passed in report.passed.items():
        print(f"{name:16s} {passed}/{args.instances} instances pass")
    if report.ok:
        print(f"no counterexamples (seed {seed})")
        return EXIT_OK
    name, k, verdict, instance = report.counterexamples[0]
    print(f"{len(report.counterexamples)} counterexample(s); first: {name} instance {k}: {verdict.describe()}")
    if args.counterexample_out:
        atomic_write_text(args.counterexample_out, instance + "\n")
        print(f"instance written to {args.counterexample_out}")
    else:
        print(instance)
    return EXIT_COUNTEREXAMPLE


def cmd_savings(args) -> int:
    static = _load_static_with_key_points(args.static)
    cal = agents.calibrate(static, args.actual, args.salary, use_work=args.elasticity == "work")
    rows = agents.savings_table(static, cal.lam, args.payouts, args.prices, cal.mu_elast)
    header, body = agents.savings_csv(rows, args.prices)
    write_csv(args.out, header, body)
    print(f"lambda={cal.lam!r} mu_elast={cal.mu_elast!r} period-1 point=({cal.point1.S!r}, {cal.point1.E!r})")
    sys.stdout.write(csv_text(header, [[f"{v:.6g}" for v in row] for row in body]))
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hvac-incentives", description="HVAC operating-model and incentive analysis.")
    ap.add_argument("--seed", type=int, default=None,
                    help=f"RNG seed (unsigned 64-bit); default: the sample spec's seed, or {DEFAULT_SEED} for verify")
    # Accept --seed after the subcommand as well; SUPPRESS keeps the global value when absent.
    seed_parent = argparse.ArgumentParser(add_help=False)
    seed_parent.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[seed_parent], **kw)

    p = add("simulate", help="simulate one period and write its (S, E) point and trace")
    p.add_argument("model")
    p.add_argument("config")
    p.add_argument("disturbance")
    p.add_argument("-o", "--out", default="point.json")
    p.add_argument("--t0", default=None, help="initial zone temperatures, comma separated (default: setpoint)")
    p.set_defaults(func=cmd_simulate)

    for name, func, default_out, helptext in (
        ("sample", cmd_sample, "cloud.csv", "Monte Carlo cloud of operating points as CSV"),
        ("extract", cmd_extract, "static-model.json", "cloud -> density -> work -> mask -> key points"),
    ):
        p = add(name, help=helptext)
        p.add_argument("model")
        p.add_argument("spec")
        p.add_argument("-o", "--out", default=default_out)
        p.add_argument("--n", type=int, default=None, help="sample count (overrides the sample spec file)")
        p.add_argument("--workers", type=int, default=1, help="threads used for sampling")
        if name == "extract":
            p.add_argument("--resolution", type=_resolution, default=(200, 200), help="grid size N or NxM")
            p.add_argument("--bandwidth", type=float, default=DEFAULT_BANDWIDTH, help="Gaussian width in cells")
            p.add_argument("--dilation", type=int, default=DEFAULT_DILATION, help="mask dilation steps")
        p.set_defaults(func=func)

    p = add("canonical", help="analytic static model from a key-points file")
    p.add_argument("key_points")
    p.add_argument("-o", "--out", default="static-model.json")
    p.add_argument("--resolution", type=_resolution, default=(200, 200))
    p.set_defaults(func=cmd_canonical)

    p = add("sweep", help="x_lo/x_hi of the manager (x=S, parameter lambda) or owner (parameter mu)")
    p.add_argument("static")
    p.add_argument("--objective", choices=("manager", "owner"), default="manager")
    p.add_argument("--lambdas", type=_float_list, required=True)
    p.add_argument("-o", "--out", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = add("trace", help="per-period best-response projections over a parameter sweep")
    p.add_argument("static")
    p.add_argument("--scheme", choices=("none", "baselining", "bonus"), default="none")
    p.add_argument("--param-list", dest="params", type=_float_list, required=True,
                   help="lambda values (scheme none) or gamma values, increasing")
    p.add_argument("--lam", type=float, default=0.0, help="manager work weight for the incentive schemes")
    p.add_argument("-o", "--out", default="trace.csv")
    p.set_defaults(func=cmd_trace)

    p = add("verify", help="randomised check of the monotone ordering results")
    p.add_argument("--instances", type=int, default=10_000, help="instances per case")
    p.add_argument("--corrupt", action="store_true",
                   help="mutation test: solve with the other objective family (must fail)")
    p.add_argument("--replay", default=None, help="re-check one serialized instance")
    p.add_argument("--counterexample-out", default=None, help="file for the first failing instance")
    p.set_defaults(func=cmd_verify)

    p = add("savings", help="bonus savings table after calibrating lambda and the elasticity")
    p.add_argument("static")
    p.add_argument("--payouts", type=_float_list, required=True)
    p.add_argument("--prices", type=_float_list, required=True)
    p.add_argument("--salary", type=float, required=True, help="period-1 salary R_1 (USD/day)")
    p.add_argument("--actual", type=_point, required=True, help="observed operating point S,E")
    p.add_argument("--elasticity", choices=("energy", "work"), default="energy",
                   help="use (S1 - lambda*E1)/R_1 (energy) or (S1 - lambda*W1)/R_1 (work)")
    p.add_argument("-o", "--out", default="table.csv")
    p.set_defaults(func=cmd_savings)
    return ap


_ANALYSIS_COMMANDS = {"trace", "sweep", "savings"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SimulationDiverged, SamplingFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ModelShapeError as exc:
        code = EXIT_ANALYSIS if args.command in _ANALYSIS_COMMANDS else EXIT_SHAPE
        print(f"error: {exc}", file=sys.stderr)
        return code
    except (DomainError, CalibrationError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (HvacIncentiveError, ValueError) as exc:
        code = EXIT_ANALYSIS if args.command in _ANALYSIS_COMMANDS else EXIT_INPUT
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
