"""Command line entry point: ``python -m nemflow <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, ConfigError, load_config
from .equilibrium import (
    InsufficientDataError,
    SteadyConvergenceError,
    distance,
    estimate_theta,
    fit_decay,
    lyapunov_gap,
    solve_steady,
)
from .flow import FlowState
from .grid import VelocityField, norm
from .io import SchemaError, read_records, snapshot_write, write_records
from .linalg import NumericalFailure
from .mms import CASES, mms_run
from .presets import build
from .simulator import SimState, energy_audit, lyapunov_violations, run

log = logging.getLogger("nemflow")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

CONFIG_HELP = """\
config defaults: bc_mode=dirichlet, m=2, params nu=lambda=gamma=1,
initial preset=cavity, boundary kind=trace, dt adaptive with cap 1e-2,
residual_target=none, max_steps=none, record_interval=10, output_dir=out,
solver rel_tol=1e-10 max_iterations=500 method=direct.
Required keys: grid.nx, grid.ny, potential, t_max."""


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n", encoding="utf-8")


def _out_dir(arg, default) -> Path:
    out = Path(arg if arg is not None else default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(path):
    try:
        return load_config(path)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except ConfigError as exc:
        raise UsageError(f"invalid config: {exc}") from None


def cmd_simulate(args) -> int:
    try:
        config = _load(args.config)
    except UsageError as exc:
        _write_json(_out_dir(args.out, ".") / "run.json", {"command": "simulate", "config_path": str(args.config),
                                              "reason": "input_error", "error": str(exc), "wall_time": 0.0})
        raise
    out = _out_dir(args.out, config.output_dir)
    manifest = {"command": "simulate", "config": config.to_dict()}
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        result = run(config)
    except NumericalFailure as exc:
        manifest.update(reason="numerical_failure", error=str(exc))
        state = getattr(exc, "state", None)
        if state is not None:
            snapshot_write(state, out / "last_good.nemq")
            manifest["t_final"] = state.t
        code = EXIT_NUMERIC
        print(f"numerical failure: {exc}", file=sys.stderr)
    except (ValueError, OSError, SchemaError) as exc:
        manifest.update(reason="input_error", error=str(exc))
        code = EXIT_USAGE
        print(f"error: {exc}", file=sys.stderr)
    else:
        write_records(result.records, out / "records.csv")
        snapshot_write(result.state, out / "final.nemq")
        last = result.records[-1]
        manifest.update(
            reason=result.reason,
            steps=result.steps,
            dt_halvings=result.dt_halvings,
            t_final=result.state.t,
            final=dict(zip(last.columns(), last.values())),
            files=["records.csv", "final.nemq"],
        )
        print(f"{result.reason} at t={result.state.t:.6g} after {result.steps} steps; E={last.total:.10g}")
    manifest["wall_time"] = time.perf_counter() - t0
    _write_json(out / "run.json", manifest)
    return code


def cmd_steady(args) -> int:
    try:
        config = _load(args.config)
    except UsageError as exc:
        _write_json(_out_dir(args.out, ".") / "run.json", {"command": "steady", "config_path": str(args.config),
                                              "reason": "input_error", "error": str(exc), "wall_time": 0.0})
        raise
    out = _out_dir(args.out, config.output_dir)
    manifest = {"command": "steady", "config": config.to_dict(), "seed": args.seed}
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        if Path(args.seed).is_file():
            cfg = config.replace(initial={"snapshot": str(args.seed)})
        elif args.seed in PRESETS:
            cfg = config.replace(initial={"preset": args.seed})
        else:
            raise UsageError(f"--seed {args.seed!r} is neither a snapshot file nor a preset ({', '.join(PRESETS)})")
        model, state = build(cfg)
        sol = solve_steady(state.director, model.grid, model.boundary, model.params.potential, tol=args.tol)
    except SteadyConvergenceError as exc:
        manifest.update(reason="not_converged", error=str(exc), best_residual=exc.best[0] if exc.best else None)
        code = EXIT_NUMERIC
        print(f"numerical failure: {exc}", file=sys.stderr)
    except NumericalFailure as exc:
        manifest.update(reason="numerical_failure", error=str(exc))
        code = EXIT_NUMERIC
        print(f"numerical failure: {exc}", file=sys.stderr)
    except (ValueError, OSError, SchemaError, ConfigError) as exc:
        manifest.update(reason="input_error", error=str(exc))
        code = EXIT_USAGE
        print(f"error: {exc}", file=sys.stderr)
    else:
        g = model.grid
        rest = SimState(0.0, FlowState(VelocityField.zeros(g)), sol.d_inf, model.boundary)
        snapshot_write(rest, out / "steady.nemq")
        dist = distance(state.director, sol.d_inf, g)
        v = state.flow.v
        summary = {
            "residual_norm": sol.residual_norm,
            "method": sol.method,
            "newton_iterations": sol.newton_iterations,
            "gradient_flow_steps": sol.flow_steps,
            "energy": sol.energy,
            "E_inf": sol.total_energy(model.params.lam),
            "seed_distance": dist,
            "seed_v_H1": math.hypot(norm(v, "L2"), norm(v, "H1semi")),
        }
        _write_json(out / "steady.json", summary)
        manifest.update(reason="converged", steady=summary, files=["steady.nemq", "steady.json"])
        print(
            f"{sol.method}: residual {sol.residual_norm:.3e} after {sol.newton_iterations} Newton iterations; "
            f"E_inf={summary['E_inf']:.12g}; |d_seed - d_inf|_H1={dist['H1']:.3e}"
        )
    manifest["wall_time"] = time.perf_counter() - t0
    _write_json(out / "run.json", manifest)
    return code


def _read(path):
    try:
        return read_records(path)
    except OSError as exc:
        raise UsageError(f"cannot read records: {exc}") from None
    except SchemaError as exc:
        raise UsageError(str(exc)) from None


def _window(text):
    if text is None:
        return None
    try:
        a, b = (float(s) for s in text.split(","))
    except ValueError:
        raise UsageError(f"--window expects 'a,b', got {text!r}") from None
    if not a < b:
        raise UsageError("--window needs a < b")
    return a, b


def cmd_fit_rate(args) -> int:
    out = _out_dir(args.out, ".")
    manifest = {"command": "fit-rate", "records": str(args.records), "target": args.target, "window": args.window}
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        window = _window(args.window)
        records = _read(args.records)
        t = np.array([r.t for r in records])
        result = {"target": args.target}
        if args.target == "state":
            y = np.array([r.v_H1 + r.residual_L2 for r in records])
            fit = fit_decay(t, y, window, target="state", floor=args.floor)
            result["fit"] = fit.as_dict()
        else:
            if not records:
                raise InsufficientDataError("insufficient points: no records")
            e_inf = args.e_inf
            if e_inf is None:
                e_inf = records[-1].total
                result["E_inf_source"] = "last record"
            gap = lyapunov_gap(records, e_inf)
            floor = args.floor if args.floor > 0 else 100 * 1e-14 * abs(gap.E0)
            fit = fit_decay(gap.t, gap.gap, window, target="gap", floor=floor)
            result["fit"] = fit.as_dict()
            result["E_inf"] = e_inf
            try:
                result["theta"] = estimate_theta(gap, window).as_dict()
            except (InsufficientDataError, ValueError) as exc:
                result["theta_error"] = str(exc)
        manifest.update(reason="ok", result=result)
        print(json.dumps(_jsonable(result), indent=2))
    except UsageError as exc:
        manifest.update(reason="input_error", error=str(exc))
        code = EXIT_USAGE
        print(f"error: {exc}", file=sys.stderr)
    except (InsufficientDataError, ValueError) as exc:
        manifest.update(reason="fit_failed", error=str(exc))
        code = EXIT_NUMERIC
        print(f"fit failed: {exc}", file=sys.stderr)
    manifest["wall_time"] = time.perf_counter() - t0
    _write_json(out / "run.json", manifest)
    if code == EXIT_OK:
        _write_json(out / "fit.json", manifest["result"])
    return code


def cmd_audit(args) -> int:
    out = _out_dir(args.out, ".")
    manifest = {"command": "audit", "records": str(args.records)}
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        records = _read(args.records)
        report = energy_audit(records)
        E0 = records[0].total
        viol = lyapunov_violations(records, args.lyapunov_tol * abs(E0))
        summary = dict(report.summary(), lyapunov_violations=int(viol.size),
                       max_div_inf=max(r.div_inf for r in records))
        manifest.update(reason="ok", audit=summary)
        for k, v in summary.items():
            print(f"{k:>22}: {v}")
    except UsageError as exc:
        manifest.update(reason="input_error", error=str(exc))
        code = EXIT_USAGE
        print(f"error: {exc}", file=sys.stderr)
    except ValueError as exc:
        manifest.update(reason="audit_failed", error=str(exc))
        code = EXIT_NUMERIC
        print(f"audit failed: {exc}", file=sys.stderr)
    manifest["wall_time"] = time.perf_counter() - t0
    _write_json(out / "run.json", manifest)
    return code


def cmd_mms(args) -> int:
    if args.case not in CASES:
        raise UsageError(f"unknown MMS case {args.case!r}; choose from {', '.join(CASES)}")
    out = _out_dir(args.out, ".")
    t0 = time.perf_counter()
    manifest = {"command": "mms", "case": args.case}
    try:
        table = mms_run(args.case)
    except (NumericalFailure, RuntimeError) as exc:
        manifest.update(reason="numerical_failure", error=str(exc), wall_time=time.perf_counter() - t0)
        _write_json(out / "run.json", manifest)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(table.format())
    result = {
        "case": table.case, "kind": table.kind, "rows": table.rows(),
        "saturated": table.saturated, "monotone": table.monotone,
    }
    _write_json(out / "mms.json", result)
    manifest.update(reason="ok", result=result, wall_time=time.perf_counter() - t0)
    _write_json(out / "run.json", manifest)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nemflow", description="Nematic liquid crystal flow workbench.")
    p.add_argument("--version", action="version", version=f"nemflow {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a configured simulation", epilog=CONFIG_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--config", required=True, help="JSON run configuration")
    s.add_argument("--out", help="output directory (default: the config's output_dir)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("steady", help="solve the stationary director problem", epilog=CONFIG_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--config", required=True)
    s.add_argument("--seed", required=True, help="snapshot file or preset name used as Newton seed")
    s.add_argument("--out")
    s.add_argument("--tol", type=float, default=1e-10, help="residual tolerance (default 1e-10)")
    s.set_defaults(func=cmd_steady)

    s = sub.add_parser("fit-rate", help="fit exponential/algebraic decay to a records CSV")
    s.add_argument("--records", required=True)
    s.add_argument("--window", help="fit window 'a,b' in time units")
    s.add_argument("--target", choices=("gap", "state"), default="state",
                   help="state: v_H1 + residual_L2; gap: total - E_inf (default state)")
    s.add_argument("--e-inf", type=float, help="equilibrium energy for --target gap (default: last record)")
    s.add_argument("--floor", type=float, default=0.0, help="drop samples at or below this value")
    s.add_argument("--out", help="output directory (default .)")
    s.set_defaults(func=cmd_fit_rate)

    s = sub.add_parser("audit", help="discrete energy-law audit of a records CSV")
    s.add_argument("--records", required=True)
    s.add_argument("--lyapunov-tol", type=float, default=1e-8, help="allowed rise per record, relative to E(0)")
    s.add_argument("--out", help="output directory (default .)")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("mms", help="manufactured-solution convergence table")
    s.add_argument("--case", required=True, help=f"one of {', '.join(CASES)}")
    s.add_argument("--out", help="output directory (default .)")
    s.set_defaults(func=cmd_mms)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
