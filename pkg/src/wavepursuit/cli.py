"""Command-line surface.

Subcommands: run, verify, compare, duel, figures. Exit codes are part of the
contract: 0 success, 1 usage or I/O trouble, 2 a scenario or trace that fails
validation, 3 solver failure, 4 a verification check that ran and failed.

Output files land in the directory named by --out, else the WAVEPURSUIT_OUT
environment variable, else the working directory. Batch sweeps (compare,
duel) run their games in separate processes since every game is independent.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .agents import _PURSUER_FIELD_KIND, StrategyTag
from .analysis import avoidance_margin_check, boundary_probe, lyapunov_check, \
    maximum_principle_check
from .engine import GameTrace, Scenario, check_capture, run_game, validate_scenario
from .environment import build_environment
from .errors import ParseError, SchemaMismatch, SolverFailure, ValidationError
from .fields import BoundaryMode, TargetFootprint, solve_laplace
from .figures import FIGURE_KINDS, render_figure
from .scenario import load_scenario_file
from .traceio import TRACE_MARKER, read_trace, write_trace

__all__ = ["main"]

OUT_ENV = "WAVEPURSUIT_OUT"

_COMPARE_TAGS = {
    "laplace": StrategyTag.PURSUER_LAPLACE,
    "diffusion": StrategyTag.PURSUER_DIFFUSION,
    "wave": StrategyTag.PURSUER_WAVE,
    "duel": StrategyTag.PURSUER_HARMONIC_DUEL,
}


def _out_dir(args) -> Path:
    base = args.out or os.environ.get(OUT_ENV) or "."
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve(out: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else out / p


def _summary(trace: GameTrace) -> str:
    rep = check_capture(trace)
    if rep.captured:
        t_cap = trace.t[rep.first_capture_tick]
        tail = f"captured at t={t_cap:g} s"
    else:
        tail = f"not captured, final distance {rep.final_distance:.3f} m"
    return f"{len(trace)} rows, {tail}"


def _run_game_job(scenario: Scenario) -> GameTrace:
    return run_game(scenario)


def _run_batch(scenarios, jobs: int | None):
    if jobs is None:
        jobs = min(len(scenarios), os.cpu_count() or 1)
    if jobs <= 1 or len(scenarios) == 1:
        return [run_game(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_game_job, scenarios))


# -- run -------------------------------------------------------------------------


def _cmd_run(args) -> int:
    out = _out_dir(args)
    sf = load_scenario_file(args.scenario)
    scenario = sf.scenario
    if args.echo_defaults and sf.defaults_applied:
        for line in sf.defaults_applied:
            print(f"default: {line}")
    trace = run_game(scenario)
    trace_path = _resolve(out, args.trace or sf.outputs.trace or f"{scenario.name}.csv")
    write_trace(trace, trace_path)
    print(f"{scenario.name}: {_summary(trace)}; wrote {trace_path}")
    for kind in sf.outputs.figures:
        fig_path = _resolve(out, f"{scenario.name}_{kind}.svg")
        render_figure(trace, kind, fig_path, environment=scenario.environment)
        print(f"wrote {fig_path}")
    return 0


# -- verify ----------------------------------------------------------------------


def _is_trace_file(path: Path) -> bool:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.readline().startswith(TRACE_MARKER)


def _verify_scenario(path: Path) -> list:
    sf = load_scenario_file(path)
    scenario = sf.scenario
    env = validate_scenario(scenario)
    trace = run_game(scenario, env)
    checks = []

    arrays = (trace.t, trace.pursuer, trace.evader, trace.distance, trace.command,
              trace.potential, trace.cmd_grad_sq, trace.cmd_dvdt,
              trace.clearance_p, trace.clearance_e)
    finite = all(np.isfinite(a).all() for a in arrays)
    checks.append(("finite-trace", finite, f"{len(trace)} rows"))

    # steady harmonic field for the final target position carries the
    # boundary checks; the transient fields live only inside the engine
    radius = scenario.field.target_radius or max(env.h, scenario.capture_radius)
    target = TargetFootprint(tuple(trace.evader[-1]), radius)
    field = solve_laplace(env, target, mode=scenario.field.boundary_mode,
                          level=scenario.field.level)

    report = avoidance_margin_check(trace, env, field=field)
    checks.append(("no-obstacle-hits", report.obstacle_hits == 0,
                   f"{report.obstacle_hits} classified hits, "
                   f"min clearance {report.min_clearance_pursuer:.3f} m"))

    mp = maximum_principle_check(field)
    checks.append(("maximum-principle", mp.shape[0] == 0,
                   f"{mp.shape[0]} interior extrema on the steady field"))

    probes = boundary_probe(field)
    if probes.size == 0:
        checks.append(("boundary-band", True, "no band cells to probe"))
    elif scenario.field.boundary_mode is BoundaryMode.DIRICHLET:
        frac = float(np.mean(probes < 0.0))
        checks.append(("boundary-band", frac >= 0.99,
                       f"dV/dn < 0 at {100.0 * frac:.1f}% of {probes.size} probes"))
    else:
        worst = float(np.abs(probes).max())
        bound = 1e-3 * abs(scenario.field.level)
        checks.append(("boundary-band", worst <= bound,
                       f"max |dV/dn| {worst:.2e} against {bound:.2e}"))

    # the analytic rate -|grad V|^2 is realized only by the unnormalized
    # command; a speed-clamped pursuer moves on the same ray at a different
    # rate, so the agreement check is enabled just for the raw configuration
    if scenario.pursuer.strategy is StrategyTag.PURSUER_WAVE \
            and not scenario.pursuer.normalize:
        ly = lyapunov_check(trace, scenario.pursuer.regularizer)
        ok = ly.fraction_negative >= 0.95 and ly.fraction_agreeing >= 0.90
        checks.append(("descent", ok,
                       f"negative {100.0 * ly.fraction_negative:.1f}%, "
                       f"rate agreement {100.0 * ly.fraction_agreeing:.1f}% "
                       f"on {int(ly.eligible.sum())} eligible ticks"))
    return checks


def _verify_trace(path: Path) -> list:
    trace = read_trace(path)
    checks = []
    arrays = (trace.t, trace.pursuer, trace.evader, trace.distance, trace.command,
              trace.potential, trace.cmd_grad_sq, trace.cmd_dvdt,
              trace.clearance_p, trace.clearance_e)
    checks.append(("finite-trace", all(np.isfinite(a).all() for a in arrays),
                   f"{len(trace)} rows"))
    if len(trace) >= 2:
        steps = np.diff(trace.t)
        uniform = steps.min() > 0 and float(np.ptp(steps)) <= 1e-9
        checks.append(("time-grid", uniform,
                       f"dt in [{steps.min():.6g}, {steps.max():.6g}]"))
    recomputed = np.hypot(*(trace.pursuer - trace.evader).T)
    gap = float(np.abs(recomputed - trace.distance).max())
    checks.append(("distance-consistency", gap <= 1e-9, f"max gap {gap:.2e} m"))
    min_clear = float(min(trace.clearance_p.min(), trace.clearance_e.min()))
    checks.append(("clearance-positive", min_clear > 0.0,
                   f"min clearance {min_clear:.3f} m"))
    if "capture_radius" in trace.metadata:
        flags = trace.distance <= float(trace.metadata["capture_radius"])
        checks.append(("capture-flags", bool(np.array_equal(flags, trace.captured)),
                       "flags match the distance column"))
    return checks


def _cmd_verify(args) -> int:
    out = _out_dir(args)
    path = Path(args.target)
    mode = "trace" if _is_trace_file(path) else "scenario"
    checks = _verify_trace(path) if mode == "trace" else _verify_scenario(path)
    for name, passed, detail in checks:
        print(f"{'ok  ' if passed else 'FAIL'} {name}: {detail}")
    ok = bool(all(passed for _, passed, _ in checks))
    report_path = _resolve(out, args.report or f"{path.stem}_verify.json")
    payload = {
        "target": str(path),
        "mode": mode,
        "passed": ok,
        "checks": [{"name": n, "passed": bool(p), "detail": d} for n, p, d in checks],
    }
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{'ok' if ok else 'FAIL'}: {sum(p for _, p, _ in checks)}/{len(checks)} "
          f"checks passed; report {report_path}")
    return 0 if ok else 4


# -- compare ---------------------------------------------------------------------


def _cmd_compare(args) -> int:
    out = _out_dir(args)
    sf = load_scenario_file(args.scenario)
    base = sf.scenario
    names = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not names:
        raise ValidationError("no strategies requested", field="strategies")
    variants = []
    for name in names:
        tag = _COMPARE_TAGS.get(name)
        if tag is None:
            raise ValidationError(f"unknown pursuer strategy {name!r}",
                                  field="strategies")
        variants.append(dataclasses.replace(
            base,
            name=f"{base.name}-{name}",
            pursuer=dataclasses.replace(base.pursuer, strategy=tag),
            field=dataclasses.replace(base.field, kind=_PURSUER_FIELD_KIND[tag]),
        ))
    traces = _run_batch(variants, args.jobs)
    print(f"{'strategy':<10} {'captured':<9} {'t_capture':>9} {'min dist':>9} "
          f"{'final':>9} {'lock':>6}")
    for name, scenario, trace in zip(names, variants, traces):
        write_trace(trace, _resolve(out, f"{scenario.name}.csv"))
        rep = check_capture(trace)
        t_cap = f"{trace.t[rep.first_capture_tick]:.2f}" if rep.captured else "-"
        print(f"{name:<10} {str(rep.captured).lower():<9} {t_cap:>9} "
              f"{trace.distance.min():>9.3f} {rep.final_distance:>9.3f} "
              f"{rep.lock_fraction:>6.2f}")
    return 0


# -- duel ------------------------------------------------------------------------


def _cmd_duel(args) -> int:
    out = _out_dir(args)
    sf = load_scenario_file(args.scenario)
    base = sf.scenario
    try:
        ratios = [float(tok) for tok in args.speed_ratios.split(",") if tok.strip()]
    except ValueError as e:
        raise ValidationError(f"bad speed ratio list: {e}", field="speed-ratios")
    if not ratios:
        raise ValidationError("no speed ratios requested", field="speed-ratios")
    variants = [
        dataclasses.replace(
            base,
            name=f"{base.name}-ve{ratio:g}",
            evader=dataclasses.replace(base.evader, speed=ratio * base.pursuer.speed),
        )
        for ratio in ratios
    ]
    traces = _run_batch(variants, args.jobs)
    print(f"{'v_e/v_p':<8} {'steady dist':>11} {'lock':>6} {'captured':<9}")
    for ratio, scenario, trace in zip(ratios, variants, traces):
        write_trace(trace, _resolve(out, f"{scenario.name}.csv"))
        rep = check_capture(trace, lock_threshold=args.lock_threshold)
        tail = trace.distance[-max(1, len(trace) // 4):]
        print(f"{ratio:<8g} {float(tail.mean()):>11.3f} {rep.lock_fraction:>6.2f} "
              f"{str(rep.captured).lower():<9}")
    return 0


# -- figures ---------------------------------------------------------------------


def _cmd_figures(args) -> int:
    out = _out_dir(args)
    traces = [read_trace(p) for p in args.traces]
    environment = None
    if args.scenario:
        environment = load_scenario_file(args.scenario).scenario.environment
    name = args.name or f"{Path(args.traces[0]).stem}_{args.kind}.svg"
    fig_path = _resolve(out, name)
    render_figure(traces, args.kind, fig_path, environment=environment)
    print(f"wrote {fig_path}")
    return 0


# -- entry -----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavepursuit",
        description="potential-field pursuit games: simulate, verify, sweep, plot")
    parser.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario and write its trace")
    p.add_argument("scenario")
    p.add_argument("--trace", help="trace filename override")
    p.add_argument("--echo-defaults", action="store_true",
                   help="list every scenario default that was filled in")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="run the check suite on a scenario or trace")
    p.add_argument("target", help="scenario file or trace file")
    p.add_argument("--report", help="JSON report filename override")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("compare", help="same scenario under different pursuer strategies")
    p.add_argument("scenario")
    p.add_argument("--strategies", default="laplace,diffusion,wave",
                   help="comma list from laplace,diffusion,wave,duel")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("duel", help="sweep the evader speed as a ratio of the pursuer's")
    p.add_argument("scenario")
    p.add_argument("--speed-ratios", default="0.95,1.05")
    p.add_argument("--lock-threshold", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=_cmd_duel)

    p = sub.add_parser("figures", help="render figures from stored traces")
    p.add_argument("traces", nargs="+")
    p.add_argument("--kind", choices=FIGURE_KINDS, default="trajectories")
    p.add_argument("--scenario", help="scenario file supplying obstacle outlines")
    p.add_argument("--name", help="output filename override")
    p.set_defaults(func=_cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; 1 is the documented usage code
        return 0 if (e.code or 0) == 0 else 1
    try:
        return args.func(args)
    except (ParseError, ValidationError, SchemaMismatch) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SolverFailure as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
