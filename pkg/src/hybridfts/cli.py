"""Command-line front end.

Exit codes: 0 success (or FTS-evidence), 1 configuration error, 2 simulation
failure, 3 verdict ``violated``, 4 verdict ``inconclusive``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .certificate import (
    FTS_EVIDENCE,
    VIOLATED,
    lemma1_oracle,
    random_lemma1_cases,
)
from .examples import REGISTRY, get_example
from .exprparse import ExprSyntaxError
from .files import write_csv, write_json, write_plot_data, write_trajectory_csv
from .integrator import IntegrationConfig, SimulationError, settling_time, simulate
from .model import PeriodicJumps, PeriodicSchedule, RandomSchedule, validate_system
from .sweep import SETTLE_TOL, certify, run_sweep
from .sysfile import SystemFileError, dump_system, load, save

EXIT_OK, EXIT_CONFIG, EXIT_SIM, EXIT_VIOLATED, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4


class ConfigError(Exception):
    pass


def _floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{what}: empty list")
    return vals


def _override_policy(policy, dwell=None, jump_period=None, td=None, seed=None):
    ms = policy.mode_schedule
    if dwell is not None:
        if isinstance(ms, PeriodicSchedule):
            ms = replace(ms, sequence=tuple((m, dwell) for m, _ in ms.sequence))
        elif isinstance(ms, RandomSchedule):
            ms = replace(ms, dwell=tuple((m, dwell) for m, _ in ms.dwell))
    js = policy.jump_schedule
    if jump_period is not None:
        if not isinstance(js, PeriodicJumps):
            raise ConfigError("--jump-period needs a periodic jump schedule")
        js = replace(js, period=jump_period)
    changes = {"mode_schedule": ms, "jump_schedule": js}
    if td is not None:
        changes["t_d"] = td
    if seed is not None:
        changes["seed"] = seed
    return replace(policy, **changes)


def _resolve(args):
    """``(name, system, lyapunov, config, radii, directions)`` from the CLI source flags."""
    if args.example:
        try:
            e = get_example(args.example)
        except KeyError as err:
            raise ConfigError(str(err.args[0])) from None
        name, system, lyap, cfg, radii, dirs = e.name, e.system, e.lyapunov, e.config, e.radii, e.directions
    else:
        loaded = load(args.system)
        system, lyap = loaded.system, loaded.lyapunov
        cfg = loaded.config or IntegrationConfig()
        radii, dirs = loaded.radii, loaded.directions or 8
        name = system.name or Path(args.system).stem
        problems = validate_system(system)
        if problems:
            raise ConfigError("equilibrium assumption violated: " + "; ".join(problems))
    system = system.with_policy(_override_policy(system.policy, args.dwell, args.jump_period, args.td, args.seed))
    cfg = cfg.replace(dt=args.dt, t_end=args.t_end)
    return name, system, lyap, cfg, radii, dirs


def _manifest_base(name, system, cfg) -> dict:
    return {
        "tool": "hybridfts",
        "version": __version__,
        "system": name,
        "fts_mode": system.policy.fts_mode,
        "t_d": system.policy.t_d,
        "seed": system.policy.seed,
        "integration": asdict(cfg),
    }


def cmd_simulate(args) -> int:
    name, system, lyap, cfg, _, _ = _resolve(args)
    if args.x0 is None:
        raise ConfigError("simulate needs --x0")
    x0 = _floats(args.x0, "--x0")
    if len(x0) != system.n:
        raise ConfigError(f"--x0 has {len(x0)} components, system has n = {system.n}")
    traj = simulate(system, x0, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_rows = write_trajectory_csv(traj, out / "trajectory.csv")
    plots = write_plot_data(traj, lyap, out)
    manifest = _manifest_base(name, system, cfg)
    manifest.update(
        {
            "x0": x0,
            "reason": traj.reason,
            "converged_at_start": traj.reason == "converged" and traj.t_final == cfg.t0,
            "t_final": traj.t_final,
            "x_final": traj.x_final.tolist(),
            "settling_time": settling_time(traj, SETTLE_TOL),
            "settling_tol": SETTLE_TOL,
            "n_segments": len(traj.segments),
            "n_jumps": len(traj.jump_events),
            "rows": n_rows,
            "files": {"trajectory": "trajectory.csv", **plots},
        }
    )
    write_json(out / "manifest.json", manifest)
    print(f"{name}: {traj.reason} at t={traj.t_final:.6g}, {len(traj.jump_events)} jumps -> {out}")
    return EXIT_OK


def _sweep_spec(args, radii, dirs):
    if args.radii is not None:
        radii = _floats(args.radii, "--radii")
    if radii is None:
        raise ConfigError("no sweep radii: pass --radii")
    if args.angles is not None:
        dirs = args.angles
    if dirs < 1:
        raise ConfigError("--angles must be >= 1")
    return radii, dirs


def _sweep_rows(evals) -> tuple[list, list]:
    header = [
        "radius", "direction", "x0", "reason", "t_final", "settling_time", "telescoping_residual",
        "n_jumps", "n_windows", "s1_max", "s2_max", "s3_max", "s5_max",
    ]
    rows = []
    for e in evals:
        s = e.summary()
        rows.append(
            [
                e.radius, e.direction, " ".join(repr(float(v)) for v in e.x0), e.reason, e.t_final,
                "" if e.settling_time is None else e.settling_time, e.telescoping, e.n_jumps, e.n_windows,
                s["s1_max"], s["s2_max"], s["s3_max"], s["s5_max"],
            ]
        )
    return header, rows


def cmd_sweep(args) -> int:
    name, system, lyap, cfg, radii, dirs = _resolve(args)
    if lyap is None:
        raise ConfigError("the system has no Lyapunov functions")
    radii, dirs = _sweep_spec(args, radii, dirs)
    evals = run_sweep(system, lyap, radii, dirs, cfg, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", *_sweep_rows(evals))
    manifest = _manifest_base(name, system, cfg)
    manifest.update({"radii": list(radii), "directions": dirs, "files": {"sweep": "sweep.csv"}})
    write_json(out / "manifest.json", manifest)
    settled = sum(e.settling_time is not None for e in evals)
    print(f"{name}: {settled}/{len(evals)} trajectories settled below {SETTLE_TOL:g} -> {out}")
    return EXIT_OK


def cmd_certify(args) -> int:
    name, system, lyap, cfg, radii, dirs = _resolve(args)
    if lyap is None:
        raise ConfigError("the system has no Lyapunov functions")
    radii, dirs = _sweep_spec(args, radii, dirs)
    if len({r for r in radii if r > 0}) < 3:
        raise ConfigError("certify needs at least 3 distinct non-zero radii")
    evals = run_sweep(system, lyap, radii, dirs, cfg, workers=args.workers)
    report, reports = certify(system, lyap, evals, require_jump_condition=not args.no_jump_condition)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = _manifest_base(name, system, cfg)
    doc.update({"radii": list(radii), "directions": dirs, "verdict": report.verdict, "deciding": report.theorem})
    doc["reports"] = [r.to_dict() for r in reports]
    write_json(out / "report.json", doc)
    summary = "\n\n".join(r.summary() for r in reports)
    (out / "summary.txt").write_text(summary + "\n")
    env_rows = []
    for r in reports:
        for c in r.checks:
            for row in c.evidence.get("table", []):
                env_rows.append([r.theorem, c.name, row["radius"], row["sample_max"], row["envelope"]])
    write_csv(out / "envelopes.csv", ["theorem", "condition", "radius", "sample_max", "envelope"], env_rows)
    write_csv(out / "sweep.csv", *_sweep_rows(evals))
    print(summary)
    if report.verdict == FTS_EVIDENCE:
        return EXIT_OK
    return EXIT_VIOLATED if report.verdict == VIOLATED else EXIT_INCONCLUSIVE


def cmd_lemma1(args) -> int:
    if args.count < 0:
        raise ConfigError("--count must be >= 0")
    slacks, failures = [], 0
    for a, b, r in random_lemma1_cases(args.count, args.seed):
        rep = lemma1_oracle(a, b, r)
        slacks.append(rep.min_slack)
        failures += not rep.holds(args.tol)
    stats = {
        "count": args.count,
        "seed": args.seed,
        "tol": args.tol,
        "vacuous": args.count == 0,
        "failures": failures,
        "min_slack": min(slacks) if slacks else None,
        "mean_slack": float(np.mean(slacks)) if slacks else None,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "lemma1.json", stats)
    flag = " (vacuous: no cases)" if stats["vacuous"] else ""
    print(f"lemma1: {args.count} cases, {failures} failures, min slack {stats['min_slack']}{flag}")
    return EXIT_OK if failures == 0 else EXIT_VIOLATED


def cmd_list(args) -> int:
    for name in sorted(REGISTRY):
        e = get_example(name)
        print(f"{name:16s} n={e.system.n} flows={e.system.n_flows} jumps={e.system.n_jumps}  {e.description}")
        for c in e.choices:
            print(f"{'':16s} choice: {c}")
    return EXIT_OK


def cmd_export(args) -> int:
    try:
        e = get_example(args.example)
    except KeyError as err:
        raise ConfigError(str(err.args[0])) from None
    doc = dump_system(e.system, e.lyapunov, e.config, e.radii, e.directions)
    save(args.path, doc)
    print(f"{e.name} -> {args.path}")
    return EXIT_OK


def _add_source(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--example", help="registry entry name")
    g.add_argument("--system", help="path to a JSON system file")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--dwell", type=float, help="dwell time for every mode")
    p.add_argument("--jump-period", dest="jump_period", type=float)
    p.add_argument("--td", type=float, help="minimum jump-free window of the FTS mode")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridfts", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one trajectory and write CSV plot data")
    _add_source(p)
    p.add_argument("--x0")
    p.set_defaults(func=cmd_simulate)

    for cmd, func, text in (
        ("sweep", cmd_sweep, "simulate a sweep of initial states"),
        ("certify", cmd_certify, "run a sweep and emit the stability verdict"),
    ):
        p = sub.add_parser(cmd, help=text)
        _add_source(p)
        p.add_argument("--radii")
        p.add_argument("--angles", type=int)
        p.add_argument("--workers", type=int, default=1)
        if cmd == "certify":
            p.add_argument("--no-jump-condition", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("lemma1", help="check the gap-sum power inequalities on random data")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lemma1)

    p = sub.add_parser("list-examples", help="list registry entries")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("export", help="write a registry entry as a system file")
    p.add_argument("--example", required=True)
    p.add_argument("path")
    p.set_defaults(func=cmd_export)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, SystemFileError, ExprSyntaxError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as err:
        print(f"simulation failed: {err}", file=sys.stderr)
        return EXIT_SIM
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
