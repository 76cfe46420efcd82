"""Initial-condition sweeps: simulate, evaluate, and hand compact results to the verdicts."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .certificate import (
    CertificateReport,
    ConditionSums,
    Window,
    bar_windows,
    condition_sums,
    telescoping_residual,
    theorem2_verdict,
    theorem3_verdict,
    window_decay_table,
    FTS_EVIDENCE,
)
from .integrator import IntegrationConfig, settling_time, simulate
from .lyapunov import DEFAULT_BETA_GRID, LyapunovSet, decay_samples, decay_table_from_values
from .model import HybridSystemDef, HybridTrajectory, check_min_dwell

__all__ = [
    "TrajectoryEvaluation",
    "sweep_points",
    "evaluate_trajectory",
    "run_sweep",
    "certify",
    "SETTLE_TOL",
]

SETTLE_TOL = 1e-4


@dataclass
class TrajectoryEvaluation:
    """Everything the verdicts need from one trajectory, without the samples themselves."""

    x0: list
    radius: float
    direction: int
    reason: str
    t_final: float
    settling_time: Optional[float]
    sums: ConditionSums
    telescoping: float
    windows: list  # jump-free windows of the FTS mode
    dwell_ok: bool
    n_jumps: int
    decay: dict = field(default_factory=dict)  # mode -> (vdot, V) arrays
    decay_tables: dict = field(default_factory=dict)
    window_tables: dict = field(default_factory=dict)
    F: int = 1

    @property
    def n_windows(self) -> int:
        return len(self.windows)

    def decay_residual(self, mode: int, c: float, beta: float) -> float:
        vdot, vals = self.decay.get(mode, (np.empty(0), np.empty(0)))
        if vdot.size == 0:
            return float("-inf")
        return float(np.max(vdot + c * np.power(np.maximum(vals, 0.0), beta)))

    def window_residual(self, mode: int, c: float, beta: float) -> float:
        """Worst ``end^q - start^q + c q |T|`` over the windows (``q = 1 - beta``); ``<= 0`` means satisfied."""
        if mode != self.F:
            return float("-inf")
        q = 1.0 - beta
        worst = float("-inf")
        for w in self.windows:
            if w.v_start > 0 and w.length > 0:
                worst = max(worst, max(w.v_end, 0.0) ** q - w.v_start**q + c * q * w.length)
        return worst

    def summary(self) -> dict:
        s = self.sums
        return {
            "x0": list(self.x0),
            "radius": self.radius,
            "reason": self.reason,
            "t_final": self.t_final,
            "settling_time": self.settling_time,
            "telescoping_residual": self.telescoping,
            "n_jumps": self.n_jumps,
            "n_windows": self.n_windows,
            "dwell_ok": self.dwell_ok,
            "s1_max": s.s1_max,
            "s2_max": s.s2_max,
            "s3_max": s.s3_max(),
            "s5_max": s.s5_max(self.F),
        }


def sweep_points(n: int, radii: Sequence[float], directions: int = 8, seed: int = 0) -> list[tuple[float, int, list]]:
    """Initial states ``(radius, direction index, x0)``.

    In the plane the directions are evenly spaced angles starting at 0; on the
    line they alternate sign; in higher dimensions they are seeded random unit
    vectors.
    """
    if directions < 1:
        raise ValueError("need at least one direction")
    if n == 1:
        units = [[1.0 if k % 2 == 0 else -1.0] for k in range(directions)]
    elif n == 2:
        units = [[math.cos(2 * math.pi * k / directions), math.sin(2 * math.pi * k / directions)] for k in range(directions)]
    else:
        g = np.random.default_rng(seed).normal(size=(directions, n))
        units = (g / np.linalg.norm(g, axis=1, keepdims=True)).tolist()
    out = []
    for r in sorted(float(r) for r in radii):
        if r < 0:
            raise ValueError("radii must be non-negative")
        for k, u in enumerate(units):
            out.append((r, k, [r * v for v in u]))
    return out


def evaluate_trajectory(
    traj: HybridTrajectory,
    system: HybridSystemDef,
    lyap: LyapunovSet,
    radius: Optional[float] = None,
    direction: int = 0,
    settle_tol: float = SETTLE_TOL,
    origin_tol: float = 1e-9,
    beta_grid=DEFAULT_BETA_GRID,
) -> TrajectoryEvaluation:
    F = system.policy.fts_mode
    sums = condition_sums(traj, lyap, F)
    wins: list[Window] = bar_windows(traj, lyap, F) if F in traj.modes_present() else []
    decay, tables = {}, {}
    for m in sorted(traj.modes_present()):
        vdot, vals = decay_samples(traj, lyap, m, system.flows[m - 1], origin_tol)
        decay[m] = (vdot, vals)
        if vdot.size:
            tables[m] = decay_table_from_values(vdot, vals, beta_grid)
    wtables = {F: window_decay_table(wins, beta_grid, min_value=0.0)} if wins else {}
    x0 = traj.x0.tolist()
    return TrajectoryEvaluation(
        x0=x0,
        radius=float(np.linalg.norm(traj.x0)) if radius is None else float(radius),
        direction=direction,
        reason=traj.reason,
        t_final=traj.t_final,
        settling_time=settling_time(traj, settle_tol),
        sums=sums,
        telescoping=telescoping_residual(sums),
        windows=wins,
        dwell_ok=check_min_dwell(traj, F, system.policy.t_d),
        n_jumps=len(traj.jump_events),
        decay=decay,
        decay_tables=tables,
        window_tables=wtables,
        F=F,
    )


def _run_one(args) -> TrajectoryEvaluation:
    system, lyap, cfg, r, k, x0, settle_tol = args
    traj = simulate(system, x0, cfg)
    return evaluate_trajectory(traj, system, lyap, r, k, settle_tol, cfg.origin_tol)


def run_sweep(
    system: HybridSystemDef,
    lyap: LyapunovSet,
    radii: Sequence[float],
    directions: int = 8,
    cfg: IntegrationConfig = IntegrationConfig(),
    workers: int = 1,
    settle_tol: float = SETTLE_TOL,
) -> list[TrajectoryEvaluation]:
    """Simulate and evaluate every sweep point; results are ordered by radius then direction."""
    jobs = [
        (system, lyap, cfg, r, k, x0, settle_tol)
        for r, k, x0 in sweep_points(system.n, radii, directions, system.policy.seed)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return sorted(results, key=lambda e: (e.radius, e.direction))


def certify(
    system: HybridSystemDef,
    lyap: LyapunovSet,
    evals: Sequence[TrajectoryEvaluation],
    require_jump_condition: bool = True,
) -> tuple[CertificateReport, list[CertificateReport]]:
    """Try the every-mode-FTS verdict first and fall back to the single-FTS-mode one.

    Returns the deciding report and every report produced.
    """
    modes = sorted(set().union(*[set(e.decay) for e in evals])) or [system.policy.fts_mode]
    t3 = theorem3_verdict(evals, lyap, modes)
    if t3.verdict == FTS_EVIDENCE:
        return t3, [t3]
    t2 = theorem2_verdict(
        evals, lyap, system.policy.fts_mode, system.policy.t_d, require_jump_condition=require_jump_condition
    )
    return t2, [t3, t2]
