"""Trajectory CSV, plot-data CSV and run manifests.

``trajectory.csv`` columns: ``t, mode, x1..xn, event, jump_index``. ``event``
is ``none``, ``switch`` (first sample of a new activation) or ``jump`` (the
post-jump sample; the pre-jump sample precedes it with the same ``t``).
``jump_index`` is 0 unless ``event == jump``. Floats are written with
``repr`` so they read back bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .lyapunov import LyapunovSet
from .model import HybridTrajectory

__all__ = [
    "EVENTS",
    "trajectory_rows",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_plot_data",
    "write_json",
    "write_csv",
    "read_csv",
]

EVENTS = ("none", "switch", "jump")


def _f(v: float) -> str:
    return repr(float(v))


def trajectory_rows(traj: HybridTrajectory) -> list[tuple]:
    """``(t, mode, state, event, jump_index)`` for every stored sample, boundaries de-duplicated."""
    jumps = {}
    for ev in traj.jump_events:
        jumps.setdefault(ev.t, []).append(ev.jump_index)
    rows = []
    last = len(traj.segments) - 1
    for k, seg in enumerate(traj.segments):
        stop = len(seg.times) if k == last else len(seg.times) - 1
        pending = {}
        for i in range(stop):
            t = float(seg.times[i])
            event, j = "none", 0
            if i == 0 and k > 0:
                event = "switch"
            elif i > 0 and seg.times[i - 1] == t and t in jumps:
                idx = pending.get(t, 0)
                event, j = "jump", jumps[t][idx]
                pending[t] = idx + 1
            rows.append((t, seg.mode, seg.states[i], event, j))
    return rows


def write_trajectory_csv(traj: HybridTrajectory, path) -> int:
    n = traj.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mode"] + [f"x{i}" for i in range(1, n + 1)] + ["event", "jump_index"])
        rows = trajectory_rows(traj)
        for t, mode, x, event, j in rows:
            w.writerow([_f(t), mode] + [_f(v) for v in x] + [event, j])
    return len(rows)


def read_trajectory_csv(path) -> dict:
    """Parse and validate a trajectory CSV; returns arrays ``t, mode, x, event, jump_index``."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = list(r)
    n = len(header) - 4
    expect = ["t", "mode"] + [f"x{i}" for i in range(1, n + 1)] + ["event", "jump_index"]
    if n < 1 or header != expect:
        raise ValueError(f"unexpected trajectory header {header}")
    t, mode, X, event, jidx = [], [], [], [], []
    for line, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValueError(f"line {line}: {len(row)} fields, expected {len(header)}")
        if row[-2] not in EVENTS:
            raise ValueError(f"line {line}: unknown event {row[-2]!r}")
        t.append(float(row[0]))
        mode.append(int(row[1]))
        X.append([float(v) for v in row[2 : 2 + n]])
        event.append(row[-2])
        jidx.append(int(row[-1]))
        if (event[-1] == "jump") != (jidx[-1] > 0):
            raise ValueError(f"line {line}: jump_index inconsistent with event")
    t = np.asarray(t)
    if np.any(np.diff(t) < 0):
        raise ValueError("times are not non-decreasing")
    return {
        "t": t,
        "mode": np.asarray(mode, dtype=int),
        "x": np.asarray(X, dtype=float).reshape(-1, n),
        "event": event,
        "jump_index": np.asarray(jidx, dtype=int),
    }


def write_csv(path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_f(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def write_plot_data(traj: HybridTrajectory, lyap: Optional[LyapunovSet], out_dir) -> dict:
    """Write the switching signal, states, log10 norm and per-mode Lyapunov values.

    Returns ``{kind: filename}``.
    """
    out = Path(out_dir)
    rows = trajectory_rows(traj)
    n = traj.n
    files = {}

    sw = [(seg.t_start, seg.mode) for seg in traj.segments]
    sw.append((traj.t_final, traj.segments[-1].mode))
    write_csv(out / "switching.csv", ["t", "mode"], [(float(t), m) for t, m in sw])
    files["switching"] = "switching.csv"

    write_csv(out / "states.csv", ["t"] + [f"x{i}" for i in range(1, n + 1)], [(t, *map(float, x)) for t, _, x, _, _ in rows])
    files["states"] = "states.csv"

    def log_norm(x):
        nrm = float(np.linalg.norm(x))
        return math.log10(nrm) if nrm > 0 else float("-inf")

    write_csv(out / "norm.csv", ["t", "log10_norm"], [(t, log_norm(x)) for t, _, x, _, _ in rows])
    files["norm"] = "norm.csv"

    if lyap is not None:
        X = np.asarray([x for _, _, x, _, _ in rows], dtype=float).reshape(-1, n)
        cols = [lyap.V(i).values(X) for i in range(1, lyap.n_modes + 1)]
        modes = [m for _, m, _, _, _ in rows]
        active = [cols[m - 1][k] for k, m in enumerate(modes)]
        header = ["t", "mode"] + [f"V{i}" for i in range(1, lyap.n_modes + 1)] + ["V_active"]
        body = [
            (rows[k][0], modes[k], *[float(c[k]) for c in cols], float(active[k])) for k in range(len(rows))
        ]
        write_csv(out / "lyapunov.csv", header, body)
        files["lyapunov"] = "lyapunov.csv"
    return files


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n")
