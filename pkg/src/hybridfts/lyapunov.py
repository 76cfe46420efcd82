"""Generalized Lyapunov functions and the finite-time decrease condition.

A :class:`LyapunovSet` holds one function per flow mode plus optional
per-mode constants ``(c, beta)`` for ``dV/dt <= -c V^beta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exprparse import Expr, compile_batch, compile_scalar, grad_numeric, parse, to_source
from .model import HybridTrajectory, segment_intervals

__all__ = [
    "QuadraticV",
    "ExprV",
    "LyapunovSet",
    "FlowDecreaseReport",
    "FTSConstants",
    "eval_V",
    "vdot_along",
    "check_flow_decrease",
    "estimate_fts_constants",
    "mode_samples",
    "DEFAULT_BETA_GRID",
    "decay_table",
    "decay_table_from_values",
    "decay_samples",
    "best_constants",
]

DEFAULT_BETA_GRID = tuple(np.round(np.arange(1, 20) * 0.05, 10))
C_THRESHOLD = 1e-6


class QuadraticV:
    """``V(x) = x' P x`` with ``P`` replaced by its symmetric part."""

    kind = "quadratic"

    def __init__(self, P):
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("P must be a square matrix")
        self.P_raw = P
        self.P = 0.5 * (P + P.T)
        self.n = P.shape[0]

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.P @ x)

    def values(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.einsum("ij,jk,ik->i", X, self.P, X)

    def gradient(self, x) -> np.ndarray:
        return 2.0 * self.P @ np.asarray(x, dtype=float)

    def gradients(self, X: np.ndarray) -> np.ndarray:
        return 2.0 * np.asarray(X, dtype=float) @ self.P

    def describe(self) -> str:
        return f"x'Px, P={self.P.tolist()}"


class ExprV:
    """Lyapunov function given as an expression; gradients by central differences.

    The difference step is ``h * max(||x||, 1e-300)`` when ``||x|| < 1`` so the
    relative accuracy does not collapse near the origin.
    """

    kind = "expr"

    def __init__(self, expr: Expr, n: int, h: float = 1e-6):
        self.expr = expr
        self.n = n
        self.h = h
        self._f = compile_scalar([expr])
        self._fb = None

    @classmethod
    def from_string(cls, source: str, n: int) -> "ExprV":
        return cls(parse(source, n), n)

    def __call__(self, x) -> float:
        return self._f([float(v) for v in x])[0]

    def values(self, X: np.ndarray) -> np.ndarray:
        if self._fb is None:
            self._fb = compile_batch([self.expr])
        return self._fb(np.asarray(X, dtype=float))[:, 0]

    def _step(self, norm):
        return self.h * np.clip(norm, 1e-300, 1.0)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return grad_numeric(self.expr, x, float(self._step(np.linalg.norm(x))))

    def gradients(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        h = self._step(np.linalg.norm(X, axis=1))
        G = np.empty_like(X)
        for k in range(X.shape[1]):
            Xp = X.copy()
            Xm = X.copy()
            Xp[:, k] += h
            Xm[:, k] -= h
            G[:, k] = (self.values(Xp) - self.values(Xm)) / (2.0 * h)
        return G

    def describe(self) -> str:
        return to_source(self.expr)

    def __getstate__(self):
        return {"expr": self.expr, "n": self.n, "h": self.h}

    def __setstate__(self, state):
        self.__init__(state["expr"], state["n"], state["h"])


@dataclass
class LyapunovSet:
    """One generalized Lyapunov function per flow mode (mode ``i`` is ``functions[i-1]``)."""

    functions: tuple
    constants: dict = field(default_factory=dict)  # mode -> (c, beta)
    check_grid: bool = True

    def __post_init__(self):
        self.functions = tuple(self.functions)
        self.constants = {int(k): (float(c), float(b)) for k, (c, b) in self.constants.items()}
        for mode, (c, b) in self.constants.items():
            if not c > 0 or not 0 < b < 1:
                raise ValueError(f"mode {mode}: need c > 0 and beta in (0, 1), got ({c}, {b})")
        if self.check_grid:
            problems = self.positive_definite_violations()
            if problems:
                raise ValueError("; ".join(problems))

    @property
    def n_modes(self) -> int:
        return len(self.functions)

    def V(self, mode: int):
        if not 1 <= mode <= len(self.functions):
            raise KeyError(f"no Lyapunov function for mode {mode}")
        return self.functions[mode - 1]

    def positive_definite_violations(self, radius: float = 2.0, points: int = 9) -> list[str]:
        out = []
        for i, V in enumerate(self.functions, start=1):
            n = V.n
            zero = np.zeros(n)
            if abs(V(zero)) > 1e-12:
                out.append(f"V{i}(0) = {V(zero):g} ≠ 0")
            axes = [np.linspace(-radius, radius, points)] * n if n <= 3 else None
            if axes is None:
                grid = np.random.default_rng(0).uniform(-radius, radius, (points**3, n))
            else:
                grid = np.stack(np.meshgrid(*axes), axis=-1).reshape(-1, n)
            grid = grid[np.linalg.norm(grid, axis=1) > 0]
            vals = V.values(grid)
            if np.any(vals <= 0):
                bad = grid[np.argmin(vals)]
                out.append(f"V{i} not positive at {bad.tolist()}")
        return out


def eval_V(lyap: LyapunovSet, mode: int, x) -> float:
    return lyap.V(mode)(x)


def vdot_along(lyap: LyapunovSet, mode: int, f, x) -> float:
    """Derivative of ``V_mode`` along the flow ``f`` at ``x``: ``grad V(x) . f(x)``."""
    V = lyap.V(mode)
    x = np.asarray(x, dtype=float)
    fx = np.asarray(f(list(x)), dtype=float)
    g = V.gradient(x)
    out = float(g @ fx)
    if not np.isfinite(out):
        raise ArithmeticError(f"non-finite derivative of V{mode} at {x.tolist()}")
    return out


def _vdot_batch(V, f, X: np.ndarray) -> np.ndarray:
    if hasattr(f, "batch"):
        FX = f.batch(X)
    else:
        FX = np.asarray([f(list(x)) for x in X], dtype=float)
    return np.einsum("ij,ij->i", V.gradients(X), FX)


def mode_samples(traj: HybridTrajectory, mode: int, origin_tol: float = 1e-9, bar_only: bool = False):
    """Samples of ``mode``'s segments, minus jump instants and near-origin states.

    With ``bar_only`` only the longest jump-free window of each activation is used.
    Returns ``(times, states)``.
    """
    jump_times = np.asarray([ev.t for ev in traj.jump_events])
    bars = segment_intervals(traj, mode)[2] if bar_only else None
    ts, xs = [], []
    k = 0
    for seg in traj.segments:
        if seg.mode != mode:
            continue
        keep = np.ones(len(seg.times), dtype=bool)
        if jump_times.size:
            keep &= ~np.isin(seg.times, jump_times)
        if bars is not None:
            if seg.t_end > seg.t_start:
                b = bars[k]
                k += 1
                keep &= (seg.times >= b.start) & (seg.times <= b.end)
        keep &= np.linalg.norm(seg.states, axis=1) > origin_tol
        ts.append(seg.times[keep])
        xs.append(seg.states[keep])
    if not ts:
        return np.empty(0), np.empty((0, traj.n))
    return np.concatenate(ts), np.concatenate(xs)


@dataclass
class FlowDecreaseReport:
    mode: int
    c: float
    beta: float
    passed: bool
    worst_residual: float
    worst_time: Optional[float]
    worst_state: Optional[list]
    n_samples: int
    no_data: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_flow_decrease(
    traj: HybridTrajectory,
    lyap: LyapunovSet,
    F: int,
    f,
    c: float,
    beta: float,
    tol: float = 1e-9,
    origin_tol: float = 1e-9,
) -> FlowDecreaseReport:
    """Largest ``dV_F/dt + c V_F^beta`` over the samples where mode ``F`` flows.

    Passes when that maximum is at most ``tol``. Jump instants and states with
    ``||x|| <= origin_tol`` are excluded.
    """
    times, X = mode_samples(traj, F, origin_tol)
    if times.size == 0:
        return FlowDecreaseReport(F, c, beta, True, float("-inf"), None, None, 0, no_data=True)
    V = lyap.V(F)
    r = _vdot_batch(V, f, X) + c * np.power(np.maximum(V.values(X), 0.0), beta)
    i = int(np.argmax(r))
    return FlowDecreaseReport(
        F, c, beta, bool(r[i] <= tol), float(r[i]), float(times[i]), X[i].tolist(), int(times.size)
    )


@dataclass
class FTSConstants:
    c: float
    beta: float
    table: dict  # beta -> c(beta)

    def to_dict(self) -> dict:
        return {"c": self.c, "beta": self.beta, "table": {str(k): v for k, v in self.table.items()}}


def decay_table(V, f, X: np.ndarray, beta_grid=DEFAULT_BETA_GRID) -> dict:
    """``c(beta) = min over samples of -dV/dt / V^beta`` for each beta."""
    return decay_table_from_values(_vdot_batch(V, f, X), V.values(X), beta_grid)


def decay_table_from_values(vdot: np.ndarray, vals: np.ndarray, beta_grid=DEFAULT_BETA_GRID) -> dict:
    pos = vals > 0
    out = {}
    for b in beta_grid:
        if not np.any(pos) or np.any(~pos & (vdot > 0)):
            out[float(b)] = float("-inf")
            continue
        out[float(b)] = float(np.min(-vdot[pos] / np.power(vals[pos], b)))
    return out


def decay_samples(traj: HybridTrajectory, lyap: LyapunovSet, mode: int, f, origin_tol: float = 1e-9):
    """``(dV/dt, V)`` at every mode sample used by the decrease check, as two arrays."""
    _, X = mode_samples(traj, mode, origin_tol)
    if X.shape[0] == 0:
        return np.empty(0), np.empty(0)
    V = lyap.V(mode)
    return _vdot_batch(V, f, X), V.values(X)


def best_constants(table: dict, threshold: float = C_THRESHOLD) -> Optional[FTSConstants]:
    """Pick the beta maximizing ``c(beta) * (1 - beta)``, the decay rate of ``V^(1-beta)``."""
    best = None
    for b, c in table.items():
        if not c > threshold:
            continue
        score = c * (1.0 - b)
        if best is None or score > best[0]:
            best = (score, b, c)
    if best is None:
        return None
    return FTSConstants(best[2], best[1], dict(table))


def estimate_fts_constants(
    traj: HybridTrajectory,
    lyap: LyapunovSet,
    F: int,
    f,
    beta_grid: Sequence[float] = DEFAULT_BETA_GRID,
    origin_tol: float = 1e-9,
) -> Optional[FTSConstants]:
    """Largest ``c`` for which ``dV_F/dt <= -c V_F^beta`` holds on every mode-F sample.

    Returns ``None`` when there are no samples or no beta gives ``c > 1e-6``.
    """
    _, X = mode_samples(traj, F, origin_tol)
    if X.shape[0] == 0:
        return None
    return best_constants(decay_table(lyap.V(F), f, X, beta_grid))
