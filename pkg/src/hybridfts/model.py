"""Hybrid system definitions, switching policies and the trajectory data model.

Modes and jump maps are numbered from 1, the way they are written on paper.
Every interval is half-open, ``[t_start, t_end)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .exprparse import Expr, compile_batch, compile_scalar, eval_expr, parse, to_source

__all__ = [
    "VectorField",
    "Guard",
    "PeriodicSchedule",
    "RandomSchedule",
    "PeriodicJumps",
    "JumpInstants",
    "StateTriggeredJumps",
    "SwitchingPolicy",
    "HybridSystemDef",
    "FlowSegment",
    "JumpEvent",
    "HybridTrajectory",
    "Interval",
    "validate_system",
    "segment_intervals",
    "check_min_dwell",
    "adt_count_check",
    "EQUILIBRIUM_TOL",
    "EVENT_MERGE_TOL",
]

EQUILIBRIUM_TOL = 1e-12
# Scheduled instants closer than this are one instant (k*0.1 vs j*0.2 round differently).
EVENT_MERGE_TOL = 1e-11


class VectorField:
    """A map R^n -> R^n given by one expression per component.

    Calling it uses a compiled closure; :meth:`batch` evaluates many states.
    Pickles as its expressions only.
    """

    def __init__(self, exprs: Sequence[Expr], n: int, name: str = ""):
        self.exprs = tuple(exprs)
        self.n = n
        self.name = name
        if len(self.exprs) != n:
            raise ValueError(f"{name or 'vector field'}: expected {n} components, got {len(self.exprs)}")
        self._f = compile_scalar(self.exprs)
        self._fb = None

    @classmethod
    def from_strings(cls, sources: Sequence[str], n: int, name: str = "") -> "VectorField":
        return cls([parse(s, n) for s in sources], n, name)

    def __call__(self, x):
        return self._f(x)

    def batch(self, X: np.ndarray) -> np.ndarray:
        if self._fb is None:
            self._fb = compile_batch(self.exprs)
        return self._fb(X)

    def sources(self) -> list[str]:
        return [to_source(e) for e in self.exprs]

    def __getstate__(self):
        return {"exprs": self.exprs, "n": self.n, "name": self.name}

    def __setstate__(self, state):
        self.__init__(state["exprs"], state["n"], state["name"])

    def __eq__(self, other):
        return isinstance(other, VectorField) and (self.exprs, self.n) == (other.exprs, other.n)

    def __hash__(self):
        return hash((self.exprs, self.n))

    def __repr__(self):
        return f"VectorField({self.name!r}, {self.sources()})"


class Guard:
    """State predicate ``expr(x) >= 0``."""

    def __init__(self, expr: Expr, n: int):
        self.expr = expr
        self.n = n
        self._f = compile_scalar([expr])

    @classmethod
    def from_string(cls, source: str, n: int) -> "Guard":
        return cls(parse(source, n), n)

    def __call__(self, x) -> bool:
        return self._f(x)[0] >= 0.0

    def source(self) -> str:
        return to_source(self.expr)

    def __getstate__(self):
        return {"expr": self.expr, "n": self.n}

    def __setstate__(self, state):
        self.__init__(state["expr"], state["n"])

    def __eq__(self, other):
        return isinstance(other, Guard) and (self.expr, self.n) == (other.expr, other.n)

    def __hash__(self):
        return hash((self.expr, self.n))


Flow = Callable[[Sequence[float]], Sequence[float]]
Predicate = Callable[[Sequence[float]], bool]


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class PeriodicSchedule:
    """Fixed sequence of ``(mode, duration)`` pairs, cycled when ``repeat``."""

    sequence: tuple
    repeat: bool = True

    def __post_init__(self):
        seq = tuple((int(m), float(d)) for m, d in self.sequence)
        object.__setattr__(self, "sequence", seq)
        if not seq:
            raise ValueError("mode schedule is empty")
        for m, d in seq:
            if not d > 0.0:
                raise ValueError(f"dwell duration for mode {m} must be > 0, got {d}")

    def switches(self, t0: float, t_end: float, seed: int = 0) -> list[tuple[float, int]]:
        offsets = np.concatenate([[0.0], np.cumsum([d for _, d in self.sequence])])
        cycle = offsets[-1]
        out = []
        c = 0
        while True:
            base = t0 + c * cycle
            for (mode, _), off in zip(self.sequence, offsets[:-1]):
                t = base + off
                if t >= t_end:
                    return out
                out.append((t, mode))
            c += 1
            if not self.repeat:
                end = t0 + cycle
                if end < t_end:
                    raise ScheduleExhausted(f"mode schedule ends at t={end} before t_end={t_end}")
                return out


@dataclass(frozen=True)
class RandomSchedule:
    """Seeded random mode sequence; each activation lasts ``dwell[mode]`` seconds.

    The next mode is drawn uniformly from the modes other than the current one.
    """

    dwell: tuple  # (mode, duration) pairs
    first_mode: Optional[int] = None

    def __post_init__(self):
        dwell = tuple((int(m), float(d)) for m, d in self.dwell)
        object.__setattr__(self, "dwell", dwell)
        if not dwell:
            raise ValueError("random schedule needs at least one mode")
        for m, d in dwell:
            if not d > 0.0:
                raise ValueError(f"dwell duration for mode {m} must be > 0, got {d}")

    def switches(self, t0: float, t_end: float, seed: int = 0) -> list[tuple[float, int]]:
        rng = np.random.default_rng(seed)
        modes = [m for m, _ in self.dwell]
        durations = dict(self.dwell)
        mode = self.first_mode if self.first_mode is not None else modes[int(rng.integers(len(modes)))]
        out = []
        t = t0
        while t < t_end:
            out.append((t, mode))
            t = t + durations[mode]
            others = [m for m in modes if m != mode] or modes
            mode = others[int(rng.integers(len(others)))]
        return out


@dataclass(frozen=True)
class PeriodicJumps:
    """Jump ``jump_index`` at ``t0 + offset + k*period``, k = 0, 1, ..."""

    period: float
    jump_index: int = 1
    offset: Optional[float] = None  # defaults to one period

    def __post_init__(self):
        if not self.period > 0.0:
            raise ValueError("jump period must be > 0")

    def instants(self, t0: float, t_end: float) -> list[tuple[float, int]]:
        out = []
        k = 0
        while True:
            if self.offset is None:
                t = t0 + (k + 1) * self.period
            else:
                t = t0 + self.offset + k * self.period
            if t >= t_end:
                return out
            if t >= t0:
                out.append((t, self.jump_index))
            k += 1


@dataclass(frozen=True)
class JumpInstants:
    times: tuple
    indices: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        indices = tuple(int(j) for j in self.indices) if self.indices else (1,) * len(times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "indices", indices)
        if len(times) != len(indices):
            raise ValueError("jump times and indices differ in length")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("scheduled jump instants must be strictly increasing")

    def instants(self, t0: float, t_end: float) -> list[tuple[float, int]]:
        return [(t, j) for t, j in zip(self.times, self.indices) if t0 <= t < t_end]


@dataclass(frozen=True)
class StateTriggeredJumps:
    """Jump ``jump_index`` whenever the state enters the jump set D.

    Only a transition from outside D into D triggers, so a post-jump state
    that is still in D does not jump again until it has left D.
    """

    jump_index: int = 1

    def instants(self, t0: float, t_end: float) -> list[tuple[float, int]]:
        return []


class ScheduleExhausted(RuntimeError):
    pass


ModeSchedule = Union[PeriodicSchedule, RandomSchedule]
JumpSchedule = Union[PeriodicJumps, JumpInstants, StateTriggeredJumps, None]


@dataclass(frozen=True)
class SwitchingPolicy:
    mode_schedule: ModeSchedule
    jump_schedule: JumpSchedule = None
    t_d: float = 0.1
    fts_mode: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.t_d > 0.0:
            raise ValueError("t_d must be > 0")

    def timeline(self, t0: float, t_end: float) -> list[tuple[float, Optional[int], tuple]]:
        """Merged event list ``(t, new_mode or None, jump indices)`` over ``[t0, t_end)``.

        A switch and a jump at the same instant share one entry; the switch is
        applied first.
        """
        switches = self.mode_schedule.switches(t0, t_end, self.seed)
        jumps = self.jump_schedule.instants(t0, t_end) if self.jump_schedule is not None else []
        events: list[list] = [[t, m, []] for t, m in switches]
        events.sort(key=lambda e: e[0])
        for t, j in jumps:
            k = int(np.searchsorted([e[0] for e in events], t))
            for cand in (k - 1, k):
                if 0 <= cand < len(events) and abs(events[cand][0] - t) <= EVENT_MERGE_TOL * max(1.0, abs(t)):
                    events[cand][2].append(j)
                    break
            else:
                events.insert(k, [t, None, [j]])
        return [(float(t), m, tuple(js)) for t, m, js in events]


# ---------------------------------------------------------------- system


@dataclass(frozen=True)
class HybridSystemDef:
    """Flows on C, jump maps on D, and the switching policy that orders them.

    ``flow_guard`` / ``jump_guard`` of ``None`` mean the whole state space.
    Assumption-style checks (equilibrium at the origin) are reported by
    :func:`validate_system` rather than raised here.
    """

    n: int
    flows: tuple
    jumps: tuple
    policy: SwitchingPolicy
    flow_guard: Optional[Predicate] = None
    jump_guard: Optional[Predicate] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(self, "jumps", tuple(self.jumps))
        if self.n < 1:
            raise ValueError("state dimension n must be >= 1")
        if len(self.flows) < 1:
            raise ValueError("at least one flow is required")
        probe = [0.5] * self.n
        for kind, maps in (("flow", self.flows), ("jump", self.jumps)):
            for i, f in enumerate(maps, start=1):
                try:
                    out = f(probe)
                except ArithmeticError:
                    continue
                if len(out) != self.n:
                    raise ValueError(f"{kind} {i} returns {len(out)} components, expected {self.n}")
        modes = _policy_modes(self.policy)
        bad = [m for m in modes if not 1 <= m <= len(self.flows)]
        if bad:
            raise ValueError(f"schedule references unknown modes {sorted(set(bad))}")
        if not 1 <= self.policy.fts_mode <= len(self.flows):
            raise ValueError(f"fts_mode {self.policy.fts_mode} out of range 1..{len(self.flows)}")
        for j in _policy_jump_indices(self.policy):
            if not 1 <= j <= len(self.jumps):
                raise ValueError(f"schedule references unknown jump map {j}")

    @property
    def n_flows(self) -> int:
        return len(self.flows)

    @property
    def n_jumps(self) -> int:
        return len(self.jumps)

    def with_policy(self, policy: SwitchingPolicy) -> "HybridSystemDef":
        return HybridSystemDef(
            self.n, self.flows, self.jumps, policy, self.flow_guard, self.jump_guard, self.name
        )


def _policy_modes(policy: SwitchingPolicy) -> list[int]:
    sched = policy.mode_schedule
    if isinstance(sched, PeriodicSchedule):
        return [m for m, _ in sched.sequence]
    modes = [m for m, _ in sched.dwell]
    if sched.first_mode is not None:
        modes.append(sched.first_mode)
    return modes


def _policy_jump_indices(policy: SwitchingPolicy) -> list[int]:
    js = policy.jump_schedule
    if js is None:
        return []
    if isinstance(js, JumpInstants):
        return list(js.indices)
    return [js.jump_index]


def validate_system(system: HybridSystemDef) -> list[str]:
    """Equilibrium violations: flows or jump maps that do not vanish at the origin.

    Returns an empty list when ``||f_i(0)|| <= 1e-12`` and ``||g_j(0)|| <= 1e-12``
    for every map.
    """
    zero = [0.0] * system.n
    out = []
    for kind, sym, maps in (("flow", "f", system.flows), ("jump", "g", system.jumps)):
        for i, f in enumerate(maps, start=1):
            try:
                v = np.asarray(f(zero), dtype=float)
            except ArithmeticError as err:
                out.append(f"{kind} {i}: {sym}{i}(0) cannot be evaluated ({err})")
                continue
            res = float(np.linalg.norm(v))
            if not res <= EQUILIBRIUM_TOL:
                shown = _fmt_vec(v)
                out.append(f"{kind} {i}: {sym}{i}(0) = {shown} ≠ 0 (residual {res:.3g})")
    return out


def _fmt_vec(v: np.ndarray) -> str:
    if v.size == 1:
        return f"{v[0]:g}"
    return "(" + ", ".join(f"{c:g}" for c in v) + ")"


# ---------------------------------------------------------------- trajectories


@dataclass(frozen=True)
class Interval:
    start: float
    end: float

    @property
    def length(self) -> float:
        return self.end - self.start

    def __iter__(self):
        yield self.start
        yield self.end


@dataclass(frozen=True, eq=False)
class FlowSegment:
    """One activation ``[t_start, t_end)`` of ``mode``.

    ``times``/``states`` hold the samples, including the left limit at
    ``t_end`` as the last row. A jump inside the segment appears as two rows
    with the same time: the pre-jump state followed by the post-jump state.
    """

    mode: int
    t_start: float
    t_end: float
    times: np.ndarray
    states: np.ndarray

    @property
    def interval(self) -> Interval:
        return Interval(self.t_start, self.t_end)


@dataclass(frozen=True, eq=False)
class JumpEvent:
    t: float
    jump_index: int
    x_before: np.ndarray
    x_after: np.ndarray
    active_mode: int


@dataclass(frozen=True, eq=False)
class HybridTrajectory:
    """Flow segments tiling ``[t0, t_final)`` plus the jump events between them.

    ``reason`` is ``"horizon"``, ``"converged"`` (norm reached ``origin_tol``)
    or ``"diverged"`` (norm reached ``max_norm``). A trajectory that starts at
    the origin has a single zero-length segment.
    """

    segments: tuple
    jump_events: tuple
    t0: float
    x0: np.ndarray
    reason: str = "horizon"

    @property
    def t_final(self) -> float:
        return self.segments[-1].t_end

    @property
    def x_final(self) -> np.ndarray:
        return self.segments[-1].states[-1]

    @property
    def n(self) -> int:
        return int(np.asarray(self.x0).size)

    def modes_present(self) -> set[int]:
        return {s.mode for s in self.segments}

    def samples(self):
        """All samples as ``(times, states, modes)`` with segment boundaries de-duplicated."""
        ts, xs, ms = [], [], []
        last = len(self.segments) - 1
        for k, seg in enumerate(self.segments):
            stop = len(seg.times) if k == last else len(seg.times) - 1
            ts.append(seg.times[:stop])
            xs.append(seg.states[:stop])
            ms.append(np.full(stop, seg.mode, dtype=int))
        return np.concatenate(ts), np.concatenate(xs), np.concatenate(ms)

    def check(self, jumps: Optional[Sequence[Flow]] = None, tol: float = 0.0) -> list[str]:
        """Structural invariant violations (tiling, jump placement, jump consistency)."""
        out = []
        segs = self.segments
        if not segs:
            return ["no segments"]
        if segs[0].t_start != self.t0:
            out.append("first segment does not start at t0")
        for k, (a, b) in enumerate(zip(segs, segs[1:])):
            if a.t_end != b.t_start:
                out.append(f"gap/overlap between segments {k} and {k + 1}")
        for k, s in enumerate(segs):
            if not s.t_end > s.t_start and not (k == len(segs) - 1 and self.reason != "horizon"):
                out.append(f"segment {k} has non-positive length")
            if np.any(np.diff(s.times) < 0):
                out.append(f"segment {k} samples out of order")
        for ev in self.jump_events:
            owners = [s for s in segs if s.t_start <= ev.t < s.t_end]
            if len(owners) != 1:
                out.append(f"jump at t={ev.t} lies in {len(owners)} segments")
            elif owners[0].mode != ev.active_mode:
                out.append(f"jump at t={ev.t} records mode {ev.active_mode}, segment has {owners[0].mode}")
            if jumps is not None:
                expect = np.asarray(jumps[ev.jump_index - 1](list(map(float, ev.x_before))), dtype=float)
                if np.linalg.norm(expect - ev.x_after) > tol:
                    out.append(f"jump at t={ev.t}: x_after != g{ev.jump_index}(x_before)")
        return out


# ---------------------------------------------------------------- interval bookkeeping


def _longest_jump_free(start: float, end: float, jumps: Sequence[float]) -> Interval:
    """Longest sub-interval of ``[start, end)`` with no jump in its interior; earliest on ties."""
    cuts = [start] + sorted(t for t in jumps if start < t < end) + [end]
    best = Interval(cuts[0], cuts[1])
    for a, b in zip(cuts[1:], cuts[2:]):
        if b - a > best.length + EVENT_MERGE_TOL * max(1.0, abs(end)):
            best = Interval(a, b)
    return best


def segment_intervals(traj: HybridTrajectory, mode: int, n_modes: Optional[int] = None):
    """Activation intervals of ``mode``, the jumps inside them, and their jump-free windows.

    Returns ``(T_list, J_set, barT_list)``: the intervals ``[t_start, t_end)`` in
    order, the sorted jump instants falling in them, and per interval the
    longest connected sub-interval without a jump in its interior.
    """
    if n_modes is not None and not 1 <= mode <= n_modes:
        raise IndexError(f"mode {mode} out of range 1..{n_modes}")
    if mode < 1:
        raise IndexError(f"mode {mode} out of range")
    T_list, J_set, bar_list = [], [], []
    for seg in traj.segments:
        if seg.mode != mode or not seg.t_end > seg.t_start:
            continue
        inside = [ev.t for ev in traj.jump_events if seg.t_start <= ev.t < seg.t_end]
        T_list.append(seg.interval)
        J_set.extend(inside)
        bar_list.append(_longest_jump_free(seg.t_start, seg.t_end, inside))
    return T_list, sorted(J_set), bar_list


def check_min_dwell(bar_lengths_or_traj, F: int = 1, t_d: float = 0.1, rel_tol: float = 1e-9) -> bool:
    """True iff every jump-free window of mode ``F`` lasts at least ``t_d``.

    Accepts a trajectory or an explicit sequence of window lengths. The final
    window of a trajectory cut short by the horizon or by convergence is
    exempt, since it was not allowed to finish.
    """
    if isinstance(bar_lengths_or_traj, HybridTrajectory):
        traj = bar_lengths_or_traj
        _, _, bars = segment_intervals(traj, F)
        lengths = [b.length for b in bars]
        if bars and bars[-1].end == traj.t_final:
            lengths = lengths[:-1]
    else:
        lengths = list(bar_lengths_or_traj)
    return all(L >= t_d * (1.0 - rel_tol) for L in lengths)


def adt_count_check(jump_times_or_traj, N0: int, delta: float) -> bool:
    """Average-dwell-time test: ``N([t1, t2]) <= N0 + delta*(t2 - t1)`` for all windows.

    Only windows whose endpoints are jump instants need checking: the count is
    piecewise constant and the bound grows with the window.
    """
    if N0 < 1 or delta < 0:
        raise ValueError("need N0 >= 1 and delta >= 0")
    if isinstance(jump_times_or_traj, HybridTrajectory):
        times = [ev.t for ev in jump_times_or_traj.jump_events]
    else:
        times = list(jump_times_or_traj)
    times = np.sort(np.asarray(times, dtype=float))
    m = len(times)
    for i in range(m):
        # closed window [times[i], times[j]] holds j - i + 1 jumps
        count = np.arange(1, m - i + 1)
        span = times[i:] - times[i]
        if np.any(count > N0 + delta * span + 1e-12 * (1.0 + delta * span)):
            return False
    return True
