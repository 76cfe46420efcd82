"""Event-driven simulation of hybrid systems.

Flows are integrated with classical fixed-step RK4 on a grid anchored at the
previous event; the last step before a scheduled switch or jump is shortened
so the event lands exactly. State-triggered jumps are located by bisection.

Signed-power vector fields are not Lipschitz at the origin and a fixed step
makes them chatter at a level that scales like ``(c*dt)^(1/(1-e))``, or
settle on a spurious fixed point where the RK4 stages cancel. A sub-step is
therefore halved while any stage increment ``h*k_i`` exceeds ``refine_ratio``
times ``max(|x_c|, 1e-6*||x||)`` in some component, and the step doubles
again once accepted. Lipschitz flows at the default step rarely trigger this;
finite-time-convergent flows are followed down to ``origin_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .model import (
    FlowSegment,
    HybridSystemDef,
    HybridTrajectory,
    JumpEvent,
    StateTriggeredJumps,
    validate_system,
)

__all__ = [
    "IntegrationConfig",
    "SimulationError",
    "GuardError",
    "rk4_step",
    "simulate",
    "locate_guard_crossing",
    "settling_time",
]


class SimulationError(RuntimeError):
    """Non-finite state, exhausted schedule, or a state leaving the flow set."""

    def __init__(self, message: str, t: Optional[float] = None, mode: Optional[int] = None):
        where = ""
        if t is not None:
            where = f" (t={t:.9g}" + (f", mode {mode})" if mode is not None else ")")
        super().__init__(message + where)
        self.t = t
        self.mode = mode


class GuardError(ValueError):
    """The predicate has the same value at both ends of the bracket."""


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float = 1e-4
    t_end: float = 20.0
    guard_tol: float = 1e-9
    origin_tol: float = 1e-9
    max_norm: float = 1e9
    t0: float = 0.0
    refine_ratio: float = 0.5
    max_refine: int = 40

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        if not 0 < self.guard_tol <= self.dt:
            raise ValueError("need 0 < guard_tol <= dt")
        if not self.origin_tol > 0:
            raise ValueError("origin_tol must be > 0")
        if not self.max_norm > self.origin_tol:
            raise ValueError("max_norm must exceed origin_tol")

    def replace(self, **changes) -> "IntegrationConfig":
        fields = dict(self.__dict__)
        fields.update({k: v for k, v in changes.items() if v is not None})
        return IntegrationConfig(**fields)


def rk4_step(f, x: Sequence[float], h: float) -> list[float]:
    """One classical Runge-Kutta step of size ``h`` for ``x' = f(x)``."""
    h2 = 0.5 * h
    k1 = f(x)
    k2 = f([a + h2 * b for a, b in zip(x, k1)])
    k3 = f([a + h2 * b for a, b in zip(x, k2)])
    k4 = f([a + h * b for a, b in zip(x, k3)])
    h6 = h / 6.0
    return [a + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)]


def _norm(x) -> float:
    return math.hypot(*x)


def _rk4_guarded(f, x, h: float, kappa: float, nrm: float):
    """RK4 step, or ``None`` when some stage would move a component too far.

    Every stage increment ``h*k_i`` must stay within ``kappa`` times the
    component's size, floored at ``1e-6 * ||x||`` so components passing
    through zero on a smooth flow do not force tiny steps. Checking the stages
    rather than the net step matters for non-Lipschitz flows, where
    overshooting stages can cancel and leave a spurious fixed point.
    """
    floor = _REL_FLOOR * nrm
    # bound on |k_i| per component
    lim = [kappa * (a if a > floor else (-a if -a > floor else floor)) / h for a in x]
    h2 = 0.5 * h
    k1 = f(x)
    for v, m in zip(k1, lim):
        if v > m or -v > m:
            return None
    k2 = f([a + h2 * b for a, b in zip(x, k1)])
    for v, m in zip(k2, lim):
        if v > m or -v > m:
            return None
    k3 = f([a + h2 * b for a, b in zip(x, k2)])
    for v, m in zip(k3, lim):
        if v > m or -v > m:
            return None
    k4 = f([a + h * b for a, b in zip(x, k3)])
    for v, m in zip(k4, lim):
        if v > m or -v > m:
            return None
    h6 = h / 6.0
    return [a + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)]


_REL_FLOOR = 1e-6


def _finite(x) -> bool:
    return all(math.isfinite(v) for v in x)


def locate_guard_crossing(f, predicate, t_lo: float, t_hi: float, x_lo, x_hi=None, tol: float = 1e-9):
    """Time at which ``predicate`` first changes value on ``[t_lo, t_hi]``.

    The state at a trial time is one RK4 step of the flow from ``x_lo``. Bisection
    stops once the bracket is no wider than ``tol``; the returned time is the
    right end, where the predicate already holds its new value.
    """
    x_lo = [float(v) for v in x_lo]
    if x_hi is None:
        x_hi = rk4_step(f, x_lo, t_hi - t_lo)
    p_lo = bool(predicate(x_lo))
    if bool(predicate(list(x_hi))) == p_lo:
        raise GuardError("predicate does not change over the bracket")
    lo, hi = t_lo, t_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if bool(predicate(rk4_step(f, x_lo, mid - t_lo))) == p_lo:
            lo = mid
        else:
            hi = mid
    return hi


class _Recorder:
    def __init__(self, mode: int, t: float, x):
        self.mode = mode
        self.t_start = t
        self.times = [t]
        self.states = [list(x)]

    def add(self, t: float, x):
        self.times.append(t)
        self.states.append(list(x))

    def close(self, t_end: float) -> FlowSegment:
        return FlowSegment(
            self.mode,
            self.t_start,
            t_end,
            np.asarray(self.times, dtype=float),
            np.asarray(self.states, dtype=float),
        )


def simulate(system: HybridSystemDef, x0: Sequence[float], cfg: IntegrationConfig = IntegrationConfig()) -> HybridTrajectory:
    """Simulate ``system`` from ``x0`` over ``[cfg.t0, cfg.t_end)``.

    Stops early when ``||x|| <= origin_tol`` (reason ``"converged"``) or
    ``||x|| >= max_norm`` (``"diverged"``). At an instant carrying both a
    switch and a jump the switch is applied first, so the jump belongs to the
    new mode's segment.
    """
    violations = validate_system(system)
    if violations:
        raise ValueError("system violates the equilibrium assumption: " + "; ".join(violations))
    x = [float(v) for v in x0]
    if len(x) != system.n:
        raise ValueError(f"x0 has {len(x)} components, system has n={system.n}")
    if not _finite(x):
        raise SimulationError("non-finite initial state", cfg.t0)
    x0_arr = np.asarray(x, dtype=float)

    policy = system.policy
    try:
        timeline = policy.timeline(cfg.t0, cfg.t_end)
    except RuntimeError as err:
        raise SimulationError(str(err)) from None
    if not timeline or timeline[0][1] is None or timeline[0][0] > cfg.t0:
        raise SimulationError("mode schedule does not define a mode at t0", cfg.t0)

    state_jump = policy.jump_schedule if isinstance(policy.jump_schedule, StateTriggeredJumps) else None
    guard_D = system.jump_guard
    guard_C = system.flow_guard
    if state_jump is not None and guard_D is None:
        raise ValueError("state-triggered jumps need a jump_guard")

    segments: list[FlowSegment] = []
    jumps: list[JumpEvent] = []
    mode = timeline[0][1]
    rec = _Recorder(mode, cfg.t0, x)

    def finish(t_end: float, reason: str) -> HybridTrajectory:
        segments.append(rec.close(t_end))
        return HybridTrajectory(tuple(segments), tuple(jumps), cfg.t0, x0_arr, reason)

    def apply_jump(t: float, j: int):
        nonlocal x
        before = list(x)
        after = [float(v) for v in system.jumps[j - 1](before)]
        if not _finite(after):
            raise SimulationError(f"jump {j} produced a non-finite state", t, mode)
        jumps.append(JumpEvent(t, j, np.asarray(before), np.asarray(after), mode))
        rec.add(t, after)
        x = after

    def status() -> Optional[str]:
        nrm = _norm(x)
        if nrm <= cfg.origin_tol:
            return "converged"
        if nrm >= cfg.max_norm:
            return "diverged"
        return None

    if status() == "converged":
        return finish(cfg.t0, "converged")

    armed = state_jump is not None and not guard_D(x)
    kappa = cfg.refine_ratio
    origin_tol, max_norm = cfg.origin_tol, cfg.max_norm
    h_min = cfg.dt * 2.0 ** -cfg.max_refine

    for k, (t_ev, new_mode, jump_ids) in enumerate(timeline):
        # the event at t_ev: switch first, then jumps
        if new_mode is not None and k > 0:
            segments.append(rec.close(t_ev))
            mode = new_mode
            rec = _Recorder(mode, t_ev, x)
        for j in jump_ids:
            apply_jump(t_ev, j)
        st = status()
        if st is not None:
            return finish(t_ev, st)
        if state_jump is not None:
            armed = not guard_D(x)
        nrm = _norm(x)

        t_next = timeline[k + 1][0] if k + 1 < len(timeline) else cfg.t_end
        f = system.flows[mode - 1]
        f = getattr(f, "_f", f)  # skip the VectorField call layer in the hot loop
        span = t_next - t_ev
        n_steps = max(1, math.ceil(span / cfg.dt - 1e-9))
        t = t_ev
        for step in range(1, n_steps + 1):
            t_grid = t_next if step == n_steps else t_ev + step * cfg.dt
            # refined sub-steps across [t, t_grid]
            h_try = t_grid - t
            while t < t_grid:
                h = min(h_try, t_grid - t)
                try:
                    xn = _rk4_guarded(f, x, h, kappa, nrm) if h > h_min else rk4_step(f, x, h)
                    if xn is None:
                        h_try = 0.5 * h
                        continue
                except ArithmeticError as err:
                    raise SimulationError(f"flow evaluation failed: {err}", t, mode) from None
                nrm_new = _norm(xn)
                if not math.isfinite(nrm_new):
                    raise SimulationError("non-finite state", t + h, mode)
                t_new = t_grid if h >= t_grid - t else t + h
                h_try = 2.0 * h

                if state_jump is not None:
                    inside = guard_D(xn)
                    if armed and inside:
                        tc = locate_guard_crossing(f, guard_D, t, t_new, x, xn, cfg.guard_tol)
                        xc = rk4_step(f, x, tc - t) if tc > t else list(x)
                        x = xc
                        if tc > t:
                            rec.add(tc, x)
                        apply_jump(tc, state_jump.jump_index)
                        nrm = _norm(x)
                        st = status()
                        if st is not None:
                            return finish(tc, st)
                        armed = not guard_D(x)
                        t = tc
                        h_try = t_grid - t
                        continue
                    if not inside:
                        armed = True

                x = xn
                t = t_new
                nrm = nrm_new
                if guard_C is not None and not guard_C(x):
                    raise SimulationError("state left the flow set C", t, mode)
                if nrm <= origin_tol or nrm >= max_norm:
                    rec.add(t, x)
                    return finish(t, status())
            rec.add(t, x)
    return finish(cfg.t_end, "horizon")


def settling_time(traj: HybridTrajectory, tol: float) -> Optional[float]:
    """First time after which every remaining sample has ``||x|| <= tol``.

    ``None`` when the final state is above ``tol``.
    """
    times, states, _ = traj.samples()
    norms = np.linalg.norm(states, axis=1)
    if norms[-1] > tol:
        return None
    above = np.nonzero(norms > tol)[0]
    if above.size == 0:
        return float(times[0])
    i = above[-1]
    # crossing between sample i (above) and i+1 (below), linear in the norm
    t_a, t_b = times[i], times[i + 1]
    n_a, n_b = norms[i], norms[i + 1]
    if t_b > t_a and n_a > n_b:
        return float(t_a + (n_a - tol) / (n_a - n_b) * (t_b - t_a))
    return float(t_b)
