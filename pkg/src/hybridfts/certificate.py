"""Numerical evidence for finite-time stability with multiple Lyapunov functions.

The checks here read a simulated :class:`~hybridfts.model.HybridTrajectory`
(or a sweep of them) and produce:

* cumulative condition sums at switches, along flows, at jumps and across the
  switched-off gaps of the finite-time mode, with running partial-sum maxima;
* non-decreasing majorants of those sums against ``||x0||`` (class-GK evidence);
* the accumulated activation time the finite-time mode needs (the budget);
* a verdict, always labelled as evidence and never as proof.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lyapunov import LyapunovSet, best_constants
from .model import HybridTrajectory, segment_intervals

__all__ = [
    "ConditionSums",
    "condition_sums",
    "telescoping_residual",
    "Window",
    "bar_windows",
    "full_windows",
    "GKEnvelope",
    "fit_gk_envelope",
    "Lemma1Report",
    "lemma1_oracle",
    "random_lemma1_cases",
    "ActivationBudget",
    "activation_budget",
    "budget_from_windows",
    "window_decay_table",
    "ConditionCheck",
    "CertificateReport",
    "theorem2_verdict",
    "theorem3_verdict",
    "FTS_EVIDENCE",
    "INCONCLUSIVE",
    "VIOLATED",
]

FTS_EVIDENCE = "FTS-evidence"
INCONCLUSIVE = "inconclusive"
VIOLATED = "violated"


def _max_partial(terms: Sequence[float]) -> float:
    if len(terms) == 0:
        return 0.0
    return float(np.max(np.cumsum(terms)))


# ---------------------------------------------------------------- windows


@dataclass(frozen=True)
class Window:
    """A stretch of flow in one mode with the Lyapunov values at its ends."""

    start: float
    end: float
    v_start: float
    v_end: float

    @property
    def length(self) -> float:
        return self.end - self.start


def _value_at_start(seg, t: float) -> np.ndarray:
    # last row at time t: the post-jump state when a jump happens at t
    i = int(np.searchsorted(seg.times, t, side="right")) - 1
    return seg.states[max(i, 0)]


def _value_at_end(seg, t: float) -> np.ndarray:
    # first row at time t: the left limit, before any jump at t
    i = int(np.searchsorted(seg.times, t, side="left"))
    return seg.states[min(i, len(seg.times) - 1)]


def bar_windows(traj: HybridTrajectory, lyap: LyapunovSet, mode: int) -> list[Window]:
    """The longest jump-free window of each activation of ``mode``, with ``V_mode`` at its ends."""
    V = lyap.V(mode)
    segs = [s for s in traj.segments if s.mode == mode and s.t_end > s.t_start]
    _, _, bars = segment_intervals(traj, mode)
    return [
        Window(b.start, b.end, V(_value_at_start(s, b.start)), V(_value_at_end(s, b.end)))
        for s, b in zip(segs, bars)
    ]


def full_windows(traj: HybridTrajectory, lyap: LyapunovSet, mode: int) -> list[Window]:
    """Whole activation intervals of ``mode``; the start value is taken before any jump there."""
    V = lyap.V(mode)
    return [
        Window(s.t_start, s.t_end, V(s.states[0]), V(s.states[-1]))
        for s in traj.segments
        if s.mode == mode and s.t_end > s.t_start
    ]


def _gap_terms(windows: Sequence[Window]) -> np.ndarray:
    return np.asarray([abs(b.v_start - a.v_end) for a, b in zip(windows, windows[1:])], dtype=float)


# ---------------------------------------------------------------- condition sums


@dataclass
class ConditionSums:
    """Per-event terms of the four cumulative conditions.

    ``s1``: Lyapunov value change at each switch (new mode minus old mode).
    ``s2``: change of the active mode's function along each segment's flow,
    jumps excluded. ``s3``: per mode, the change across each jump while that
    mode was active. ``s5``: per mode, ``|V(start of next window) - V(end of
    window)|`` across switched-off gaps, using jump-free windows; ``s5_full``
    is the same over whole activation intervals.
    """

    s1: np.ndarray
    s2: np.ndarray
    s3: dict
    s5: dict
    s5_full: dict
    v_initial: float
    v_final: float

    @property
    def s1_max(self) -> float:
        return _max_partial(self.s1)

    @property
    def s2_max(self) -> float:
        return _max_partial(self.s2)

    def s3_max(self, mode: Optional[int] = None) -> float:
        if mode is not None:
            return _max_partial(self.s3.get(mode, ()))
        return max([_max_partial(t) for t in self.s3.values()] or [0.0])

    def s5_max(self, mode: int, full: bool = False) -> float:
        src = self.s5_full if full else self.s5
        return _max_partial(src.get(mode, ()))

    @property
    def jump_total(self) -> float:
        return float(sum(np.sum(t) for t in self.s3.values()))

    def partial_sums(self) -> dict:
        out = {"s1": np.cumsum(self.s1).tolist(), "s2": np.cumsum(self.s2).tolist()}
        out["s3"] = {str(m): np.cumsum(t).tolist() for m, t in self.s3.items()}
        out["s5"] = {str(m): np.cumsum(t).tolist() for m, t in self.s5.items()}
        return out


def condition_sums(traj: HybridTrajectory, lyap: LyapunovSet, F: Optional[int] = None) -> ConditionSums:
    """Evaluate the switch, flow, jump and gap terms on the exact event sequence.

    Values at switches, jumps and window ends come from the stored event
    samples, not from interpolation. ``F`` is accepted for symmetry with the
    other checks; gap terms are produced for every mode.
    """
    segs = traj.segments
    for s in segs:
        lyap.V(s.mode)  # KeyError for a mode without a function

    s1 = []
    for prev, seg in zip(segs, segs[1:]):
        x = seg.states[0]
        s1.append(lyap.V(seg.mode)(x) - lyap.V(prev.mode)(x))

    s2 = []
    for seg in segs:
        V = lyap.V(seg.mode)
        vals = V.values(seg.states)
        jump_pairs = np.nonzero(np.diff(seg.times) == 0.0)[0]
        total = vals[-1] - vals[0]
        if jump_pairs.size:
            total -= float(np.sum(vals[jump_pairs + 1] - vals[jump_pairs]))
        s2.append(float(total))

    s3: dict = {}
    for ev in traj.jump_events:
        V = lyap.V(ev.active_mode)
        s3.setdefault(ev.active_mode, []).append(V(ev.x_after) - V(ev.x_before))
    s3 = {m: np.asarray(v, dtype=float) for m, v in s3.items()}

    modes = sorted(traj.modes_present())
    s5 = {m: _gap_terms(bar_windows(traj, lyap, m)) for m in modes}
    s5_full = {m: _gap_terms(full_windows(traj, lyap, m)) for m in modes}

    v_initial = lyap.V(segs[0].mode)(segs[0].states[0])
    v_final = lyap.V(segs[-1].mode)(segs[-1].states[-1])
    return ConditionSums(
        np.asarray(s1, dtype=float), np.asarray(s2, dtype=float), s3, s5, s5_full, v_initial, v_final
    )


def telescoping_residual(sums: ConditionSums) -> float:
    """Relative mismatch between the final Lyapunov value and initial value plus the three sums."""
    rebuilt = sums.v_initial + float(np.sum(sums.s1)) + float(np.sum(sums.s2)) + sums.jump_total
    scale = max(abs(sums.v_final), abs(sums.v_initial), 1e-300)
    return abs(rebuilt - sums.v_final) / scale


# ---------------------------------------------------------------- GK envelope


@dataclass
class GKEnvelope:
    """Smallest non-decreasing majorant of (radius, value) samples."""

    radii: np.ndarray
    values: np.ndarray  # per-radius maxima, clamped at 0
    envelope: np.ndarray
    samples: list
    origin_value: float
    rel_tol: float
    abs_tol: float

    @property
    def top_value(self) -> float:
        return float(self.envelope[-1])

    @property
    def passed(self) -> bool:
        return self.origin_value <= self.rel_tol * self.top_value + self.abs_tol

    def __call__(self, r: float) -> float:
        i = int(np.searchsorted(self.radii, r, side="left"))
        return float(self.envelope[min(i, len(self.envelope) - 1)])

    def table(self) -> list[dict]:
        return [
            {"radius": float(r), "sample_max": float(v), "envelope": float(e)}
            for r, v, e in zip(self.radii, self.values, self.envelope)
        ]

    def to_dict(self) -> dict:
        return {
            "origin_value": self.origin_value,
            "top_value": self.top_value,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "passed": self.passed,
            "table": self.table(),
        }


def fit_gk_envelope(samples, rel_tol: float = 1e-2, abs_tol: float = 1e-9) -> GKEnvelope:
    """Fit the non-decreasing majorant of ``(radius, value)`` pairs.

    Values are first reduced to their maximum per radius and clamped at zero
    (a non-positive cumulative sum is trivially bounded). The envelope passes
    when its value at the smallest radius is at most ``rel_tol`` times its
    value at the largest radius, plus ``abs_tol``.
    """
    pairs = [(float(r), float(v)) for r, v in samples]
    radii = np.unique([r for r, _ in pairs])
    if radii.size < 3:
        raise ValueError(f"need at least 3 distinct radii, got {radii.size}")
    per_radius = np.full(radii.size, -np.inf)
    for r, v in pairs:
        i = int(np.searchsorted(radii, r))
        per_radius[i] = max(per_radius[i], v)
    per_radius = np.maximum(per_radius, 0.0)
    env = np.maximum.accumulate(per_radius)
    return GKEnvelope(radii, per_radius, env, pairs, float(env[0]), rel_tol, abs_tol)


# ---------------------------------------------------------------- Lemma 1 oracle


@dataclass
class Lemma1Report:
    """Slack of each inequality (right side minus left side, divided by ``max(1, |right|)``)."""

    r: float
    power_sum_lower: float
    power_sum_upper: float
    pairwise_min: float
    chain: list
    hypothesis_ok: bool
    m: int

    @property
    def min_slack(self) -> float:
        return min([self.power_sum_lower, self.power_sum_upper, self.pairwise_min] + self.chain)

    def holds(self, tol: float = 1e-12) -> bool:
        return self.min_slack >= -tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d["min_slack"] = self.min_slack
        return d


def _slack(lhs: float, rhs: float) -> float:
    return (rhs - lhs) / max(1.0, abs(rhs))


def lemma1_oracle(a, b, r: float, bound: Optional[float] = None) -> Lemma1Report:
    """Check the power-sum inequalities behind the gap-sum lemma on concrete data.

    With ``z = |a - b|`` and ``M = len(z)``:

    1. ``(sum z)^r <= sum z^r <= M^(1-r) (sum z)^r``
    2. ``a^r - b^r <= (a - b)^r`` for every pair with ``a >= b``
    3. ``sum (a^r - b^r) <= sum_I1 (a^r - b^r) <= sum_I1 (a-b)^r
       <= m^(1-r) (sum_I1 |a-b|)^r <= m^(1-r) (sum |a-b|)^r <= m^(1-r) bound^r``

    where ``I1`` are the pairs with ``a >= b`` and ``m = |I1|``. ``bound``
    defaults to ``sum |a - b|``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-D sequences of equal length")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("a and b must be non-negative")
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    z = np.abs(a - b)
    M = z.size
    total = float(np.sum(z))
    if bound is None:
        bound = total
    sum_pow = float(np.sum(z**r))
    lower = _slack(total**r, sum_pow)
    upper = _slack(sum_pow, (M ** (1 - r)) * total**r if M else 0.0)

    I1 = a >= b
    m = int(np.count_nonzero(I1))
    pair_slacks = [_slack(x**r - y**r, (x - y) ** r) for x, y in zip(a[I1], b[I1])]
    pairwise_min = min(pair_slacks) if pair_slacks else 0.0

    diffs = a**r - b**r
    lhs0 = float(np.sum(diffs))
    lhs1 = float(np.sum(diffs[I1]))
    lhs2 = float(np.sum((a[I1] - b[I1]) ** r))
    mfac = m ** (1 - r) if m else 0.0
    lhs3 = mfac * float(np.sum(z[I1])) ** r
    lhs4 = mfac * total**r
    lhs5 = mfac * float(bound) ** r
    chain = [_slack(lhs0, lhs1), _slack(lhs1, lhs2), _slack(lhs2, lhs3), _slack(lhs3, lhs4), _slack(lhs4, lhs5)]
    return Lemma1Report(float(r), lower, upper, pairwise_min, chain, total <= bound * (1 + 1e-12), m)


# ---------------------------------------------------------------- activation budget


@dataclass
class ActivationBudget:
    budget: float
    achieved: float
    predicted_end: float
    n_windows: int
    c: float
    beta: float

    @property
    def met(self) -> bool:
        return self.achieved >= self.budget

    def to_dict(self) -> dict:
        d = asdict(self)
        d["met"] = self.met
        return d


def budget_from_windows(windows: Sequence[Window], c: float, beta: float) -> ActivationBudget:
    """Activation time the finite-time mode needs, from observed window boundary values.

    ``budget = V1^(1-beta)/(c(1-beta)) + sum_k max(0, start_{k+1}^(1-beta) - end_k^(1-beta))/(c(1-beta))``.
    ``predicted_end`` chains the comparison bound ``end^(1-beta) <= start^(1-beta) - c(1-beta)|T|``
    through the windows, adding each observed gap increase, and is floored at 0.
    """
    if not c > 0:
        raise ValueError("c must be > 0")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    q = 1.0 - beta
    rate = c * q
    if not windows:
        return ActivationBudget(0.0, 0.0, 0.0, 0, c, beta)
    budget = windows[0].v_start**q / rate
    for prev, nxt in zip(windows, windows[1:]):
        budget += max(0.0, nxt.v_start**q - prev.v_end**q) / rate
    achieved = float(sum(w.length for w in windows))
    w = windows[0].v_start**q
    for k, win in enumerate(windows):
        if k > 0:
            w += max(0.0, win.v_start**q - windows[k - 1].v_end**q)
        w = max(0.0, w - rate * win.length)
    return ActivationBudget(float(budget), achieved, float(w ** (1.0 / q)), len(windows), c, beta)


def activation_budget(traj: HybridTrajectory, lyap: LyapunovSet, F: int, c: float, beta: float) -> ActivationBudget:
    return budget_from_windows(bar_windows(traj, lyap, F), c, beta)


def window_decay_table(windows: Sequence[Window], beta_grid, min_value: float = 0.0) -> dict:
    """Per beta, the largest ``c`` with ``end^(1-b) <= start^(1-b) - c(1-b)|T|`` on every window.

    This is the integrated (comparison-lemma) form of the decrease condition.
    Windows starting at or below ``min_value`` carry no information and are skipped.
    """
    usable = [w for w in windows if w.v_start > min_value and w.length > 0]
    out = {}
    for b in beta_grid:
        q = 1.0 - b
        if not usable:
            out[float(b)] = float("-inf")
            continue
        out[float(b)] = float(
            min((w.v_start**q - max(w.v_end, 0.0) ** q) / (q * w.length) for w in usable)
        )
    return out


# ---------------------------------------------------------------- verdicts


@dataclass
class ConditionCheck:
    name: str
    passed: bool
    worst_residual: Optional[float] = None
    evidence: dict = field(default_factory=dict)
    note: str = ""
    # failure that is evidence against the condition, not just missing data
    hard_failure: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "worst_residual": self.worst_residual,
            "evidence": self.evidence,
            "note": self.note,
        }


@dataclass
class CertificateReport:
    theorem: str
    verdict: str
    checks: list
    notes: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    trajectories: list = field(default_factory=list)

    def check(self, name: str) -> ConditionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "verdict": self.verdict,
            "label": "numerical evidence over a finite sweep, not a proof",
            "conditions": [c.to_dict() for c in self.checks],
            "constants": self.constants,
            "notes": list(self.notes),
            "trajectories": self.trajectories,
        }

    def summary(self) -> str:
        lines = [f"{self.theorem}: {self.verdict}"]
        for c in self.checks:
            res = "" if c.worst_residual is None else f"  worst={c.worst_residual:.6g}"
            lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}{res}  {c.note}".rstrip())
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def _envelope_check(name: str, samples, rel_tol: float, abs_tol: float) -> ConditionCheck:
    try:
        env = fit_gk_envelope(samples, rel_tol, abs_tol)
    except ValueError as err:
        return ConditionCheck(name, False, None, {}, f"insufficient data: {err}")
    resid = env.origin_value - (env.rel_tol * env.top_value + env.abs_tol)
    return ConditionCheck(name, env.passed, resid, env.to_dict(), "", hard_failure=not env.passed)


def _pool_tables(tables: Sequence[dict]) -> dict:
    pooled: dict = {}
    for t in tables:
        for b, c in t.items():
            pooled[b] = min(pooled.get(b, math.inf), c)
    return pooled


def _resolve_constants(evals, lyap: LyapunovSet, mode: int, window_form: bool = True):
    """Constants for ``mode``: given, else pooled pointwise estimate, else pooled window estimate.

    Returns ``(c, beta, form, source)`` or ``None``.
    """
    if mode in lyap.constants:
        c, b = lyap.constants[mode]
        return c, b, "pointwise", "given"
    tables = [e.decay_tables[mode] for e in evals if mode in e.decay_tables]
    if tables:
        est = best_constants(_pool_tables(tables))
        if est is not None:
            return est.c, est.beta, "pointwise", "estimated"
    if window_form:
        wt = [e.window_tables[mode] for e in evals if mode in e.window_tables]
        if wt:
            est = best_constants(_pool_tables(wt))
            if est is not None:
                return est.c, est.beta, "window", "estimated"
    return None


def _decrease_check(evals, lyap, mode: int, tol: float, window_form: bool = True) -> tuple:
    name = f"(iv) flow decrease, mode {mode}"
    have_data = any(mode in e.decay and e.decay[mode][0].size for e in evals)
    if not have_data:
        return ConditionCheck(name, False, None, {}, f"no samples of mode {mode}"), None
    resolved = _resolve_constants(evals, lyap, mode, window_form)
    if resolved is None:
        return (
            ConditionCheck(name, False, None, {}, "no c > 1e-6 for any beta", hard_failure=True),
            None,
        )
    c, beta, form, source = resolved
    evidence = {"c": c, "beta": beta, "form": form, "source": source}
    pw_worst = max(e.decay_residual(mode, c, beta) for e in evals if mode in e.decay)
    evidence["pointwise_worst"] = pw_worst
    if form == "pointwise" and pw_worst <= tol:
        return ConditionCheck(name, True, pw_worst, evidence, f"pointwise, {source}"), (c, beta)
    win_worst = max(e.window_residual(mode, c, beta) for e in evals if mode in e.window_tables)
    evidence["window_worst"] = win_worst
    if win_worst <= tol:
        note = f"integrated comparison form over jump-free windows, {source}"
        return ConditionCheck(name, True, win_worst, evidence, note), (c, beta)
    return (
        ConditionCheck(name, False, min(pw_worst, win_worst), evidence, f"{form}, {source}", hard_failure=True),
        (c, beta),
    )


def theorem2_verdict(
    evals,
    lyap: LyapunovSet,
    F: int,
    t_d: float,
    require_jump_condition: bool = True,
    gk_rel_tol: float = 1e-2,
    gk_abs_tol: float = 1e-9,
    decrease_tol: float = 1e-9,
) -> CertificateReport:
    """Aggregate a sweep of trajectory evaluations into a single-FTS-mode verdict.

    ``FTS-evidence`` needs every condition to pass and every trajectory to
    settle. ``violated`` means some condition failed with a positive residual;
    anything else (too few radii, horizon too short, no data) is
    ``inconclusive``.
    """
    evals = list(evals)
    if not evals:
        raise ValueError("empty sweep")
    live = [e for e in evals if e.radius > 0]
    notes = [
        "class-GK conditions are tested only on the swept radii",
        "jump sums use per-mode sums directly, so no mode-count factor is needed",
    ]
    checks: list[ConditionCheck] = []

    def env(name, key):
        return _envelope_check(name, [(e.radius, key(e)) for e in live], gk_rel_tol, gk_abs_tol)

    checks.append(env("(i) switch sum", lambda e: e.sums.s1_max))
    checks.append(env("(ii) flow sum", lambda e: e.sums.s2_max))
    if require_jump_condition:
        checks.append(env("(iii) jump sum", lambda e: e.sums.s3_max()))
    iv, consts = _decrease_check(live, lyap, F, decrease_tol)
    checks.append(iv)
    v = env("(v) gap sum", lambda e: e.sums.s5_max(F))
    full = [(e.radius, e.sums.s5_max(F, full=True)) for e in live]
    try:
        v.evidence["full_interval_variant"] = fit_gk_envelope(full, gk_rel_tol, gk_abs_tol).to_dict()
    except ValueError:
        pass
    checks.append(v)

    # (vi) activation budget
    per_traj = []
    vi_ok = True
    vi_hard = False
    worst_deficit = None
    if consts is None:
        vi = ConditionCheck("(vi) activation budget", False, None, {}, "no decay constants for the FTS mode")
        vi_ok = False
        never_active = all(e.n_windows == 0 and e.reason != "converged" for e in live)
        vi_hard = iv.hard_failure or (bool(live) and never_active)
        if never_active:
            vi.note = "the FTS mode is never active"
    else:
        c, beta = consts
        for e in live:
            bud = budget_from_windows(e.windows, c, beta)
            met_by_conv = e.reason == "converged" and e.n_windows > 0
            ok = bud.met or met_by_conv
            deficit = bud.budget - bud.achieved
            worst_deficit = deficit if worst_deficit is None else max(worst_deficit, deficit)
            per_traj.append(
                {"x0": e.x0, **bud.to_dict(), "met_by_convergence": met_by_conv and not bud.met, "pass": ok}
            )
            if not ok:
                vi_ok = False
                if e.reason == "diverged" or e.n_windows == 0:
                    vi_hard = True
        vi = ConditionCheck(
            "(vi) activation budget",
            vi_ok,
            worst_deficit,
            {"per_trajectory": per_traj},
            "met when achieved >= budget or the trajectory reached the origin",
            hard_failure=vi_hard,
        )
    checks.append(vi)

    dwell_bad = [e.x0 for e in live if not e.dwell_ok]
    checks.append(
        ConditionCheck(
            "dwell (jump-free window >= t_d)",
            not dwell_bad,
            None,
            {"t_d": t_d, "failing_x0": dwell_bad},
            hard_failure=bool(dwell_bad),
        )
    )
    unsettled = [e.x0 for e in live if e.settling_time is None]
    checks.append(
        ConditionCheck(
            "finite settling time",
            not unsettled and bool(live),
            None,
            {"settling_times": [e.settling_time for e in live], "unsettled_x0": unsettled},
        )
    )

    radii = {e.radius for e in live}
    if len(radii) < 3:
        verdict = INCONCLUSIVE
        notes.append(f"degenerate sweep: {len(radii)} distinct non-zero radii")
    elif all(c.passed for c in checks):
        verdict = FTS_EVIDENCE
    elif any(c.hard_failure for c in checks if not c.passed):
        verdict = VIOLATED
    else:
        verdict = INCONCLUSIVE
    constants = {"F": F, "c": consts[0], "beta": consts[1]} if consts else {"F": F}
    return CertificateReport("theorem2", verdict, checks, notes, constants, [e.summary() for e in evals])


def theorem3_verdict(
    evals,
    lyap: LyapunovSet,
    modes: Sequence[int],
    gk_rel_tol: float = 1e-2,
    gk_abs_tol: float = 1e-9,
    decrease_tol: float = 1e-9,
    estimate: bool = True,
) -> CertificateReport:
    """Verdict for the case where every mode is finite-time stable on its own.

    Needs the switch, jump and gap sums to admit GK envelopes and the pointwise
    decrease condition to hold for every mode in ``modes``.
    """
    evals = list(evals)
    if not evals:
        raise ValueError("empty sweep")
    if not estimate:
        missing = [m for m in modes if m not in lyap.constants]
        if missing:
            raise ValueError(f"missing (c, beta) for modes {missing}")
    live = [e for e in evals if e.radius > 0]
    checks = []

    def env(name, key):
        return _envelope_check(name, [(e.radius, key(e)) for e in live], gk_rel_tol, gk_abs_tol)

    checks.append(env("(i) switch sum", lambda e: e.sums.s1_max))
    checks.append(env("(iii) jump sum", lambda e: e.sums.s3_max()))
    constants = {}
    for m in modes:
        checks.append(env(f"(v) gap sum, mode {m}", lambda e, m=m: e.sums.s5_max(m)))
        chk, consts = _decrease_check(live, lyap, m, decrease_tol, window_form=False)
        checks.append(chk)
        if consts:
            constants[str(m)] = {"c": consts[0], "beta": consts[1]}
    radii = {e.radius for e in live}
    notes = ["every mode must satisfy the pointwise decrease condition"]
    if len(radii) < 3:
        verdict = INCONCLUSIVE
        notes.append(f"degenerate sweep: {len(radii)} distinct non-zero radii")
    elif all(c.passed for c in checks):
        verdict = FTS_EVIDENCE
    elif any(c.hard_failure for c in checks if not c.passed):
        verdict = VIOLATED
    else:
        verdict = INCONCLUSIVE
    return CertificateReport("theorem3", verdict, checks, notes, constants, [e.summary() for e in evals])


def random_lemma1_cases(count: int, seed: int = 42, max_len: int = 50, high: float = 10.0):
    """Seeded random ``(a, b, r)`` instances: lengths 1..max_len, values in [0, high], r in {0.1, ..., 0.9}."""
    rng = np.random.default_rng(seed)
    rs = np.round(np.arange(1, 10) * 0.1, 10)
    for _ in range(count):
        m = int(rng.integers(1, max_len + 1))
        yield rng.uniform(0, high, m), rng.uniform(0, high, m), float(rs[int(rng.integers(len(rs)))])
