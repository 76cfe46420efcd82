"""Acceptance criteria 1-8. Each test records one PASS/FAIL line (see conftest)."""

import json
import math
import time
from pathlib import Path

import numpy as np

from hybridfts.certificate import (
    activation_budget,
    condition_sums,
    fit_gk_envelope,
    lemma1_oracle,
    random_lemma1_cases,
    telescoping_residual,
)
from hybridfts.examples import (
    REGISTRY,
    NOMINAL_SWEEP_RADII,
    get_example,
    linear_guard,
    paper_mode5,
    scalar_fts,
    scalar_settling_time,
)
from hybridfts.exprparse import parse, to_source
from hybridfts.integrator import simulate
from hybridfts.lyapunov import estimate_fts_constants
from hybridfts.sweep import sweep_points
from hybridfts.sysfile import dump_system, load_system

CORPUS = Path(__file__).parent / "data" / "expr_corpus.txt"


# ---------------------------------------------------------------- 1


def test_c1_scalar_settling_oracle(acceptance):
    t0 = time.perf_counter()
    worst, runs, bad = 0.0, 0, []
    for c in (1.0, 2.0, 4.0):
        # exponent 2*beta - 1 in {1/3, 1/2, 2/3}
        for beta in (2 / 3, 3 / 4, 5 / 6):
            e = scalar_fts(c, beta)
            for x0 in (0.25, 1.0, 4.0):
                traj = simulate(e.system, [x0], e.config)
                exact = scalar_settling_time(x0, c, beta)
                err = abs(traj.t_final - exact) / exact if traj.reason == "converged" else math.inf
                worst = max(worst, err)
                runs += 1
                if err > 0.02:
                    bad.append((c, beta, x0, traj.reason))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 5.0
    acceptance(1, ok, f"{runs} runs, worst rel. error {worst:.3%} (limit 2%), {elapsed:.2f} s (limit 5 s)")
    assert not bad, bad
    assert elapsed < 5.0


# ---------------------------------------------------------------- 2


def test_c2_lemma1_oracle(acceptance):
    t0 = time.perf_counter()
    reports = [lemma1_oracle(a, b, r) for a, b, r in random_lemma1_cases(1000, seed=42)]
    elapsed = time.perf_counter() - t0
    worst = min(r.min_slack for r in reports)
    failures = sum(not r.holds(1e-12) for r in reports)
    ok = failures == 0 and elapsed < 1.0
    acceptance(2, ok, f"1000 cases, {failures} failures, min slack {worst:.3g} (limit -1e-12), {elapsed:.2f} s")
    assert failures == 0
    assert elapsed < 1.0


# ---------------------------------------------------------------- 3


def _positive_increments(traj, lyap, unstable=(1, 2, 4)):
    """Largest V increase at a jump, across a switch and along an unstable-mode segment."""
    at_jump = max((lyap.V(ev.active_mode)(ev.x_after) - lyap.V(ev.active_mode)(ev.x_before) for ev in traj.jump_events), default=-math.inf)
    segs = traj.segments
    at_switch = max((lyap.V(b.mode)(b.states[0]) - lyap.V(a.mode)(b.states[0]) for a, b in zip(segs, segs[1:])), default=-math.inf)
    along = -math.inf
    for s in segs:
        if s.mode in unstable and len(s.times) > 1:
            v = lyap.V(s.mode).values(s.states)
            flow = np.diff(s.times) > 0  # skip jump pairs
            if flow.any():
                along = max(along, float(np.max(np.diff(v)[flow])))
    return at_jump, at_switch, along


def test_c3_paper_reproduction(acceptance, paper, nominal_sweep):
    evals, elapsed = nominal_sweep
    in_ball = [e for e in evals if e.radius <= 1.0]
    settled = [e for e in in_ball if e.reason == "converged" and e.t_final < 20.0]
    reasons = sorted({e.reason for e in in_ball})

    # the qualitative Lyapunov features, on a start that does reach the origin
    x0 = sweep_points(2, [paper.radii[-1]], 8)[1][2]
    traj = simulate(paper.system, x0, paper.config)
    jump, switch, along = _positive_increments(traj, paper.lyapunov)
    features = jump > 0 and switch > 0 and along > 0

    ok = len(settled) == len(in_ball) and features and elapsed < 30.0
    acceptance(
        3,
        ok,
        f"radii {NOMINAL_SWEEP_RADII[:3]} x 8 angles: {len(settled)}/{len(in_ball)} settled (outcomes {reasons}); "
        f"from r={paper.radii[-1]:g}: {traj.reason}, positive V increments at jump {jump:.3g}, switch {switch:.3g}, unstable flow {along:.3g}; sweep {elapsed:.1f} s",
    )
    assert features
    assert elapsed < 30.0
    assert len(settled) == len(in_ball), f"{len(in_ball) - len(settled)} of {len(in_ball)} unit-ball starts did not settle"


# ---------------------------------------------------------------- 4


def _telescoping_cases():
    out = []
    for name in sorted(REGISTRY):
        e = get_example(name)
        cfg = e.config.replace(t_end=min(e.config.t_end, 3.0))
        for _, _, x0 in sweep_points(e.system.n, e.radii[:2], min(e.directions, 4)):
            out.append((name, e, cfg, x0))
    return out


def test_c4_telescoping_identity(acceptance, nominal_sweep, basin_sweep):
    worst, count = 0.0, 0
    for _, e, cfg, x0 in _telescoping_cases():
        traj = simulate(e.system, x0, cfg)
        worst = max(worst, telescoping_residual(condition_sums(traj, e.lyapunov)))
        count += 1
    for evals in (nominal_sweep[0], basin_sweep[0]):
        for ev in evals:
            worst = max(worst, ev.telescoping)
            count += 1
    ok = worst <= 1e-6
    acceptance(4, ok, f"{count} trajectories, worst relative residual {worst:.3g} (limit 1e-6)")
    assert ok


# ---------------------------------------------------------------- 5


def test_c5_gk_envelopes(acceptance, paper, nominal_sweep):
    evals, _ = nominal_sweep
    F = paper.policy.fts_mode
    keys = {
        "(i)": lambda e: e.sums.s1_max,
        "(ii)": lambda e: e.sums.s2_max,
        "(iii)": lambda e: e.sums.s3_max(),
        "(v)": lambda e: e.sums.s5_max(F),
    }
    parts, ok = [], True
    for name, key in keys.items():
        env = fit_gk_envelope([(e.radius, key(e)) for e in evals])
        lo, hi = env(0.25), env(2.0)
        passed = lo <= 1e-2 * hi + 1e-9
        ok &= passed
        parts.append(f"{name} {lo:.3g}/{hi:.3g} {'ok' if passed else 'over'}")
    acceptance(5, ok, "envelope at r=0.25 vs r=2: " + ", ".join(parts))
    assert ok


# ---------------------------------------------------------------- 6


def _level_one_start(V, theta):
    u = np.array([math.cos(theta), math.sin(theta)])
    lo, hi = 0.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if V(mid * u) < 1.0 else (lo, mid)
    return (lo * u).tolist()


def test_c6_activation_budget(acceptance):
    e = paper_mode5()
    V = e.lyapunov.V(1)
    f = e.system.flows[0]
    finite, unbounded, violations, margins = 0, 0, [], []
    for k in range(8):
        x0 = _level_one_start(V, math.pi / 8 + k * math.pi / 4)
        assert abs(V(x0) - 1.0) < 1e-9
        traj = simulate(e.system, x0, e.config)
        assert traj.reason == "converged"
        est = estimate_fts_constants(traj, e.lyapunov, 1, f)
        if est is None:
            # dV/dt vanishes on the x2 axis, so no c > 0 fits every sample: no finite budget
            unbounded += 1
            continue
        finite += 1
        budget = activation_budget(traj, e.lyapunov, 1, est.c, est.beta).budget
        margins.append(traj.t_final / budget)
        if traj.t_final > 1.05 * budget:
            violations.append((k, traj.t_final, budget))
    ok = not violations and finite > 0
    acceptance(
        6,
        ok,
        f"8 starts on V5 = 1: {finite} with a finite budget (settle/budget <= {max(margins, default=float('nan')):.3f}), "
        f"{unbounded} without one, {len(violations)} violations",
    )
    assert finite > 0
    assert not violations, violations


# ---------------------------------------------------------------- 7


def test_c7_event_accuracy(acceptance, paper):
    traj = simulate(paper.system, [1e-3, 0.0], paper.config.replace(t_end=2.0))
    sw_err = max(abs(s.t_start - 0.2 * k) for k, s in enumerate(traj.segments))
    jp_err = max(abs(ev.t - 0.1 * (k + 1)) for k, ev in enumerate(traj.jump_events))
    modes_ok = [s.mode for s in traj.segments] == [1, 2, 3, 4, 5] * 2

    lg = linear_guard()
    guard_err, n_cross = 0.0, 0
    for x0 in (0.1, 0.2, 0.4):
        t = simulate(lg.system, [x0], lg.config)
        exact = [math.log(1.0 / x0) + k * math.log(2.0) for k in range(10)]
        exact = [te for te in exact if te < lg.config.t_end]
        assert len(t.jump_events) == len(exact)
        n_cross += len(exact)
        for ev, te in zip(t.jump_events, exact):
            guard_err = max(guard_err, abs(ev.t - te))
    ok = sw_err <= 1e-9 and jp_err <= 1e-9 and guard_err <= 1e-9 and modes_ok
    acceptance(
        7,
        ok,
        f"switch error {sw_err:.2g} s, jump error {jp_err:.2g} s, {n_cross} guard crossings within {guard_err:.2g} s (limit 1e-9)",
    )
    assert ok


# ---------------------------------------------------------------- 8


def _fingerprint(traj):
    return [(s.mode, s.t_start, s.t_end, s.times.tobytes(), s.states.tobytes()) for s in traj.segments] + [
        (ev.t, ev.jump_index, ev.x_after.tobytes()) for ev in traj.jump_events
    ]


def test_c8_determinism_and_round_trips(acceptance):
    e = get_example("two-mode-scalar")
    cfg = e.config.replace(t_end=2.0)
    same = _fingerprint(simulate(e.system, [1.0], cfg)) == _fingerprint(simulate(e.system, [1.0], cfg))
    p = get_example("paper")
    pc = p.config.replace(t_end=1.0)
    same &= _fingerprint(simulate(p.system, [1e-3, 2e-4], pc)) == _fingerprint(simulate(p.system, [1e-3, 2e-4], pc))

    lines = [s for s in CORPUS.read_text().splitlines() if s.strip()]
    idempotent = 0
    for src in lines:
        n = 3
        first = parse(src, n)
        printed = to_source(first)
        second = parse(printed, n)
        idempotent += first == second and to_source(second) == printed

    survived = 0
    for name in sorted(REGISTRY):
        entry = get_example(name)
        doc = json.loads(json.dumps(dump_system(entry.system, entry.lyapunov, entry.config, entry.radii, entry.directions)))
        back = load_system(doc)
        again = dump_system(back.system, back.lyapunov, back.config, back.radii, back.directions)
        x0 = sweep_points(entry.system.n, entry.radii[:1], 1)[0][2]
        short = entry.config.replace(t_end=min(entry.config.t_end, 1.0))
        survived += again == doc and _fingerprint(simulate(entry.system, x0, short)) == _fingerprint(
            simulate(back.system, x0, short)
        )

    ok = same and len(lines) == 100 and idempotent == 100 and survived == len(REGISTRY)
    acceptance(
        8,
        ok,
        f"bit-identical reruns: {same}; parse-print-parse {idempotent}/{len(lines)}; registry round-trip {survived}/{len(REGISTRY)}",
    )
    assert ok
