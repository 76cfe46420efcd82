"""Registry of reference systems.

``paper``
    Five planar flows, four unstable or merely stable and one finite-time
    stable (mode 5), with the jump map ``x -> -1.1 x``. The signed-power
    exponent ``alpha`` and the gain ``k2`` of ``V5`` are not given numerically
    in the source; ``alpha = 3/4`` is the only value making ``f5`` homogeneous
    with the cross terms of ``dV5/dt`` cancelling, and ``k2 = 10`` matches the
    ``-10`` gain of ``f5``. Then ``dV5/dt = -200 |x1|^(5/4)``. The printed
    ``P4 = [[6, 1], [2, 3]]`` is not symmetric; its symmetric part
    ``[[6, 1.5], [1.5, 3]]`` gives the same quadratic form.
``scalar``
    ``x' = -c sign(x) |x|^(2 beta - 1)`` with ``V = x^2``, which satisfies
    ``dV/dt = -2c V^beta`` exactly; settling time
    ``|x0|^(2(1-beta)) / (2c(1-beta))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .exprparse import parse
from .integrator import IntegrationConfig
from .lyapunov import ExprV, LyapunovSet, QuadraticV
from .model import (
    Guard,
    HybridSystemDef,
    PeriodicJumps,
    PeriodicSchedule,
    RandomSchedule,
    StateTriggeredJumps,
    SwitchingPolicy,
    VectorField,
    validate_system,
)

__all__ = [
    "ExampleEntry",
    "paper_example",
    "paper_mode5",
    "scalar_fts",
    "two_mode_scalar",
    "unstable_only",
    "linear_guard",
    "REGISTRY",
    "get_example",
    "PAPER_FLOWS",
    "PAPER_P",
    "NOMINAL_SWEEP_RADII",
]

PAPER_FLOWS = (
    ("0.01*x1^2 + x2", "-0.01*x1^3 + x2"),
    ("0.01*x1 - x2", "-x1^2 + 0.01*x2"),
    ("-x1 - x2", "x1 - x2"),
    ("0.01*x1^2 + 0.01*x1*x2", "-0.01*x1^3 + x2^2"),
)
PAPER_P = (
    ((1.0, 0.0), (0.0, 1.0)),
    ((5.0, 2.0), (2.0, 4.0)),
    ((1.0, 0.0), (0.0, 3.0)),
    ((6.0, 1.0), (2.0, 3.0)),
)
JUMP_GAIN = "-1.1"

# Radii of the nominal sweep for the five-mode example. Trajectories started
# this far out blow up in mode 4 (x2' contains +x2^2); see BASIN_RADII.
NOMINAL_SWEEP_RADII = (0.25, 0.5, 1.0, 2.0)
# Radii inside the region where the scheduled system reaches the origin.
BASIN_RADII = (5e-5, 1.5e-4, 4e-4, 1e-3)


@dataclass(frozen=True)
class ExampleEntry:
    name: str
    description: str
    system: HybridSystemDef
    lyapunov: LyapunovSet
    config: IntegrationConfig
    radii: tuple = (0.25, 0.5, 1.0, 2.0)
    directions: int = 8
    expected: dict = field(default_factory=dict)
    settling_oracle: Optional[Callable[[list], float]] = None
    choices: tuple = ()

    @property
    def policy(self) -> SwitchingPolicy:
        return self.system.policy


def _f5_sources(alpha: float) -> tuple[str, str]:
    return (f"x2 - 20*sign(x1)*abs(x1)^{alpha!r}", f"-10*sign(x1)*abs(x1)^{2 - 2 * alpha!r}")


def _v5_source(alpha: float, k2: float) -> str:
    return f"{k2 / (2 * alpha)!r}*abs(x1)^{2 * alpha!r} + 0.5*abs(x2)^2"


def _jump_map(n: int = 2) -> VectorField:
    return VectorField.from_strings([f"{JUMP_GAIN}*x{i}" for i in range(1, n + 1)], n, "g")


def paper_example(
    alpha: float = 0.75,
    k2: float = 10.0,
    dwell: float = 0.2,
    jump_period: float = 0.1,
    t_d: float = 0.1,
    order=(1, 2, 3, 4, 5),
) -> ExampleEntry:
    """The five-mode example with mode 5 finite-time stable."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    flows = [VectorField.from_strings(s, 2, f"f{i}") for i, s in enumerate(PAPER_FLOWS, start=1)]
    flows.append(VectorField.from_strings(_f5_sources(alpha), 2, "f5"))
    policy = SwitchingPolicy(
        PeriodicSchedule(tuple((m, dwell) for m in order)),
        PeriodicJumps(jump_period, 1),
        t_d=t_d,
        fts_mode=5,
    )
    system = HybridSystemDef(2, flows, (_jump_map(),), policy, name="paper")
    lyap = LyapunovSet(tuple(QuadraticV(P) for P in PAPER_P) + (ExprV.from_string(_v5_source(alpha, k2), 2),))
    return ExampleEntry(
        "paper",
        "five planar modes, mode 5 finite-time stable, jumps x -> -1.1x",
        system,
        lyap,
        IntegrationConfig(dt=1e-4, t_end=20.0),
        radii=BASIN_RADII,
        directions=8,
        expected={"finite_settling": True, "verdict": "FTS-evidence"},
        choices=(
            f"alpha = {alpha}, k2 = {k2}",
            "P4 symmetrized to [[6, 1.5], [1.5, 3]]",
            "mode order 1-2-3-4-5",
            f"default radii {BASIN_RADII}; the nominal {NOMINAL_SWEEP_RADII} diverge",
        ),
    )


def paper_mode5(alpha: float = 0.75, k2: float = 10.0) -> ExampleEntry:
    """Mode 5 of the five-mode example alone: no switching and no jumps."""
    f5 = VectorField.from_strings(_f5_sources(alpha), 2, "f5")
    policy = SwitchingPolicy(PeriodicSchedule(((1, 1.0),)), None, t_d=0.1, fts_mode=1)
    system = HybridSystemDef(2, (f5,), (), policy, name="paper-mode5")
    lyap = LyapunovSet((ExprV.from_string(_v5_source(alpha, k2), 2),))
    return ExampleEntry(
        "paper-mode5",
        "finite-time stable mode 5 of the five-mode example on its own",
        system,
        lyap,
        IntegrationConfig(dt=1e-4, t_end=20.0),
        radii=(0.25, 0.5, 1.0, 2.0),
        expected={"finite_settling": True},
        choices=(f"alpha = {alpha}, k2 = {k2}",),
    )


def _check_scalar(c: float, beta: float):
    if not c > 0:
        raise ValueError("c must be > 0")
    if not 0.5 < beta < 1:
        # exponent 2*beta - 1 must lie in (0, 1) for a finite-time flow with V = x^2
        raise ValueError("beta must lie in (0.5, 1)")


def scalar_settling_time(x0: float, c: float, beta: float) -> float:
    """``|x0|^(2(1-beta)) / (2c(1-beta))`` for ``x' = -c sign(x)|x|^(2 beta - 1)``."""
    return abs(x0) ** (2 * (1 - beta)) / (2 * c * (1 - beta))


def scalar_fts(c: float = 2.0, beta: float = 0.75) -> ExampleEntry:
    _check_scalar(c, beta)
    f = VectorField.from_strings([f"-{c!r}*sign(x1)*abs(x1)^{2 * beta - 1!r}"], 1, "f")
    policy = SwitchingPolicy(PeriodicSchedule(((1, 1.0),)), None, t_d=0.1, fts_mode=1)
    system = HybridSystemDef(1, (f,), (), policy, name="scalar")
    lyap = LyapunovSet((QuadraticV([[1.0]]),), {1: (2 * c, beta)})
    return ExampleEntry(
        "scalar",
        f"x' = -{c} sign(x)|x|^{2 * beta - 1:g} with V = x^2",
        system,
        lyap,
        IntegrationConfig(dt=1e-4, t_end=20.0),
        radii=(0.25, 1.0, 4.0),
        directions=2,
        expected={"finite_settling": True, "verdict": "FTS-evidence"},
        settling_oracle=lambda x0: scalar_settling_time(x0[0], c, beta),
    )


def two_mode_scalar(dwell: float = 0.05, seed: int = 0) -> ExampleEntry:
    """Two finite-time stable scalar modes under seeded random switching."""
    flows = (
        VectorField.from_strings(["-sign(x1)*abs(x1)^0.5"], 1, "f1"),
        VectorField.from_strings(["-2*sign(x1)*abs(x1)^0.5"], 1, "f2"),
    )
    policy = SwitchingPolicy(RandomSchedule(((1, dwell), (2, 1.5 * dwell))), None, t_d=dwell, fts_mode=1, seed=seed)
    system = HybridSystemDef(1, flows, (), policy, name="two-mode-scalar")
    lyap = LyapunovSet((QuadraticV([[1.0]]), QuadraticV([[1.0]])), {1: (2.0, 0.75), 2: (4.0, 0.75)})
    return ExampleEntry(
        "two-mode-scalar",
        "x' = -sign(x)|x|^(1/2) and x' = -2 sign(x)|x|^(1/2), random switching",
        system,
        lyap,
        IntegrationConfig(dt=1e-4, t_end=10.0),
        radii=(0.25, 1.0, 4.0),
        directions=2,
        expected={"finite_settling": True, "verdict": "FTS-evidence"},
    )


def unstable_only() -> ExampleEntry:
    """The five-mode example with the schedule restricted to modes 1, 2 and 4."""
    base = paper_example(order=(1, 2, 4))
    return replace(
        base,
        name="unstable-only",
        description="paper example cycling modes 1, 2, 4 only; the finite-time mode never runs",
        system=replace(base.system, name="unstable-only"),
        config=IntegrationConfig(dt=1e-4, t_end=10.0),
        radii=NOMINAL_SWEEP_RADII,
        directions=4,
        expected={"finite_settling": False, "verdict": "not FTS-evidence"},
        choices=(base.choices[0], base.choices[1], "mode order 1-2-4"),
    )


def linear_guard(rate: float = 1.0, level: float = 1.0, gain: float = 0.5) -> ExampleEntry:
    """``x' = rate x`` with a jump ``x -> gain x`` whenever ``x1`` reaches ``level``.

    From ``0 < x0 < level`` the first crossing is at ``ln(level/x0)/rate`` and
    later ones follow every ``ln(1/gain)/rate``.
    """
    f = VectorField.from_strings([f"{rate!r}*x1"], 1, "f")
    g = VectorField.from_strings([f"{gain!r}*x1"], 1, "g")
    D = Guard(parse(f"x1 - {level!r}", 1), 1)
    policy = SwitchingPolicy(PeriodicSchedule(((1, 1.0),)), StateTriggeredJumps(1), t_d=0.1, fts_mode=1)
    system = HybridSystemDef(1, (f,), (g,), policy, jump_guard=D, name="linear-guard")
    lyap = LyapunovSet((QuadraticV([[1.0]]),))
    return ExampleEntry(
        "linear-guard",
        "linear growth reset by a state-triggered jump at x1 = level",
        system,
        lyap,
        IntegrationConfig(dt=1e-3, t_end=3.0),
        radii=(0.1, 0.2, 0.4),
        directions=1,
        expected={"finite_settling": False},
    )


REGISTRY: dict[str, Callable[[], ExampleEntry]] = {
    "paper": paper_example,
    "paper-mode5": paper_mode5,
    "scalar": scalar_fts,
    "two-mode-scalar": two_mode_scalar,
    "unstable-only": unstable_only,
    "linear-guard": linear_guard,
}


def get_example(name: str) -> ExampleEntry:
    try:
        entry = REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown example {name!r}; known: {', '.join(sorted(REGISTRY))}") from None
    problems = validate_system(entry.system)
    if problems:  # registry entries are fixed data; this guards against edits
        raise AssertionError("; ".join(problems))
    return entry
