"""JSON system-definition files.

Layout::

    {
      "format": "hybridfts-system/1",
      "name": "paper",
      "n": 2,
      "flows": [["x2", "-x1"], ...],          # one expression per component
      "jumps": [["-1.1*x1", "-1.1*x2"]],
      "flow_guard": null,                      # expression e, set {e(x) >= 0}
      "jump_guard": null,
      "policy": {
        "mode_schedule": {"kind": "periodic", "sequence": [[1, 0.2], ...], "repeat": true}
                       | {"kind": "random", "dwell": [[1, 0.2], ...], "first_mode": 1},
        "jump_schedule": null
                       | {"kind": "periodic", "period": 0.1, "jump_index": 1, "offset": null}
                       | {"kind": "instants", "times": [...], "indices": [...]}
                       | {"kind": "state", "jump_index": 1},
        "t_d": 0.1, "fts_mode": 5, "seed": 0
      },
      "lyapunov": [{"kind": "quadratic", "P": [[1, 0], [0, 1]]}, {"kind": "expr", "expr": "..."}],
      "constants": {"5": [c, beta]},           # optional
      "integration": {"dt": 1e-4, "t_end": 20, ...},
      "sweep": {"radii": [...], "directions": 8}
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from .exprparse import parse
from .integrator import IntegrationConfig
from .lyapunov import ExprV, LyapunovSet, QuadraticV
from .model import (
    Guard,
    HybridSystemDef,
    JumpInstants,
    PeriodicJumps,
    PeriodicSchedule,
    RandomSchedule,
    StateTriggeredJumps,
    SwitchingPolicy,
    VectorField,
)

__all__ = ["FORMAT", "SystemFileError", "LoadedSystem", "dump_system", "load_system", "save", "load"]

FORMAT = "hybridfts-system/1"


class SystemFileError(ValueError):
    pass


class LoadedSystem:
    """A system plus the optional Lyapunov set, integration settings and sweep spec stored with it."""

    def __init__(self, system, lyapunov=None, config=None, radii=None, directions=None):
        self.system = system
        self.lyapunov = lyapunov
        self.config = config
        self.radii = radii
        self.directions = directions


def _maps(maps, what: str) -> list:
    out = []
    for i, m in enumerate(maps, start=1):
        if not isinstance(m, VectorField):
            raise TypeError(f"{what} {i} is not expression-based and cannot be exported")
        out.append(m.sources())
    return out


def _guard(g) -> Optional[str]:
    if g is None:
        return None
    if not isinstance(g, Guard):
        raise TypeError("only expression guards can be exported")
    return g.source()


def _policy(p: SwitchingPolicy) -> dict:
    ms = p.mode_schedule
    if isinstance(ms, PeriodicSchedule):
        mode = {"kind": "periodic", "sequence": [list(x) for x in ms.sequence], "repeat": ms.repeat}
    elif isinstance(ms, RandomSchedule):
        mode = {"kind": "random", "dwell": [list(x) for x in ms.dwell], "first_mode": ms.first_mode}
    else:
        raise TypeError(f"unsupported mode schedule {type(ms).__name__}")
    js = p.jump_schedule
    if js is None:
        jumps = None
    elif isinstance(js, PeriodicJumps):
        jumps = {"kind": "periodic", "period": js.period, "jump_index": js.jump_index, "offset": js.offset}
    elif isinstance(js, JumpInstants):
        jumps = {"kind": "instants", "times": list(js.times), "indices": list(js.indices)}
    elif isinstance(js, StateTriggeredJumps):
        jumps = {"kind": "state", "jump_index": js.jump_index}
    else:
        raise TypeError(f"unsupported jump schedule {type(js).__name__}")
    return {"mode_schedule": mode, "jump_schedule": jumps, "t_d": p.t_d, "fts_mode": p.fts_mode, "seed": p.seed}


def _lyap(lyap: LyapunovSet) -> tuple[list, dict]:
    funcs = []
    for V in lyap.functions:
        if isinstance(V, QuadraticV):
            funcs.append({"kind": "quadratic", "P": V.P_raw.tolist()})
        elif isinstance(V, ExprV):
            funcs.append({"kind": "expr", "expr": V.describe()})
        else:
            raise TypeError(f"unsupported Lyapunov function {type(V).__name__}")
    consts = {str(m): [c, b] for m, (c, b) in sorted(lyap.constants.items())}
    return funcs, consts


def dump_system(
    system: HybridSystemDef,
    lyapunov: Optional[LyapunovSet] = None,
    config: Optional[IntegrationConfig] = None,
    radii=None,
    directions: Optional[int] = None,
) -> dict:
    doc = {
        "format": FORMAT,
        "name": system.name,
        "n": system.n,
        "flows": _maps(system.flows, "flow"),
        "jumps": _maps(system.jumps, "jump"),
        "flow_guard": _guard(system.flow_guard),
        "jump_guard": _guard(system.jump_guard),
        "policy": _policy(system.policy),
    }
    if lyapunov is not None:
        doc["lyapunov"], doc["constants"] = _lyap(lyapunov)
    if config is not None:
        doc["integration"] = asdict(config)
    if radii is not None:
        doc["sweep"] = {"radii": [float(r) for r in radii], "directions": directions or 8}
    return doc


def _need(d: dict, key: str, where: str = "system file"):
    if key not in d:
        raise SystemFileError(f"{where}: missing key {key!r}")
    return d[key]


def _load_policy(d: dict) -> SwitchingPolicy:
    ms = _need(d, "mode_schedule", "policy")
    kind = _need(ms, "kind", "mode_schedule")
    if kind == "periodic":
        mode = PeriodicSchedule(tuple(tuple(x) for x in _need(ms, "sequence", "mode_schedule")), ms.get("repeat", True))
    elif kind == "random":
        mode = RandomSchedule(tuple(tuple(x) for x in _need(ms, "dwell", "mode_schedule")), ms.get("first_mode"))
    else:
        raise SystemFileError(f"unknown mode schedule kind {kind!r}")
    js = d.get("jump_schedule")
    if js is None:
        jumps = None
    elif js.get("kind") == "periodic":
        jumps = PeriodicJumps(float(_need(js, "period", "jump_schedule")), int(js.get("jump_index", 1)), js.get("offset"))
    elif js.get("kind") == "instants":
        jumps = JumpInstants(tuple(js.get("times", ())), tuple(js.get("indices", ())))
    elif js.get("kind") == "state":
        jumps = StateTriggeredJumps(int(js.get("jump_index", 1)))
    else:
        raise SystemFileError(f"unknown jump schedule kind {js.get('kind')!r}")
    return SwitchingPolicy(mode, jumps, float(d.get("t_d", 0.1)), int(d.get("fts_mode", 1)), int(d.get("seed", 0)))


def load_system(doc: dict) -> LoadedSystem:
    """Build a system (and whatever else the document carries) from a parsed JSON document.

    Expression and structural problems raise :class:`SystemFileError` or
    :class:`~hybridfts.exprparse.ExprSyntaxError`. The equilibrium check is
    left to :func:`~hybridfts.model.validate_system`.
    """
    if doc.get("format", FORMAT) != FORMAT:
        raise SystemFileError(f"unsupported format {doc.get('format')!r}")
    n = int(_need(doc, "n"))
    flows = [VectorField.from_strings(s, n, f"f{i}") for i, s in enumerate(_need(doc, "flows"), start=1)]
    jumps = [VectorField.from_strings(s, n, f"g{i}") for i, s in enumerate(doc.get("jumps", []), start=1)]
    for kind, maps, srcs in (("flow", flows, doc["flows"]), ("jump", jumps, doc.get("jumps", []))):
        for i, (m, s) in enumerate(zip(maps, srcs), start=1):
            if len(s) != n:
                raise SystemFileError(f"{kind} {i} has {len(s)} components, n = {n}")
    guards = {}
    for key in ("flow_guard", "jump_guard"):
        src = doc.get(key)
        guards[key] = None if src is None else Guard(parse(src, n), n)
    try:
        system = HybridSystemDef(
            n, flows, jumps, _load_policy(_need(doc, "policy")), guards["flow_guard"], guards["jump_guard"], doc.get("name", "")
        )
    except ValueError as err:
        if isinstance(err, SystemFileError):
            raise
        raise SystemFileError(str(err)) from None

    lyap = None
    if "lyapunov" in doc:
        funcs = []
        for i, spec in enumerate(doc["lyapunov"], start=1):
            if spec.get("kind") == "quadratic":
                funcs.append(QuadraticV(spec["P"]))
            elif spec.get("kind") == "expr":
                funcs.append(ExprV.from_string(spec["expr"], n))
            else:
                raise SystemFileError(f"lyapunov {i}: unknown kind {spec.get('kind')!r}")
        consts = {int(k): tuple(v) for k, v in doc.get("constants", {}).items()}
        lyap = LyapunovSet(tuple(funcs), consts)
    cfg = IntegrationConfig(**doc["integration"]) if "integration" in doc else None
    sweep = doc.get("sweep") or {}
    return LoadedSystem(system, lyap, cfg, sweep.get("radii"), sweep.get("directions"))


def save(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load(path) -> LoadedSystem:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SystemFileError(f"{path}: invalid JSON ({err})") from None
    return load_system(doc)
