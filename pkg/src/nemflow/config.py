"""Strict JSON run configuration.

Example (only ``grid``, ``potential`` and ``t_max`` are required)::

    {
      "grid": {"nx": 64, "ny": 64, "Lx": 1.0, "Ly": 1.0},
      "bc_mode": "dirichlet",
      "m": 2,
      "params": {"nu": 1.0, "lambda": 1.0, "gamma": 1.0},
      "potential": {"kind": "gl", "eta": 0.25},
      "initial": {"preset": "cavity"},
      "boundary": {"kind": "trace"},
      "dt": {"policy": "fixed", "value": 0.001},
      "t_max": 1.0,
      "residual_target": null,
      "max_steps": null,
      "record_interval": 10,
      "output_dir": "out",
      "seed_label": "",
      "solver": {"rel_tol": 1e-10, "max_iterations": 500, "method": "direct"}
    }
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .grid import BC_MODES, Grid
from .linalg import LinearSolveConfig
from .material import GinzburgLandau, Params, Quadratic
from .simulator import DtPolicy

PRESETS = ("cavity", "taylor-green", "kink", "convex", "freeslip-box", "uniform")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(k, "duplicate key")
        out[k] = v
    return out


def _number(obj: dict, key: str, path: str, default=None, *, positive=False, nonneg=False, integer=False,
            allow_none=False):
    where = f"{path}.{key}" if path else key
    if key not in obj:
        if default is _REQUIRED:
            raise ConfigError(where, "missing required key")
        return default
    val = obj[key]
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(where, f"expected a number, got {val!r}")
    if integer:
        if isinstance(val, float) and not val.is_integer():
            raise ConfigError(where, f"expected an integer, got {val!r}")
        val = int(val)
    else:
        val = float(val)
    if not math.isfinite(val):
        raise ConfigError(where, "must be finite")
    if positive and not val > 0:
        raise ConfigError(where, f"must be > 0, got {val!r}")
    if nonneg and val < 0:
        raise ConfigError(where, f"must be >= 0, got {val!r}")
    return val


_REQUIRED = object()


def _section(obj: dict, key: str, allowed: set, required=False) -> dict:
    if key not in obj:
        if required:
            raise ConfigError(key, "missing required key")
        return {}
    sec = obj[key]
    if not isinstance(sec, dict):
        raise ConfigError(key, "expected an object")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown key")
    return sec


@dataclass(frozen=True)
class SimConfig:
    nx: int
    ny: int
    potential: dict
    t_max: float
    Lx: float = 1.0
    Ly: float = 1.0
    bc_mode: str = "dirichlet"
    m: int = 2
    nu: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0
    initial: dict = field(default_factory=lambda: {"preset": "cavity"})
    boundary: dict = field(default_factory=lambda: {"kind": "trace"})
    dt: dict = field(default_factory=lambda: {"policy": "adaptive", "cap": 1e-2})
    residual_target: float | None = None
    max_steps: int | None = None
    record_interval: int = 10
    output_dir: str = "out"
    seed_label: str = ""
    solver: dict = field(default_factory=lambda: {"rel_tol": 1e-10, "max_iterations": 500, "method": "direct"})

    def grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.Lx, self.Ly, self.bc_mode)

    def make_potential(self):
        if self.potential["kind"] == "gl":
            return GinzburgLandau(self.potential["eta"])
        return Quadratic(self.potential["kappa"])

    def params(self) -> Params:
        return Params(self.nu, self.lam, self.gamma, self.make_potential())

    def dt_policy(self) -> DtPolicy:
        if self.dt["policy"] == "fixed":
            return DtPolicy("fixed", value=self.dt["value"])
        return DtPolicy("adaptive", cap=self.dt["cap"])

    def linear(self) -> LinearSolveConfig:
        return LinearSolveConfig(**self.solver)

    def to_dict(self) -> dict:
        return {
            "grid": {"nx": self.nx, "ny": self.ny, "Lx": self.Lx, "Ly": self.Ly},
            "bc_mode": self.bc_mode,
            "m": self.m,
            "params": {"nu": self.nu, "lambda": self.lam, "gamma": self.gamma},
            "potential": dict(self.potential),
            "initial": dict(self.initial),
            "boundary": dict(self.boundary),
            "dt": dict(self.dt),
            "t_max": self.t_max,
            "residual_target": self.residual_target,
            "max_steps": self.max_steps,
            "record_interval": self.record_interval,
            "output_dir": self.output_dir,
            "seed_label": self.seed_label,
            "solver": dict(self.solver),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def replace(self, **changes) -> "SimConfig":
        d = self.to_dict()
        for k, v in changes.items():
            if k in ("nx", "ny", "Lx", "Ly"):
                d["grid"][k] = v
            elif k in ("nu", "lam", "gamma"):
                d["params"]["lambda" if k == "lam" else k] = v
            else:
                d[k] = v
        return from_dict(d)


TOP_KEYS = {
    "grid", "bc_mode", "m", "params", "potential", "initial", "boundary", "dt", "t_max",
    "residual_target", "max_steps", "record_interval", "output_dir", "seed_label", "solver",
}


def parse_config(text: str) -> SimConfig:
    """Parse and validate JSON text; unknown and duplicate keys are errors."""
    try:
        obj = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    return from_dict(obj)


def from_dict(obj: dict) -> SimConfig:
    if not isinstance(obj, dict):
        raise ConfigError("<root>", "expected a JSON object")
    unknown = set(obj) - TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")

    grid = _section(obj, "grid", {"nx", "ny", "Lx", "Ly"}, required=True)
    nx = _number(grid, "nx", "grid", _REQUIRED, integer=True)
    ny = _number(grid, "ny", "grid", _REQUIRED, integer=True)
    for k, n in (("nx", nx), ("ny", ny)):
        if n < 4:
            raise ConfigError(f"grid.{k}", f"must be >= 4, got {n}")
    Lx = _number(grid, "Lx", "grid", 1.0, positive=True)
    Ly = _number(grid, "Ly", "grid", 1.0, positive=True)

    bc_mode = obj.get("bc_mode", "dirichlet")
    if bc_mode not in BC_MODES:
        raise ConfigError("bc_mode", f"must be one of {list(BC_MODES)}, got {bc_mode!r}")
    m = _number(obj, "m", "", 2, integer=True)
    if m not in (2, 3):
        raise ConfigError("m", f"director components must be 2 or 3, got {m}")

    params = _section(obj, "params", {"nu", "lambda", "gamma"})
    nu = _number(params, "nu", "params", 1.0, positive=True)
    lam = _number(params, "lambda", "params", 1.0, nonneg=True)
    gamma = _number(params, "gamma", "params", 1.0, positive=True)

    pot = _section(obj, "potential", {"kind", "eta", "kappa"}, required=True)
    kind = pot.get("kind")
    if kind == "gl":
        if "kappa" in pot:
            raise ConfigError("potential.kappa", "unknown key for kind 'gl'")
        potential = {"kind": "gl", "eta": _number(pot, "eta", "potential", _REQUIRED, positive=True)}
    elif kind == "quadratic":
        if "eta" in pot:
            raise ConfigError("potential.eta", "unknown key for kind 'quadratic'")
        potential = {"kind": "quadratic", "kappa": _number(pot, "kappa", "potential", _REQUIRED, positive=True)}
    else:
        raise ConfigError("potential.kind", f"must be 'gl' or 'quadratic', got {kind!r}")

    init = _section(obj, "initial", {"preset", "snapshot", "amplitude"}) or {"preset": "cavity"}
    if ("preset" in init) == ("snapshot" in init):
        raise ConfigError("initial", "give exactly one of 'preset' or 'snapshot'")
    if "preset" in init:
        if init["preset"] not in PRESETS:
            raise ConfigError("initial.preset", f"unknown preset {init['preset']!r}; choose from {list(PRESETS)}")
        initial = {"preset": init["preset"]}
        if "amplitude" in init:
            initial["amplitude"] = _number(init, "amplitude", "initial", nonneg=True)
    else:
        if "amplitude" in init:
            raise ConfigError("initial.amplitude", "only valid with a preset")
        if not isinstance(init["snapshot"], str):
            raise ConfigError("initial.snapshot", "expected a path string")
        initial = {"snapshot": init["snapshot"]}

    default_bd = {"kind": "trace"} if bc_mode == "dirichlet" else {"kind": "none"}
    bd = _section(obj, "boundary", {"kind", "value"}) or default_bd
    bkind = bd.get("kind")
    if bkind not in ("trace", "constant", "none"):
        raise ConfigError("boundary.kind", f"must be 'trace', 'constant' or 'none', got {bkind!r}")
    if bc_mode == "dirichlet" and bkind == "none":
        raise ConfigError("boundary.kind", "dirichlet mode requires director boundary data")
    if bc_mode != "dirichlet" and bkind != "none":
        raise ConfigError("boundary.kind", f"{bc_mode} mode takes no director trace data")
    boundary = {"kind": bkind}
    if bkind == "constant":
        val = bd.get("value")
        if not (isinstance(val, list) and len(val) == m and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val)):
            raise ConfigError("boundary.value", f"expected a list of {m} numbers")
        boundary["value"] = [float(x) for x in val]
    elif "value" in bd:
        raise ConfigError("boundary.value", "only valid for kind 'constant'")

    dt = _section(obj, "dt", {"policy", "value", "cap"}) or {"policy": "adaptive"}
    policy = dt.get("policy", "adaptive")
    if policy == "fixed":
        if "cap" in dt:
            raise ConfigError("dt.cap", "unknown key for policy 'fixed'")
        dt_spec = {"policy": "fixed", "value": _number(dt, "value", "dt", _REQUIRED, positive=True)}
    elif policy == "adaptive":
        if "value" in dt:
            raise ConfigError("dt.value", "unknown key for policy 'adaptive'")
        dt_spec = {"policy": "adaptive", "cap": _number(dt, "cap", "dt", 1e-2, positive=True)}
    else:
        raise ConfigError("dt.policy", f"must be 'fixed' or 'adaptive', got {policy!r}")

    t_max = _number(obj, "t_max", "", _REQUIRED, nonneg=True)
    residual_target = _number(obj, "residual_target", "", None, positive=True, allow_none=True)
    max_steps = _number(obj, "max_steps", "", None, integer=True, positive=True, allow_none=True)
    record_interval = _number(obj, "record_interval", "", 10, integer=True, positive=True)
    output_dir = obj.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir", "expected a string")
    seed_label = obj.get("seed_label", "")
    if not isinstance(seed_label, str):
        raise ConfigError("seed_label", "expected a string")

    sol = _section(obj, "solver", {"rel_tol", "max_iterations", "method"})
    solver = {
        "rel_tol": _number(sol, "rel_tol", "solver", 1e-10, positive=True),
        "max_iterations": _number(sol, "max_iterations", "solver", 500, integer=True, positive=True),
        "method": sol.get("method", "direct"),
    }
    if solver["rel_tol"] > 1e-4:
        raise ConfigError("solver.rel_tol", "must be <= 1e-4")
    if solver["method"] not in ("direct", "cg"):
        raise ConfigError("solver.method", f"must be 'direct' or 'cg', got {solver['method']!r}")

    return SimConfig(
        nx=nx, ny=ny, Lx=Lx, Ly=Ly, bc_mode=bc_mode, m=m, nu=nu, lam=lam, gamma=gamma,
        potential=potential, initial=initial, boundary=boundary, dt=dt_spec, t_max=t_max,
        residual_target=residual_target, max_steps=max_steps, record_interval=record_interval,
        output_dir=output_dir, seed_label=seed_label, solver=solver,
    )


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
