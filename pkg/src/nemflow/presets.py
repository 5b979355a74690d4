"""Named initial/boundary data and the reference scenario configurations."""
from __future__ import annotations

import copy

import numpy as np

from .flow import FlowState
from .grid import BoundaryData, Grid, VelocityField

# Full configs of the bundled scenarios; acceptance runs start from these.
SCENARIOS = {
    "cavity": {
        "grid": {"nx": 64, "ny": 64, "Lx": 1.0, "Ly": 1.0},
        "bc_mode": "dirichlet",
        "params": {"nu": 1.0, "lambda": 1.0, "gamma": 1.0},
        "potential": {"kind": "gl", "eta": 0.25},
        "initial": {"preset": "cavity"},
        "boundary": {"kind": "trace"},
        "dt": {"policy": "fixed", "value": 1e-3},
        "t_max": 1.0,
        "record_interval": 1,
    },
    "taylor-green": {
        "grid": {"nx": 64, "ny": 64, "Lx": 2 * np.pi, "Ly": 2 * np.pi},
        "bc_mode": "periodic",
        "params": {"nu": 0.1, "lambda": 0.0, "gamma": 1.0},
        "potential": {"kind": "gl", "eta": 1.0},
        "initial": {"preset": "taylor-green"},
        "boundary": {"kind": "none"},
        "dt": {"policy": "fixed", "value": 1e-3},
        "t_max": 1.0,
        "record_interval": 10,
    },
    "kink": {
        "grid": {"nx": 64, "ny": 16, "Lx": 2.0, "Ly": 0.5},
        "bc_mode": "dirichlet",
        "params": {"nu": 1.0, "lambda": 1.0, "gamma": 1.0},
        "potential": {"kind": "gl", "eta": 0.2},
        "initial": {"preset": "kink"},
        "boundary": {"kind": "trace"},
        "dt": {"policy": "fixed", "value": 1e-3},
        "t_max": 1.0,
        "record_interval": 10,
    },
    "convex": {
        "grid": {"nx": 32, "ny": 32, "Lx": 1.0, "Ly": 1.0},
        "bc_mode": "dirichlet",
        "params": {"nu": 1.0, "lambda": 1.0, "gamma": 1.0},
        "potential": {"kind": "quadratic", "kappa": 1.0},
        "initial": {"preset": "convex"},
        "boundary": {"kind": "trace"},
        "dt": {"policy": "fixed", "value": 2e-3},
        "t_max": 1.5,
        "record_interval": 1,
    },
    "freeslip-box": {
        "grid": {"nx": 64, "ny": 64, "Lx": 1.0, "Ly": 1.0},
        "bc_mode": "free_slip",
        "params": {"nu": 1.0, "lambda": 1.0, "gamma": 1.0},
        "potential": {"kind": "gl", "eta": 0.25},
        "initial": {"preset": "freeslip-box"},
        "boundary": {"kind": "none"},
        "dt": {"policy": "fixed", "value": 1e-3},
        "t_max": 1.0,
        "record_interval": 1,
    },
}


def scenario(name: str, **overrides) -> dict:
    """A deep copy of a bundled scenario config with top-level keys overridden."""
    cfg = copy.deepcopy(SCENARIOS[name])
    cfg.update(overrides)
    return cfg


def _bump(x, y, Lx, Ly):
    return np.sin(np.pi * x / Lx) * np.sin(np.pi * y / Ly)


def _embed(d2, m):
    if m == 2:
        return d2
    return np.concatenate([d2, np.zeros(d2.shape[:-1] + (1,))], axis=-1)


def _angle_director(x, y, Lx, Ly, amp, m):
    """Unit-trace director rotating smoothly along the boundary, perturbed inside."""
    base = 0.25 * np.pi * (x / Lx + y / Ly)
    alpha = base + amp * _bump(x, y, Lx, Ly)
    rho = 1.0 - 0.3 * amp * np.sin(np.pi * x / Lx) * np.sin(2 * np.pi * y / Ly)
    return _embed(np.stack([rho * np.cos(alpha), rho * np.sin(alpha)], axis=-1), m)


def director_function(name: str, grid: Grid, m: int, potential: dict, amplitude: float | None = None):
    """``d0(x, y)``; for Dirichlet scenarios its boundary values are the trace data."""
    Lx, Ly = grid.Lx, grid.Ly
    if name in ("cavity", "convex"):
        amp = 1.0 if amplitude is None else amplitude
        return lambda x, y: _angle_director(x, y, Lx, Ly, amp, m)
    if name == "freeslip-box":
        # unit length, zero normal derivative at the walls
        amp = 0.5 if amplitude is None else 0.5 * amplitude

        def d0(x, y):
            alpha = amp * np.cos(np.pi * x / Lx) * np.cos(np.pi * y / Ly)
            return _embed(np.stack([np.cos(alpha), np.sin(alpha)], axis=-1), m)

        return d0
    if name == "kink":
        eta = potential.get("eta", 0.2)
        amp = 0.3 if amplitude is None else amplitude

        def d0(x, y):
            prof = np.tanh((x - 0.5 * Lx) / (np.sqrt(2.0) * eta))
            bump = _bump(x, y, Lx, Ly)
            return _embed(np.stack([prof + amp * bump * np.sin(np.pi * x / Lx), amp * bump], axis=-1), m)

        return d0
    if name in ("taylor-green", "uniform"):
        e1 = np.zeros(m)
        e1[0] = 1.0
        return lambda x, y: np.broadcast_to(e1, np.shape(x) + (m,)).copy()
    raise KeyError(name)


def velocity_function(name: str, grid: Grid, amplitude: float | None = None):
    """Stream function of the initial velocity, or ``None`` for a fluid at rest."""
    Lx, Ly = grid.Lx, grid.Ly
    if name in ("cavity", "convex"):
        a = 0.05 if amplitude is None else 0.05 * amplitude
        return lambda x, y: a * _bump(x, y, Lx, Ly) ** 2
    if name == "freeslip-box":
        a = 0.05 if amplitude is None else 0.05 * amplitude
        return lambda x, y: a * _bump(x, y, Lx, Ly) * (1.0 + 0.5 * np.cos(np.pi * x / Lx))
    if name == "taylor-green":
        kx, ky = 2 * np.pi / Lx, 2 * np.pi / Ly
        return lambda x, y: np.sin(kx * x) * np.sin(ky * y) / ky
    return None


_COMPATIBLE = {
    "cavity": ("dirichlet",),
    "convex": ("dirichlet",),
    "kink": ("dirichlet",),
    "freeslip-box": ("free_slip",),
    "taylor-green": ("periodic",),
    "uniform": ("dirichlet", "free_slip", "periodic"),
}


def build(config, snapshot_state=None):
    """Model and initial :class:`~nemflow.simulator.SimState` for a config."""
    from .io import snapshot_read
    from .simulator import Model, SimState

    grid = config.grid()
    params = config.params()
    m = config.m
    if "snapshot" in config.initial:
        state = snapshot_state if snapshot_state is not None else snapshot_read(config.initial["snapshot"])
        if state.flow.grid != grid:
            raise ValueError("snapshot grid does not match the configured grid")
        preset = None
    else:
        preset = config.initial["preset"]
        if grid.bc_mode not in _COMPATIBLE[preset]:
            raise ValueError(f"preset {preset!r} does not support bc_mode {grid.bc_mode!r}")
        amp = config.initial.get("amplitude")
        d0 = director_function(preset, grid, m, config.potential, amp)
        X, Y = grid.cell_coords()
        psi = velocity_function(preset, grid, amp)
        v = VelocityField.zeros(grid) if psi is None else VelocityField.from_streamfunction(grid, psi)
        state = SimState(0.0, FlowState(v), np.ascontiguousarray(d0(X, Y)))
    boundary = None
    if grid.bc_mode == "dirichlet":
        kind = config.boundary["kind"]
        if kind == "constant":
            boundary = BoundaryData.constant(grid, config.boundary["value"])
        elif preset is not None:
            boundary = BoundaryData.from_function(grid, director_function(preset, grid, m, config.potential, config.initial.get("amplitude")))
        else:
            boundary = state.boundary
            if boundary is None:
                raise ValueError("a snapshot without trace data needs boundary.kind = 'constant'")
    state.boundary = boundary
    return Model(grid, params, boundary, config.linear()), state
