"""Coupled time loop, per-step energy records and the discrete energy-law audit."""
from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass, fields, replace

import numpy as np

from .director import DirectorStepConfig, director_step
from .flow import FlowState, flow_step
from .grid import (
    BoundaryData,
    Grid,
    VelocityField,
    apply_bc,
    divergence,
    grad_sq,
    velocity_grad_sq,
    velocity_inner,
)
from .linalg import LinearSolveConfig, NumericalFailure
from .material import Params, chemical_potential, elastic_force

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Model:
    """Everything that stays fixed during a run."""

    grid: Grid
    params: Params
    boundary: BoundaryData | None = None
    linear: LinearSolveConfig = LinearSolveConfig()

    def director_config(self) -> DirectorStepConfig:
        return DirectorStepConfig(rel_tol=self.linear.rel_tol)


@dataclass
class SimState:
    """Time, flow and director; ``boundary`` travels along only for snapshots."""

    t: float
    flow: FlowState
    director: np.ndarray
    boundary: BoundaryData | None = None

    def copy(self) -> "SimState":
        return SimState(self.t, self.flow.copy(), self.director.copy(), self.boundary)

    @property
    def v(self) -> VelocityField:
        return self.flow.v


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    kinetic: float
    elastic: float
    potential: float
    total: float
    dissip_visc: float
    dissip_dir: float
    A: float
    v_H1: float
    residual_L2: float
    div_inf: float

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple[float, ...]:
        return astuple(self)


@dataclass(frozen=True)
class StoppingCriteria:
    t_max: float = math.inf
    residual_target: float | None = None
    max_steps: int | None = None

    def __post_init__(self):
        if math.isinf(self.t_max) and self.residual_target is None and self.max_steps is None:
            raise ValueError("at least one stopping bound must be finite")
        if self.t_max < 0:
            raise ValueError("t_max must be non-negative")


@dataclass(frozen=True)
class DtPolicy:
    """``fixed`` uses ``value``; ``adaptive`` uses :func:`stability_dt` capped at ``cap``."""

    kind: str = "adaptive"
    value: float | None = None
    cap: float = 1e-2

    def __post_init__(self):
        if self.kind not in ("fixed", "adaptive"):
            raise ValueError(f"unknown dt policy {self.kind!r}")
        if self.kind == "fixed" and not (self.value and self.value > 0):
            raise ValueError("fixed dt policy needs a positive value")
        if not self.cap > 0:
            raise ValueError("dt cap must be positive")


def diagnostics(state: SimState, model: Model) -> EnergyRecord:
    p = model.params
    g = model.grid
    v = state.flow.v
    P = apply_bc(state.director, g, model.boundary)
    mu = chemical_potential(P, g, p.potential)
    kin = 0.5 * velocity_inner(v, v)
    ela = 0.5 * p.lam * grad_sq(P, g)
    pot = p.lam * float(np.sum(p.potential.F(state.director).ravel())) * g.cell_area
    gv2 = velocity_grad_sq(v)
    mu2 = float(np.dot(mu.ravel(), mu.ravel())) * g.cell_area
    return EnergyRecord(
        t=float(state.t),
        kinetic=kin,
        elastic=ela,
        potential=pot,
        total=kin + ela + pot,
        dissip_visc=p.nu * gv2,
        dissip_dir=p.lam * p.gamma * mu2,
        A=gv2 + mu2,
        v_H1=math.sqrt(2.0 * kin + gv2),
        residual_L2=math.sqrt(mu2),
        div_inf=float(np.max(np.abs(divergence(v)))),
    )


def coupled_step(state: SimState, dt: float, model: Model) -> SimState:
    """Director first (transported by the old velocity), then the flow forced by the new director."""
    p = model.params
    d_new = director_step(
        state.director, state.flow.v, dt, p, model.boundary, config=model.director_config()
    )
    forcing = elastic_force(d_new, model.grid, p, model.boundary) if p.lam > 0 else None
    flow = flow_step(state.flow, forcing, dt, p, model.linear)
    if not (np.isfinite(d_new).all() and flow.v.all_finite() and np.isfinite(flow.p).all()):
        raise NumericalFailure(f"non-finite state after step at t={state.t:.6g}")
    return SimState(state.t + dt, flow, d_new, state.boundary)


def stability_dt(state: SimState, model: Model, cap: float = math.inf) -> float:
    """Largest step allowed by advection (CFL 0.5) and the explicit reaction term."""
    vmax = state.flow.v.max_abs()
    adv = 0.5 * model.grid.h / vmax if vmax > 0 else math.inf
    reac = model.params.potential.reaction_dt(model.params.gamma)
    return min(adv, reac, cap)


@dataclass
class RunResult:
    records: list[EnergyRecord]
    state: SimState
    reason: str
    steps: int = 0
    dt_halvings: int = 0


def integrate(
    model: Model,
    state: SimState,
    stopping: StoppingCriteria,
    dt_policy: DtPolicy = DtPolicy(),
    record_interval: int = 10,
    max_halvings: int = 5,
    growth_tol: float = 1e-6,
) -> RunResult:
    """Advance ``state`` until a stopping criterion fires.

    A step that raises the total energy by more than ``growth_tol`` (relative)
    is retried with half the step, at most ``max_halvings`` times in a run.
    """
    if record_interval < 1:
        raise ValueError("record_interval must be >= 1")
    rec = diagnostics(state, model)
    records = [rec]
    # roundoff allowance, so a state at rest with zero energy does not count as growth
    floor = 16 * np.finfo(float).eps * max(abs(rec.total), model.grid.Lx * model.grid.Ly)
    t0 = state.t
    t_end = t0 + stopping.t_max
    scale = 1.0
    halvings = 0
    step = 0
    fixed_steps = 0  # steps taken at the current fixed dt, for drift-free times
    fixed_t0 = t0

    def done(r: EnergyRecord, s: SimState, n: int):
        if stopping.residual_target is not None and r.v_H1 + r.residual_L2 <= stopping.residual_target:
            return "residual_target"
        if s.t >= t_end - 1e-12 * max(1.0, abs(t_end)):
            return "t_max"
        if stopping.max_steps is not None and n >= stopping.max_steps:
            return "max_steps"
        return None

    reason = done(rec, state, 0)
    while reason is None:
        if dt_policy.kind == "fixed":
            dt = dt_policy.value * scale
        else:
            limit = stability_dt(state, model, dt_policy.cap) * scale
            # powers of two below the cap, so factorizations get reused
            k = max(0, math.ceil(math.log2(dt_policy.cap / limit) - 1e-12))
            dt = dt_policy.cap * 2.0**-k
        remaining = t_end - state.t
        last = dt >= remaining - 1e-9 * dt
        if last and abs(dt - remaining) > 1e-9 * dt:
            dt = remaining
        try:
            new = coupled_step(state, dt, model)
        except NumericalFailure as exc:
            exc.state = state
            raise
        new_rec = diagnostics(new, model)
        if new_rec.total > rec.total + growth_tol * abs(rec.total) + floor:
            if halvings >= max_halvings:
                err = NumericalFailure(
                    f"energy growth at t={state.t:.6g} persists after {max_halvings} dt halvings"
                )
                err.state = state
                raise err
            halvings += 1
            scale *= 0.5
            fixed_steps, fixed_t0 = 0, state.t
            log.warning("energy increased at t=%.6g, halving dt (now x%g)", state.t, scale)
            continue
        step += 1
        if dt_policy.kind == "fixed" and not last:
            fixed_steps += 1
            new.t = fixed_t0 + fixed_steps * dt_policy.value * scale
            if abs(new.t - t_end) <= 1e-9 * dt:
                new.t = t_end
            new_rec = replace(new_rec, t=new.t)
        elif last:
            new.t = t_end
            new_rec = replace(new_rec, t=new.t)
        state, rec = new, new_rec
        reason = done(rec, state, step)
        if step % record_interval == 0 or reason is not None:
            records.append(rec)
    return RunResult(records, state, reason, steps=step, dt_halvings=halvings)


@dataclass
class AuditReport:
    dt: float
    residuals: np.ndarray
    integrated: float
    signed_integral: float
    max_residual: float
    energy_drop: float

    @property
    def relative(self) -> float:
        return self.integrated / self.energy_drop if self.energy_drop > 0 else math.inf

    def summary(self) -> dict:
        return {
            "dt": self.dt,
            "steps": int(self.residuals.size),
            "integrated_residual": self.integrated,
            "signed_integral": self.signed_integral,
            "max_residual": self.max_residual,
            "energy_drop": self.energy_drop,
            "relative_to_drop": self.relative,
        }


def energy_audit(records, rel_spacing_tol: float = 1e-9) -> AuditReport:
    """Per-step residual of the discrete energy law.

    ``r_n = (E_{n+1} - E_n) / dt + D_{n+1}`` with ``D = nu |grad v|^2 + lam gamma |Lap d - f|^2``.
    Records must come from consecutive steps of equal size.
    """
    if len(records) < 2:
        raise ValueError("the audit needs at least two consecutive records")
    t = np.array([r.t for r in records])
    E = np.array([r.total for r in records])
    D = np.array([r.dissip_visc + r.dissip_dir for r in records])
    dts = np.diff(t)
    dt = float(np.mean(dts))
    if dt <= 0 or np.max(np.abs(dts - dt)) > rel_spacing_tol * dt + 1e-14 * max(1.0, float(np.max(np.abs(t)))):
        raise ValueError("records are not uniformly spaced in time; the per-step audit needs record_interval=1 and fixed dt")
    r = np.diff(E) / dts + D[1:]
    return AuditReport(
        dt=dt,
        residuals=r,
        integrated=float(np.sum(np.abs(r) * dts)),
        signed_integral=float(np.sum(r * dts)),
        max_residual=float(np.max(np.abs(r))),
        energy_drop=float(E[0] - E[-1]),
    )


def lyapunov_violations(records, tol: float):
    """Indices where the total energy rose by more than ``tol`` in one record interval."""
    E = np.array([r.total for r in records])
    return np.nonzero(np.diff(E) > tol)[0]


def run(config, *, snapshot_state=None) -> RunResult:
    """Build the model and initial state described by a :class:`~nemflow.config.SimConfig` and integrate."""
    from .presets import build

    model, state = build(config, snapshot_state=snapshot_state)
    return integrate(
        model,
        state,
        StoppingCriteria(config.t_max, config.residual_target, config.max_steps),
        config.dt_policy(),
        config.record_interval,
    )
