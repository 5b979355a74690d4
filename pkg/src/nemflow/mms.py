"""Manufactured-solution verification of the coupled scheme.

Each case is a closed-form ``(v, P, d)`` on the unit square with no-slip walls
and the Dirichlet trace of ``d``.  The source terms that make it exact are
derived with sympy from the continuous equations::

    v_t + (v . grad) v - nu Lap v + grad P = -lam (grad d)^T (Lap d - f(d)) + S_v
    d_t + (v . grad) d = gamma (Lap d - f(d)) + S_d

``P`` plays the role of the solver's modified pressure.  Stationary cases are
solved for the discrete steady state, so the measured error is purely spatial;
the time-dependent case measures the temporal order by self-convergence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sy
from scipy.optimize import newton_krylov

from .director import director_step
from .flow import FlowState, flow_step
from .grid import BoundaryData, Grid, VelocityField, norm, velocity_inner
from .linalg import LinearSolveConfig
from .material import GinzburgLandau, Params, Quadratic, elastic_force

x, y, t = sy.symbols("x y t", real=True)
PI = sy.pi


@dataclass(frozen=True)
class MmsCase:
    name: str
    psi: sy.Expr
    P: sy.Expr
    d: tuple
    potential: object
    nu: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0
    steady: bool = True
    grids: tuple = (32, 64, 128)
    dts: tuple = ()
    t_final: float = 0.0
    description: str = ""


def _bump():
    return sy.sin(PI * x) * sy.sin(PI * y)


def _cases():
    lin = MmsCase(
        "linear",
        psi=sy.Integer(0),
        P=sy.Integer(0),
        d=(sy.Rational(3, 10) + x / 2 - y / 5, sy.Rational(1, 10) - 2 * x / 5 + 3 * y / 5),
        potential=Quadratic(1.0),
        grids=(8, 16, 32),
        description="linear director at rest; reproduced exactly",
    )
    alpha = PI * (x / 2 + y / 4) + sy.Rational(3, 10) * _bump()
    rho = 1 + sy.Rational(1, 5) * _bump()
    trig = MmsCase(
        "trig",
        psi=sy.Rational(1, 5) * _bump() ** 2,
        P=sy.cos(PI * x) * sy.cos(PI * y) / 4,
        d=(rho * sy.cos(alpha), rho * sy.sin(alpha)),
        potential=GinzburgLandau(0.5),
        description="smooth stationary fields, spatial order over grid halving",
    )
    s = 1 + sy.sin(2 * t) / 2
    alpha_t = PI * (x / 2 + y / 4) + sy.Rational(3, 10) * sy.sin(2 * t) * _bump()
    rho_t = 1 + sy.Rational(1, 5) * sy.cos(t) * _bump()
    trig_time = MmsCase(
        "trig-time",
        psi=sy.Rational(1, 5) * s * _bump() ** 2,
        P=sy.cos(t) * sy.cos(PI * x) * sy.cos(PI * y) / 4,
        d=(rho_t * sy.cos(alpha_t), rho_t * sy.sin(alpha_t)),
        potential=GinzburgLandau(0.5),
        steady=False,
        grids=(32,),
        dts=(0.02, 0.01, 0.005, 0.0025),
        t_final=0.5,
        description="time-dependent fields, temporal order by self-convergence",
    )
    return {c.name: c for c in (lin, trig, trig_time)}


CASES = _cases()


def _sym_potential_f(pot, d):
    if isinstance(pot, GinzburgLandau):
        s = d[0] ** 2 + d[1] ** 2 - 1
        return [s * c / sy.Float(pot.eta) ** 2 for c in d]
    return [sy.Float(pot.kappa) * c for c in d]


@lru_cache(maxsize=None)
def sources(name: str):
    """Numpy callables ``(x, y, t)`` for the exact fields and the two sources."""
    c = CASES[name]
    u = sy.diff(c.psi, y)
    v = -sy.diff(c.psi, x)
    d = list(c.d)
    lap = lambda e: sy.diff(e, x, 2) + sy.diff(e, y, 2)  # noqa: E731
    fd = _sym_potential_f(c.potential, d)
    mu = [lap(dk) - fk for dk, fk in zip(d, fd)]
    ela_x = -c.lam * sum(sy.diff(dk, x) * mk for dk, mk in zip(d, mu))
    ela_y = -c.lam * sum(sy.diff(dk, y) * mk for dk, mk in zip(d, mu))
    Su = sy.diff(u, t) + u * sy.diff(u, x) + v * sy.diff(u, y) - c.nu * lap(u) + sy.diff(c.P, x) - ela_x
    Sv = sy.diff(v, t) + u * sy.diff(v, x) + v * sy.diff(v, y) - c.nu * lap(v) + sy.diff(c.P, y) - ela_y
    Sd = [sy.diff(dk, t) + u * sy.diff(dk, x) + v * sy.diff(dk, y) - c.gamma * mk for dk, mk in zip(d, mu)]
    f = lambda e: _vectorize(sy.lambdify((x, y, t), e, "numpy"))  # noqa: E731
    return {
        "psi": f(c.psi),
        "u": f(u),
        "v": f(v),
        "d": [f(dk) for dk in d],
        "Su": f(Su),
        "Sv": f(Sv),
        "Sd": [f(s) for s in Sd],
    }


def _vectorize(fn):
    def g(X, Y, T):
        return np.broadcast_to(np.asarray(fn(X, Y, T), dtype=float), np.shape(X)).astype(float)

    return g


def _director(src, X, Y, T):
    return np.stack([dk(X, Y, T) for dk in src["d"]], axis=-1)


def _flow_source(src, grid, T):
    Xu, Yu = grid.u_coords()
    Xv, Yv = grid.v_coords()
    return VelocityField(src["Su"](Xu, Yu, T), src["Sv"](Xv, Yv, T), grid).enforce_bc()


def _exact_velocity(src, grid, T):
    Xu, Yu = grid.u_coords()
    Xv, Yv = grid.v_coords()
    return VelocityField(src["u"](Xu, Yu, T), src["v"](Xv, Yv, T), grid).enforce_bc()


def _setup(c: MmsCase, n: int):
    grid = Grid(n, n, 1.0, 1.0, "dirichlet")
    src = sources(c.name)
    params = Params(c.nu, c.lam, c.gamma, c.potential)
    boundary = BoundaryData.from_function(grid, lambda X, Y: _director(src, X, Y, 0.0))
    return grid, src, params, boundary


def _step(grid, src, params, boundary, flow, d, T, dt, linear):
    Xc, Yc = grid.cell_coords()
    t1 = T + dt
    Sd = np.stack([s(Xc, Yc, t1) for s in src["Sd"]], axis=-1)
    d_new = director_step(d, flow.v, dt, params, boundary, source=Sd)
    forcing = elastic_force(d_new, grid, params, boundary) + _flow_source(src, grid, t1)
    return flow_step(flow, forcing, dt, params, linear), d_new


def _initial(grid, src, T=0.0):
    Xc, Yc = grid.cell_coords()
    v = VelocityField.from_streamfunction(grid, lambda X, Y: src["psi"](X, Y, T))
    return FlowState(v), _director(src, Xc, Yc, T)


def solve_case_steady(c: MmsCase, n: int, dt: float = 0.01, tol: float = 1e-13, method: str = "krylov", max_steps: int = 20000):
    """Discrete steady state of the time stepper; returns ``(flow, d, grid, evaluations)``.

    ``march`` repeats the step until the increment drops below ``tol``.  The
    lagged pressure makes that slow on fine grids, so the default solves the
    fixed-point equation ``step(x) = x`` by Jacobian-free Newton-Krylov.  Both
    find the same discrete state.
    """
    grid, src, params, boundary = _setup(c, n)
    linear = LinearSolveConfig()
    flow, d = _initial(grid, src)
    if method == "march":
        for k in range(1, max_steps + 1):
            new_flow, new_d = _step(grid, src, params, boundary, flow, d, 0.0, dt, linear)
            change = max((new_flow.v - flow.v).max_abs(), float(np.max(np.abs(new_d - d))))
            flow, d = new_flow, new_d
            if change <= tol:
                return flow, d, grid, k
            if not math.isfinite(change):
                break
        raise RuntimeError(f"MMS case {c.name!r} on {n}^2 did not reach a steady state")
    if method != "krylov":
        raise ValueError(f"unknown method {method!r}")
    u0, v0 = flow.v.unique()
    cuts = np.cumsum([u0.size, v0.size, flow.p.size])

    def pack(fl, dd):
        u, v = fl.v.unique()
        return np.concatenate([u.ravel(), v.ravel(), fl.p.ravel(), dd.ravel()])

    def unpack(z):
        a, b, q, e = np.split(z, cuts)
        vel = VelocityField.zeros(grid)
        vel.u[1:-1] = a.reshape(u0.shape)
        vel.v[:, 1:-1] = b.reshape(v0.shape)
        q = q.reshape(grid.nx, grid.ny)
        return FlowState(vel, q - q.mean()), e.reshape(d.shape)

    count = [0]

    def residual(z):
        count[0] += 1
        fl, dd = unpack(z)
        return pack(*_step(grid, src, params, boundary, fl, dd, 0.0, dt, linear)) - z

    z = pack(flow, d)
    if np.max(np.abs(residual(z))) > tol:
        z = newton_krylov(residual, z, f_tol=tol, method="lgmres")
    flow, d = unpack(z)
    return flow, d, grid, count[0]


def run_case_transient(c: MmsCase, n: int, dt: float):
    grid, src, params, boundary = _setup(c, n)
    linear = LinearSolveConfig()
    flow, d = _initial(grid, src)
    steps = int(round(c.t_final / dt))
    if abs(steps * dt - c.t_final) > 1e-12:
        raise ValueError("dt must divide t_final")
    for k in range(steps):
        flow, d = _step(grid, src, params, boundary, flow, d, k * dt, dt, linear)
    return flow, d, grid


def _errors(flow, d, grid, src, T):
    Xc, Yc = grid.cell_coords()
    ev = flow.v - _exact_velocity(src, grid, T)
    ed = d - _director(src, Xc, Yc, T)
    return math.sqrt(velocity_inner(ev, ev)), norm(ed, "L2", grid)


@dataclass
class ConvergenceTable:
    case: str
    kind: str  # "space" or "time"
    levels: list  # grid sizes or dt values
    err_v: list
    err_d: list
    orders_v: list = field(default_factory=list)
    orders_d: list = field(default_factory=list)
    saturated: bool = False
    monotone: bool = True

    def rows(self):
        out = []
        for i, lev in enumerate(self.levels):
            ov = self.orders_v[i - 1] if i else None
            od = self.orders_d[i - 1] if i else None
            out.append({"level": lev, "err_v": self.err_v[i], "err_d": self.err_d[i], "order_v": ov, "order_d": od})
        return out

    def format(self) -> str:
        head = "n" if self.kind == "space" else "dt"
        lines = [f"{self.case} ({self.kind})", f"{head:>10} {'err_v':>12} {'order':>6} {'err_d':>12} {'order':>6}"]
        fmt = lambda o: "   sat" if o is None or not math.isfinite(o) else f"{o:6.3f}"  # noqa: E731
        for r in self.rows():
            lines.append(
                f"{r['level']:>10} {r['err_v']:12.4e} {fmt(r['order_v']) if r['order_v'] is not None else '':>6} "
                f"{r['err_d']:12.4e} {fmt(r['order_d']) if r['order_d'] is not None else '':>6}"
            )
        if self.saturated:
            lines.append("errors at roundoff: orders saturated")
        if not self.monotone:
            lines.append("WARNING: errors do not decrease monotonically")
        return "\n".join(lines)


def _orders(errs, floor):
    out = []
    for a, b in zip(errs[:-1], errs[1:]):
        out.append(math.log2(a / b) if a > floor and b > floor else math.nan)
    return out


def mms_run(case: str | MmsCase, levels=None, floor: float = 1e-12) -> ConvergenceTable:
    """Errors and observed orders for one case.

    Stationary cases refine the grid; the time-dependent case halves ``dt`` on a
    fixed grid and compares successive solutions with each other.
    """
    c = CASES[case] if isinstance(case, str) else case
    src = sources(c.name)
    if c.steady:
        levels = list(levels or c.grids)
        ev, ed = [], []
        for n in levels:
            flow, d, grid, _ = solve_case_steady(c, n)
            a, b = _errors(flow, d, grid, src, 0.0)
            ev.append(a)
            ed.append(b)
        kind = "space"
    else:
        levels = list(levels or c.dts)
        n = c.grids[0]
        sols = [run_case_transient(c, n, dt) for dt in levels]
        ev, ed = [], []
        for fine, coarse in zip(sols[1:], sols[:-1]):
            dv = coarse[0].v - fine[0].v
            ev.append(math.sqrt(velocity_inner(dv, dv)))
            ed.append(norm(coarse[1] - fine[1], "L2", coarse[2]))
        levels = levels[:-1]
        kind = "time"
    table = ConvergenceTable(c.name, kind, levels, ev, ed)
    table.orders_v = _orders(ev, floor)
    table.orders_d = _orders(ed, floor)
    table.saturated = max(ev + ed) <= floor
    table.monotone = table.saturated or all(
        b <= a for errs in (ev, ed) for a, b in zip(errs[:-1], errs[1:]) if a > floor
    )
    return table
