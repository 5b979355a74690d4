import math

import numpy as np
import pytest

from nemflow.config import from_dict
from nemflow.flow import FlowState
from nemflow.grid import BoundaryData, Grid, VelocityField
from nemflow.linalg import NumericalFailure
from nemflow.material import GinzburgLandau, Params, Quadratic
from nemflow.presets import build, scenario
from nemflow.simulator import (
    DtPolicy,
    EnergyRecord,
    Model,
    SimState,
    StoppingCriteria,
    coupled_step,
    diagnostics,
    energy_audit,
    integrate,
    lyapunov_violations,
    stability_dt,
)


def _small(name="cavity", **kw):
    cfg = scenario(name, **kw)
    cfg["grid"] = dict(cfg["grid"], nx=16, ny=16)
    return from_dict(cfg)


def test_record_columns():
    assert EnergyRecord.columns() == (
        "t", "kinetic", "elastic", "potential", "total", "dissip_visc", "dissip_dir", "A", "v_H1",
        "residual_L2", "div_inf",
    )


def test_stopping_validation():
    with pytest.raises(ValueError):
        StoppingCriteria()
    with pytest.raises(ValueError):
        StoppingCriteria(t_max=-1.0)
    with pytest.raises(ValueError):
        DtPolicy("fixed")
    with pytest.raises(ValueError):
        DtPolicy("implicit")


def test_fixed_dt_times_are_drift_free():
    model, state = build(_small(t_max=0.05))
    res = integrate(model, state, StoppingCriteria(0.05), DtPolicy("fixed", 1e-3), 1)
    t = np.array([r.t for r in res.records])
    np.testing.assert_array_equal(t, np.arange(51) * 1e-3)
    assert res.reason == "t_max" and res.steps == 50


def test_final_step_is_shortened():
    model, state = build(_small(t_max=0.0105))
    res = integrate(model, state, StoppingCriteria(0.0105), DtPolicy("fixed", 1e-3), 1)
    assert res.state.t == 0.0105
    assert res.steps == 11


def test_max_steps_and_record_interval():
    model, state = build(_small())
    res = integrate(model, state, StoppingCriteria(max_steps=7), DtPolicy("fixed", 1e-3), 3)
    assert res.reason == "max_steps"
    assert [round(r.t, 12) for r in res.records] == [0.0, 0.003, 0.006, 0.007]
    with pytest.raises(ValueError):
        integrate(model, state, StoppingCriteria(max_steps=1), DtPolicy("fixed", 1e-3), 0)


def test_residual_target_stops_at_rest():
    g = Grid(8, 8, 1.0, 1.0, "dirichlet")
    b = BoundaryData.constant(g, [1.0, 0.0])
    model = Model(g, Params(potential=GinzburgLandau(0.3)), b)
    d = np.tile([1.0, 0.0], (8, 8, 1))
    st = SimState(0.0, FlowState(VelocityField.zeros(g)), d, b)
    res = integrate(model, st, StoppingCriteria(10.0, residual_target=1e-12))
    assert res.reason == "residual_target" and res.steps == 0


def test_diagnostics_of_known_state():
    # uniform unit director at rest: every energy and rate vanishes
    g = Grid(8, 8, 1.0, 1.0, "periodic")
    model = Model(g, Params(potential=GinzburgLandau(0.3)))
    d = np.tile([0.0, 1.0], (8, 8, 1))
    rec = diagnostics(SimState(0.0, FlowState(VelocityField.zeros(g)), d), model)
    assert rec.total == 0.0 and rec.A == 0.0 and rec.v_H1 == 0.0
    # quadratic potential, d = 1 in one component: potential energy lam kappa/2 * area
    model = Model(g, Params(lam=2.0, potential=Quadratic(3.0)))
    rec = diagnostics(SimState(0.0, FlowState(VelocityField.zeros(g)), np.tile([1.0, 0.0], (8, 8, 1))), model)
    assert rec.potential == pytest.approx(2.0 * 3.0 / 2)
    assert rec.residual_L2 == pytest.approx(3.0)
    assert rec.dissip_dir == pytest.approx(2.0 * 9.0)


def test_audit_first_order_and_lyapunov():
    cfg = _small(t_max=0.1)
    r1 = integrate(*build(cfg), StoppingCriteria(0.1), DtPolicy("fixed", 2e-3), 1)
    r2 = integrate(*build(cfg), StoppingCriteria(0.1), DtPolicy("fixed", 1e-3), 1)
    a1, a2 = energy_audit(r1.records), energy_audit(r2.records)
    assert 1.6 < a1.integrated / a2.integrated < 2.5
    assert len(lyapunov_violations(r2.records, 1e-12)) == 0
    # numerical dissipation: the signed residual is negative
    assert a2.signed_integral < 0


def test_audit_rejects_irregular_records():
    model, state = build(_small())
    res = integrate(model, state, StoppingCriteria(max_steps=6), DtPolicy("fixed", 1e-3), 4)
    with pytest.raises(ValueError):
        energy_audit(res.records)
    with pytest.raises(ValueError):
        energy_audit(res.records[:1])


def test_adaptive_dt_quantized_and_capped():
    model, state = build(_small())
    dt = stability_dt(state, model, 1e-2)
    assert dt <= 1e-2
    res = integrate(model, state, StoppingCriteria(0.1), DtPolicy("adaptive", cap=1e-2), 1)
    steps = np.diff([r.t for r in res.records])
    for s in steps[:-1]:
        k = math.log2(1e-2 / s)
        assert abs(k - round(k)) < 1e-9


def test_energy_growth_triggers_halving():
    # explicit reaction far beyond its stability limit: energy grows, dt halves
    g = Grid(8, 8, 1.0, 1.0, "periodic")
    model = Model(g, Params(lam=1.0, potential=GinzburgLandau(0.05)))
    rng = np.random.default_rng(1)
    d = 1.0 + 0.3 * rng.normal(size=(8, 8, 2))
    st = SimState(0.0, FlowState(VelocityField.zeros(g)), d)
    res = integrate(model, st, StoppingCriteria(0.02), DtPolicy("fixed", 1e-2), 1, max_halvings=8)
    assert res.dt_halvings > 0
    E = [r.total for r in res.records]
    assert all(b <= a * (1 + 1e-6) for a, b in zip(E, E[1:]))


def test_persistent_growth_raises_with_state():
    g = Grid(8, 8, 1.0, 1.0, "periodic")
    model = Model(g, Params(lam=1.0, potential=GinzburgLandau(0.01)))
    rng = np.random.default_rng(1)
    st = SimState(0.0, FlowState(VelocityField.zeros(g)), 1.0 + rng.normal(size=(8, 8, 2)))
    with pytest.raises(NumericalFailure) as info:
        integrate(model, st, StoppingCriteria(1.0), DtPolicy("fixed", 1.0), 1, max_halvings=1)
    assert info.value.state.t == 0.0


def test_coupled_step_conserves_energy_exchange():
    # with nu and gamma dissipation accounted, inviscid limits still lose energy only
    model, state = build(_small())
    new = coupled_step(state, 1e-3, model)
    assert diagnostics(new, model).total < diagnostics(state, model).total


def test_rest_state_runs_without_spurious_halving():
    # zero energy: roundoff-level changes must not count as growth
    model, state = build(from_dict(scenario("cavity", initial={"preset": "uniform"}, t_max=0.01)))
    res = integrate(model, state, StoppingCriteria(0.01), DtPolicy("fixed", 1e-3), 1)
    assert res.reason == "t_max" and res.dt_halvings == 0
