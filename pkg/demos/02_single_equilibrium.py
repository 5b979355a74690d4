"""
Running to rest and finding the equilibrium directly
====================================================

The coupled flow settles to a director at rest. The stationary problem can
also be solved with Newton's method, and both routes land on the same state.
"""

import math

from nemflow.config import from_dict
from nemflow.equilibrium import distance, solve_steady
from nemflow.grid import norm
from nemflow.presets import scenario
from nemflow.simulator import run

cfg = from_dict(scenario("cavity", t_max=50.0, residual_target=1e-6, dt={"policy": "adaptive", "cap": 1e-2}))
res = run(cfg)
final = res.state
print(f"stopped by {res.reason} at t={final.t:.3g} after {res.steps} steps")

# Newton from the final director
sol = solve_steady(final.director, cfg.grid(), final.boundary, cfg.make_potential())
print(f"{sol.method}: {sol.newton_iterations} iterations, residual {sol.residual_norm:.2e}")

d = distance(final.director, sol.d_inf, cfg.grid())
v = final.flow.v
print(f"|d(T) - d_inf|_H1 = {d['H1']:.2e}")
print(f"|v(T)|_H1        = {math.hypot(norm(v, 'L2'), norm(v, 'H1semi')):.2e}")
print(f"E(T) = {res.records[-1].total:.12f}   E_inf = {sol.total_energy(cfg.lam):.12f}")
