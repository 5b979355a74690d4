"""
How fast does the energy gap close?
===================================

With a convex potential the equilibrium is nondegenerate and the approach is
exponential. The log-log slope of the gap against its rate gives the
exponent theta directly; theta = 1/2 means exponential decay.
"""

import numpy as np

from nemflow.config import from_dict
from nemflow.equilibrium import GapSeries, estimate_theta, fit_decay, lyapunov_gap
from nemflow.presets import scenario
from nemflow.simulator import run

res = run(from_dict(scenario("convex")))
recs = res.records
gap = lyapunov_gap(recs, recs[-1].total)

fit = fit_decay(gap.t, gap.gap, target="gap", floor=100 * 1e-14 * gap.E0)
print(f"gap fit: {fit.model}, exponent {fit.exponent:.3f}, rms {fit.fit_rms:.2e}")
th = estimate_theta(gap)
print(f"theta = {th.theta:.4f}  95% interval ({th.ci[0]:.4f}, {th.ci[1]:.4f}) over t in {th.window}")

# the estimator on series with known answers
t = np.linspace(0, 5, 400)
for label, g in (("(1+t)^-2", (1 + t) ** -2.0), ("exp(-t)", np.exp(-t))):
    print(f"{label:>10}: theta = {estimate_theta(GapSeries(t, g, 1.0, 0.0)).theta:.4f}")
