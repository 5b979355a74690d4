"""
Convergence orders from manufactured solutions
==============================================

Smooth exact fields are imposed through symbolic source terms. Grid halving
shows the spatial order and step halving shows the temporal order.
"""

from nemflow.mms import CASES, mms_run

for name in ("linear", "trig", "trig-time"):
    print(CASES[name].description)
    # the full trig table runs to 128 and takes about a minute
    levels = (16, 32, 64) if name == "trig" else None
    print(mms_run(name, levels=levels).format())
    print()
