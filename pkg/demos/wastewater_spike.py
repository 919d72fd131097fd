"""Allocate a synthetic influent spike across three treatment plants.

Biomass in plants 1 and 3 cycles in antiphase with plant 2.  When the spike
arrives with plants 1 and 3 at the BOD limit, the optimizer routes the
overflow to plant 2.
"""

import numpy as np

from biosocp import presets
from biosocp.exactness import residual_exactness
from biosocp.program import build_transient
from biosocp.solver import solve

tau = 96
sc = presets.wastewater(tau=tau)
sol = solve(build_transient(sc))
res = residual_exactness(sol, sc.kinetics)
print(f"{sol.status}, {sol.iterations} iterations, exact in "
      f"{int(res.exact_steps.sum())}/{tau} steps")

load = sc.network.network(1).inflow_rates * sol.xin[:, 0::4]
share = load / load.sum(axis=1, keepdims=True)
bod = sol.xi[:, 0::4]
spike = round(0.75 * tau)
print("\nstep  BOD plant 1/2/3          share plant 1/2/3")
for n in range(spike - 24, spike + 6):
    mark = " <- spike" if n == spike else ""
    print(f"{n:4d}  {bod[n, 0]:6.1f} {bod[n, 1]:6.1f} {bod[n, 2]:6.1f}    "
          f"{share[n, 0]:.3f} {share[n, 1]:.3f} {share[n, 2]:.3f}{mark}")
