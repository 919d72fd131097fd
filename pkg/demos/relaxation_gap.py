"""A relaxation that is not tight, and a certificate that notices.

Penalizing product in the outflow makes lower reaction rates attractive, so
the solver pushes T(n) below phi(n).  The residual check reports the gap and
the certificate declines to vouch for the solution.
"""

from biosocp.exactness import certify
from biosocp.program import build_transient
from biosocp.scenario import scenario_from_config
from biosocp.solver import solve

cfg = dict(
    name="penalized-product", mode="transient",
    units=dict(flow="m3/day", volume="m3", rate="1/day", time="day"),
    network=dict(tanks=[dict(name="t", volume=1.0, inflow=1.0, outflow=1.0)]),
    kinetics=dict(states=["S", "P"], tanks=[dict(
        reactions=[dict(model="monod", mu=2.0, k=1.0, substrate="S",
                        biomass={"constant": 1.0})],
        kappa=[[-2.0], [1.0]])]),
    objective=dict(type="substrate_outflow", eta=[0.0, 1.0]),
    influent=dict(fixed={"S": 4.0, "P": 0.0}),
    constraints={},
    horizon=dict(tau=10, delta=0.05, boundary="fixed", initial_state={"S": 1.0, "P": 1.0}),
)
sc = scenario_from_config(cfg)
sol = solve(build_transient(sc))
report = certify(sc, sol)
print(f"{sol.status}, objective {sol.objective:.6f}")
print(report.summary())
