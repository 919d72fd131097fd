"""Small scenario configs shared by the test modules."""

import copy

from biosocp import presets
from biosocp.scenario import scenario_from_config


def single_tank(delta=0.1, tau=1, outflow=1.0, inflow=0.0, volume=1.0, x0=1.0,
                xin=0.0, reactions=(), kappa=None, states=("S",), eta=(1.0,),
                objective=None, mode="transient", boundary="fixed"):
    """One tank; with no reactions the dynamics are linear."""
    cfg = dict(
        name="single-tank", mode=mode,
        units=dict(flow="m3/day", volume="m3", rate="1/day", time="day"),
        network=dict(tanks=[dict(name="t", volume=volume, inflow=inflow, outflow=outflow)]),
        kinetics=dict(states=list(states), tanks=[dict(reactions=list(reactions),
                                                       kappa=kappa if kappa is not None else [])]),
        objective=objective or dict(type="substrate_outflow", eta=list(eta)),
        influent=dict(fixed={k: xin for k in states}),
        constraints={},
    )
    if mode == "transient":
        cfg["horizon"] = dict(tau=tau, delta=delta, boundary=boundary,
                              initial_state={k: x0 for k in states})
    return cfg


def monod_tank(delta=0.05, tau=10, mu=2.0, k=1.0, biomass=1.0, yield_=0.5, inflow=1.0,
               s_in=4.0, objective=None):
    rx = dict(model="monod", mu=mu, k=k, substrate="S", biomass={"constant": biomass})
    return single_tank(delta=delta, tau=tau, outflow=inflow, inflow=inflow, x0=1.0,
                       xin=s_in, reactions=[rx], kappa=[[-1.0 / yield_], [1.0]],
                       states=("S", "P"), eta=(1.0, 0.0), objective=objective)


def two_tank_composite(kind="non_interactive", delta=0.05, tau=8):
    """Two tanks with diffusion and a composite two-substrate growth rate."""
    mon = lambda sub, mu, k: dict(model="monod", mu=mu, k=k, substrate=sub,
                                  biomass={"constant": 1.5})
    rx = dict(model=kind, a=mon("A", 2.0, 1.0), b=mon("B", 3.0, 2.0))
    tanks = [dict(reactions=[rx], kappa=[[-1.0], [-0.5], [1.0]])] * 2
    return dict(
        name=f"two-tank-{kind}", mode="transient",
        units=dict(flow="m3/day", volume="m3", rate="1/day", time="day"),
        network=dict(tanks=[dict(name="a", volume=1.0, inflow=1.0, outflow=0.5),
                            dict(name="b", volume=2.0, inflow=0.0, outflow=0.5)],
                     flows=[{"from": 0, "to": 1, "rate": 0.5}],
                     diffusion=[dict(between=[0, 1], rate=0.2)]),
        kinetics=dict(states=["A", "B", "P"], tanks=tanks),
        objective=dict(type="substrate_outflow", eta=[1.0, 1.0, 0.0]),
        influent=dict(fixed={"A": [3.0, 0.0], "B": [4.0, 0.0], "P": 0.0}),
        constraints={},
        horizon=dict(tau=tau, delta=delta, boundary="fixed",
                     initial_state={"A": 1.0, "B": 1.0, "P": 0.5}),
    )


def certificate_suite():
    """Transient scenarios with a fixed initial state, fixed influent and no extra rows."""
    cfgs = [
        presets.gradostat_config(mode="transient", model="contois"),
        presets.gradostat_config(mode="transient", model="monod"),
        presets.gradostat_config(mode="transient", model="contois", bleed=0.2, diffusion=0.3),
        presets.gradostat_config(mode="transient", model="monod", n_tanks=4, bleed=0.1),
        monod_tank(),
        two_tank_composite("non_interactive"),
        two_tank_composite("geometric"),
    ]
    return [scenario_from_config(copy.deepcopy(c)) for c in cfgs]
