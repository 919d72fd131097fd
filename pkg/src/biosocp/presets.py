"""Reference scenarios: the three-plant wastewater system and a gradostat chain."""

from __future__ import annotations

import numpy as np

from .scenario import scenario_from_config

STATES = ["BOD", "NH4", "NO2", "NO3"]

# Growth parameters of the three plants (rates per day, half-saturations mg/L).
GROWTH_TABLE = {
    "mu_BOD": (3.99, 2.56, 1.93),
    "mu_NH4": (0.84, 0.83, 0.89),
    "mu_NO2": (1.68, 1.27, 0.92),
    "mu_NO3": (1.21, 1.38, 0.85),
    "K_BOD": (13.67, 11.65, 14.26),
    "K_NH4": (6.59, 14.98, 8.53),
    "K_NO2": (2.46, 1.15, 2.55),
    "K_NO3": (1.40, 2.69, 4.20),
    "y_NH4_NO2": (0.28, 0.25, 0.27),
    "y_NO2_NO3": (0.68, 0.64, 0.70),
}
PLANT_INFLOW_M3_PER_S = (0.1, 0.4, 0.2)
PLANT_VOLUME_M3 = 1000.0
# Outflow weights as published carry a trailing zero for a fifth entry.
OUTFLOW_WEIGHTS = (2.0, 2.0, 0.3, 0.1, 0.0)

# Synthetic stand-in for the measured influent (concentrations in mg/L of the
# total inflow): one diurnal cycle per 96 steps plus a storm spike.
DEFAULT_INFLUENT = {
    "BOD": dict(base=120.0, diurnal_amplitude=0.15, period=96, phase=0.0,
                spike_step=None, spike_width=3.0, spike_height=0.6, noise=0.0, seed=0),
    "NH4": dict(base=28.0, diurnal_amplitude=0.15, period=96, phase=0.0,
                spike_step=None, spike_width=3.0, spike_height=0.6, noise=0.0, seed=1),
}


def stoichiometry(plant: int) -> list:
    y1 = GROWTH_TABLE["y_NH4_NO2"][plant]
    y2 = GROWTH_TABLE["y_NO2_NO3"][plant]
    return [[-1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 1.0 / y1, -1.0, 0.0],
            [0.0, 0.0, 1.0 / y2, -1.0]]


def wastewater_config(tau: int = 96, paper_units: bool = False, influent: dict = None,
                      spike_step: int = None, bod_limit: float = 150.0,
                      nh4_limit: float = 60.0) -> dict:
    """Config dict of the wastewater allocation problem.

    Plant ``i`` (numbered from 1) sees biomass ``100 (1 + (-1)^i sin(10 pi n / tau))``
    for every reaction.  The default spike sits at 75% of the horizon.
    """
    influent = {k: dict(v) for k, v in (influent or DEFAULT_INFLUENT).items()}
    if spike_step is None:
        spike_step = int(round(0.75 * tau))
    for params in influent.values():
        if params.get("spike_step") is None:
            params["spike_step"] = spike_step
    tanks, kin_tanks = [], []
    for p in range(3):
        tanks.append(dict(name=f"plant{p + 1}", volume=PLANT_VOLUME_M3,
                          inflow=PLANT_INFLOW_M3_PER_S[p], outflow=PLANT_INFLOW_M3_PER_S[p]))
        biomass = {"sinusoid": dict(mean=100.0, amplitude=100.0, cycles=5,
                                    sign=(-1) ** (p + 1))}
        reactions = [dict(model="monod", mu=GROWTH_TABLE[f"mu_{sub}"][p],
                          k=GROWTH_TABLE[f"K_{sub}"][p], substrate=sub, biomass=biomass)
                     for sub in STATES]
        kin_tanks.append(dict(reactions=reactions, kappa=stoichiometry(p)))
    units = dict(flow="m3/s", volume="m3", rate="1/day", time="min")
    delta = 15.0
    if paper_units:
        units["paper_units"] = True
        delta = 1.0
    return dict(
        name="wastewater",
        mode="transient",
        units=units,
        horizon=dict(tau=tau, delta=delta, boundary="periodic"),
        network=dict(tanks=tanks),
        kinetics=dict(states=list(STATES), tanks=kin_tanks,
                      reaction_names=["BOD", "NH4", "NO2", "NO3"]),
        objective=dict(type="substrate_outflow", eta=[list(OUTFLOW_WEIGHTS)] * 3),
        influent=dict(fixed={"NO2": 3.0, "NO3": 10.0}, free=["BOD", "NH4"]),
        constraints=dict(
            upper_bounds={"BOD": bod_limit, "NH4": nh4_limit},
            allocations=[dict(entry=e, totals={"synthetic": influent[e]}) for e in ("BOD", "NH4")]),
    )


def wastewater(**kwargs):
    return scenario_from_config(wastewater_config(**kwargs))


def gradostat_config(n_tanks: int = 3, model: str = "contois", mode: str = "steady",
                     mu: float = 3.0, k: float = 0.5, yield_: float = 0.5,
                     flow: float = 1.0, volume: float = 1.0, diffusion: float = 0.0,
                     substrate_in: float = 10.0, biomass: float = 2.0,
                     eta=(1.0, 0.0), tau: int = 20, delta: float = 0.05,
                     bleed: float = 0.0) -> dict:
    """A chain of chemostats fed at the first tank, drained at the last.

    State is (S, X) with one growth reaction per tank and stoichiometry
    ``[-1/y, 1]``.  ``model="monod"`` uses a constant exogenous biomass.
    With ``bleed > 0`` every upstream tank also discharges ``bleed`` and
    passes the remainder on, so each tank contributes to the outflow cost.
    """
    if bleed < 0 or bleed * (n_tanks - 1) >= flow:
        raise ValueError("bleed must be nonnegative and leave flow for the last tank")
    passed = [flow - bleed * (i + 1) for i in range(n_tanks - 1)]
    tanks = [dict(name=f"tank{i + 1}", volume=volume, inflow=flow if i == 0 else 0.0,
                  outflow=flow - bleed * (n_tanks - 1) if i == n_tanks - 1 else bleed)
             for i in range(n_tanks)]
    flows = [{"from": i, "to": i + 1, "rate": passed[i]} for i in range(n_tanks - 1)]
    diff = [dict(between=[i, i + 1], rate=diffusion) for i in range(n_tanks - 1)] \
        if diffusion > 0 else []
    bio = {"state": "X"} if model == "contois" else {"constant": biomass}
    reaction = dict(model=model, mu=mu, k=k, substrate="S", biomass=bio)
    kin_tanks = [dict(reactions=[reaction], kappa=[[-1.0 / yield_], [1.0]])
                 for _ in range(n_tanks)]
    cfg = dict(
        name=f"gradostat-{model}",
        mode=mode,
        units=dict(flow="m3/day", volume="m3", rate="1/day", time="day"),
        network=dict(tanks=tanks, flows=flows, diffusion=diff),
        kinetics=dict(states=["S", "X"], tanks=kin_tanks),
        objective=dict(type="substrate_outflow", eta=list(eta)),
        influent=dict(fixed={"S": [substrate_in] + [0.0] * (n_tanks - 1), "X": 0.0}),
        constraints={},
    )
    if mode == "transient":
        cfg["horizon"] = dict(tau=tau, delta=delta, boundary="fixed",
                              initial_state={"S": [1.0] * n_tanks, "X": [biomass] * n_tanks})
    return cfg


def gradostat(**kwargs):
    return scenario_from_config(gradostat_config(**kwargs))


def table_as_array() -> np.ndarray:
    """Growth table rows in a fixed order, for golden comparisons."""
    return np.array([GROWTH_TABLE[k] for k in GROWTH_TABLE])
