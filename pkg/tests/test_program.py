import copy
from collections import defaultdict
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biosocp import kinetics as kin
from biosocp import presets
from biosocp.network import ValidationError
from biosocp.program import (BiogasMax, SetpointTracking, SubstrateOutflow, build_steady_state,
                             build_transient, objective_gradients, read_interchange,
                             write_interchange)
from biosocp.scenario import scenario_from_config
from biosocp.simulate import forward_simulate
from biosocp.solver import solve
from scenarios import monod_tank, single_tank, two_tank_composite


def kinds(program, free_only=False):
    out = defaultdict(int)
    for j, lab in enumerate(program.col_labels):
        if not (free_only and program.fixed_mask[j]):
            out[lab[0]] += 1
    return dict(out)


def full_point(prog, sc, xi, T, xin):
    """Program vector for given model blocks, auxiliaries at their largest feasible values."""
    x = prog.pack(xi, T, xin)
    m = sc.kinetics.n_states
    groups = defaultdict(list)
    for j, lab in enumerate(prog.col_labels):
        if lab[0] == "aux":
            groups[lab[1:]].append(j)
    for (i, r, step), cols in groups.items():
        row = step if prog.mode == "transient" else 0
        kin_step = step if prog.mode == "transient" else None
        vals = kin.aux_values(sc.kinetics.reactions[i][r], xi[row][i * m:(i + 1) * m], kin_step)
        assert len(vals) == len(cols)
        x[cols] = vals
    return x


def feasibility(prog, x):
    res = prog.residuals(x)
    eq = np.max(np.abs(res["equality"])) if res["equality"].size else 0.0
    return max(eq, res["cone_violation"])


def test_column_counts():
    tau = 3
    sc = scenario_from_config(two_tank_composite("geometric", tau=tau))
    prog = build_transient(sc)
    s, m, r = sc.dims
    counts = kinds(prog)
    assert counts["xi"] == m * s * (tau + 1)
    assert counts["T"] == r * s * tau
    assert counts["xin"] == m * s * tau
    # xi(0) and the fixed influent are held, not free
    free = kinds(prog, free_only=True)
    assert free["xi"] == m * s * tau and "xin" not in free
    assert prog.b.size == m * s * tau


def test_tracking_adds_one_epigraph_per_step():
    tau = 4
    base = single_tank(tau=tau, inflow=1.0, xin=2.0)
    track = copy.deepcopy(base)
    track["objective"] = dict(type="tracking", A=[[1.0]], target=[0.5])
    p0 = build_transient(scenario_from_config(base))
    p1 = build_transient(scenario_from_config(track))
    assert kinds(p1)["epigraph"] == tau
    assert len(p1.dims.q) - len(p0.dims.q) == tau


def test_tracking_optimum_matches_squared_error():
    cfg = single_tank(tau=3, delta=0.5, inflow=1.0, xin=2.0, x0=0.0,
                      objective=dict(type="tracking", A=[[1.0]], target=[1.0]))
    sol = solve(build_transient(scenario_from_config(cfg)))
    assert sol.objective == pytest.approx(float(np.sum((sol.xi[1:, 0] - 1.0) ** 2)), abs=1e-7)


def test_no_reactions_gives_a_linear_program_with_the_recursion_as_optimum():
    cfg = single_tank(tau=5, delta=0.5, inflow=1.0, outflow=1.0, xin=2.0, x0=0.0)
    prog = build_transient(scenario_from_config(cfg))
    assert prog.dims.q == ()
    sol = solve(prog)
    x, expected = 0.0, []
    for _ in range(5):
        x = (2.0 * x + 2.0) / 3.0
        expected.append(x)
    np.testing.assert_allclose(sol.xi[1:, 0], expected, atol=1e-8)
    assert sol.objective == pytest.approx(sum(expected), abs=1e-7)


def test_steady_without_reactions_is_the_linear_solve():
    cfg = two_tank_composite()
    cfg["mode"] = "steady"
    del cfg["horizon"]
    cfg["kinetics"]["tanks"] = [dict(reactions=[], kappa=[]) for _ in range(2)]
    sol = solve(build_steady_state(scenario_from_config(cfg)))
    # all feed leaves through the two 0.5 outflows at the feed concentration
    np.testing.assert_allclose(sol.xi[0], [3.0, 4.0, 0.0, 3.0, 4.0, 0.0], atol=1e-7)


def test_washout_is_feasible_with_zero_cost():
    cfg = single_tank(mode="steady", inflow=1.0, xin=0.0, states=("S", "P"), eta=(1.0, 0.0),
                      reactions=[dict(model="monod", mu=2.0, k=1.0, substrate="S",
                                      biomass={"constant": 1.0})],
                      kappa=[[-1.0], [1.0]])
    prog = build_steady_state(scenario_from_config(cfg))
    x = np.where(prog.fixed_mask, prog.fixed_values, 0.0)
    assert feasibility(prog, x) <= 1e-15
    assert prog.c @ x == 0.0


def test_steady_feasible_rates_are_exactly_the_hypograph():
    cfg = single_tank(mode="steady", inflow=1.0, xin=4.0, states=("S", "P"), eta=(1.0, 0.0),
                      reactions=[dict(model="monod", mu=2.0, k=1.0, substrate="S",
                                      biomass={"constant": 1.0})],
                      kappa=[[-1.0], [1.0]])
    cfg["influent"]["fixed"]["P"] = 0.0
    sc = scenario_from_config(cfg)
    prog = build_steady_state(sc)
    model = sc.kinetics.reactions[0][0]
    for T in np.linspace(0.0, 4.0, 201):
        xi = np.array([[4.0 - T, T]])
        phi = kin.evaluate_rate(model, xi[0])
        if abs(T - phi) < 1e-9:
            continue
        inside = feasibility(prog, full_point(prog, sc, xi, np.array([[T]]), np.zeros((1, 2))))
        assert (inside <= 1e-12) == (T <= phi), T


def test_objective_gradient_examples():
    spec = kin.KineticsSpec(
        reactions=[[kin.Monod(mu=1.0, k=1.0, substrate=0, biomass_profile=(1.0,))]],
        kappa=[np.array([[-1.0], [1.0]])], n_states=2)
    sched = scenario_from_config(single_tank(outflow=2.0, volume=3.0, states=("S", "P"), eta=(1.0, 0.0))).network
    at = SimpleNamespace(xi=np.array([[0.0, 0.0], [2.0, 3.0]]))

    fxi, fphi = objective_gradients(SubstrateOutflow(eta=[[1.0, 0.5]]), at, sched, spec)
    assert np.all(np.isnan(fxi[0]))
    np.testing.assert_allclose(fxi[1], [2.0, 1.0])
    np.testing.assert_allclose(fphi[1], [0.0])

    _, fphi = objective_gradients(BiogasMax(sigma=[[2.0]], capture=(0,)), at, sched, spec)
    np.testing.assert_allclose(fphi[1], [-6.0])

    track = SetpointTracking(A=np.diag([1.0, 2.0]), target=[1.0, 1.0])
    fxi, _ = objective_gradients(track, at, sched, spec)
    np.testing.assert_allclose(fxi[1], [2.0, 8.0])


@pytest.mark.parametrize("cfg", [presets.gradostat_config(mode="transient"), monod_tank(),
                                 two_tank_composite("non_interactive"),
                                 two_tank_composite("geometric")],
                         ids=["gradostat", "monod", "non_interactive", "geometric"])
def test_relaxation_contains_simulated_trajectories(cfg):
    sc = scenario_from_config(cfg)
    prog = build_transient(sc)
    influent = sc.fixed_influent().reshape(sc.grid.tau, -1)
    traj = forward_simulate(sc, influent, sc.initial_state)
    xin = np.vstack([np.zeros((1, influent.shape[1])), influent])
    x = full_point(prog, sc, traj.xi, traj.phi, xin)
    assert feasibility(prog, x) <= 1e-8
    assert solve(prog).objective <= prog.c @ x + 1e-7


def test_pack_inverts_unpack():
    prog = build_transient(scenario_from_config(two_tank_composite("non_interactive", tau=3)))
    sol = solve(prog)
    aux = {j: sol.x[j] for j, lab in enumerate(prog.col_labels) if lab[0] == "aux"}
    x = prog.pack(sol.xi, sol.T, np.nan_to_num(sol.xin), aux)
    np.testing.assert_array_equal(x, sol.x)


def test_rows_are_labelled_by_step():
    prog = build_transient(presets.gradostat(mode="transient", tau=4))
    steps = {lab[1] for lab in prog.row_labels if lab[0] == "dynamics"}
    assert steps == {1, 2, 3, 4}
    assert set(prog.cone_tags) >= {"state_nonneg", "rate_nonneg", "kinetics"}


def test_interchange_round_trip(tmp_path):
    prog = build_transient(presets.gradostat(mode="transient"))
    path = tmp_path / "program.txt"
    write_interchange(prog, path)
    back = read_interchange(path)
    assert back.dims.l == prog.dims.l and tuple(back.dims.q) == tuple(prog.dims.q)
    for name in ("c", "b", "h", "fixed_values", "fixed_mask"):
        np.testing.assert_array_equal(getattr(back, name), getattr(prog, name))
    assert (back.A != prog.A).nnz == 0 and (back.G != prog.G).nnz == 0
    assert back.col_labels == [tuple(str(p) for p in lab) for lab in prog.col_labels] \
        or back.col_labels == prog.col_labels
    a, b = solve(back), solve(prog)
    assert a.objective == b.objective and a.iterations == b.iterations


def test_interchange_rejects_other_files(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("hello\n")
    with pytest.raises(ValidationError):
        read_interchange(path)


def test_steady_state_rejects_schedules():
    cfg = presets.gradostat_config()
    net = cfg["network"]
    cfg["network"] = dict(snapshots=[copy.deepcopy(net), copy.deepcopy(net)])
    cfg["horizon"] = dict(tau=2, delta=0.1)
    with pytest.raises(ValidationError):
        build_steady_state(scenario_from_config(cfg))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 100.0))
def test_objective_scaling_scales_the_optimum(scale):
    cfg = presets.gradostat_config(mode="transient", bleed=0.2, tau=5)
    base = solve(build_transient(scenario_from_config(cfg)))
    cfg["objective"]["eta"] = [scale * v for v in cfg["objective"]["eta"]]
    scaled = solve(build_transient(scenario_from_config(cfg)))
    assert scaled.objective == pytest.approx(scale * base.objective, rel=1e-6)
