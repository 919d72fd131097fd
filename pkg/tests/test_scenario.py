import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from biosocp import presets
from biosocp.discretize import TimeGrid
from biosocp.influent import synth_influent, write_series
from biosocp.network import ValidationError
from biosocp.scenario import ConfigErrors, dump_scenario, load_scenario, scenario_from_config
from scenarios import monod_tank, single_tank, two_tank_composite

GOLDEN = Path(__file__).parent / "data" / "growth_table.json"


def reload(sc, tmp_path, name="s.yaml"):
    path = tmp_path / name
    dump_scenario(sc, path)
    return load_scenario(path)


@pytest.mark.parametrize("cfg", [
    presets.wastewater_config(tau=8), presets.wastewater_config(tau=8, paper_units=True),
    presets.gradostat_config(), presets.gradostat_config(mode="transient", bleed=0.2),
    monod_tank(), two_tank_composite("geometric"),
    single_tank(objective=dict(type="tracking", diag=2.0, target=[1.0]))],
    ids=["wastewater", "wastewater-unit-steps", "gradostat", "gradostat-transient", "monod",
         "geometric", "tracking"])
def test_round_trip(cfg, tmp_path):
    sc = scenario_from_config(cfg)
    back = reload(sc, tmp_path)
    assert back == sc
    again = reload(back, tmp_path, "t.yaml")
    assert (tmp_path / "s.yaml").read_text() == (tmp_path / "t.yaml").read_text()
    np.testing.assert_array_equal(back.fixed_influent(), sc.fixed_influent())
    assert again.grid == sc.grid


def test_dump_has_no_yaml_anchors():
    text = dump_scenario(presets.wastewater(tau=8))
    assert "&id" not in text and "*id" not in text


def test_growth_table_matches_golden_file():
    golden = json.loads(GOLDEN.read_text())
    assert {k: list(v) for k, v in presets.GROWTH_TABLE.items()} == golden
    for paper_units in (False, True):
        sc = presets.wastewater(tau=8, paper_units=paper_units)
        for p in range(3):
            rx = sc.kinetics.reactions[p]
            for j, sub in enumerate(presets.STATES):
                assert rx[j].mu == golden[f"mu_{sub}"][p]
                assert rx[j].k == golden[f"K_{sub}"][p]
                assert rx[j].substrate == j
            K = sc.kinetics.kappa[p]
            assert K[2, 1] == 1.0 / golden["y_NH4_NO2"][p]
            assert K[3, 2] == 1.0 / golden["y_NO2_NO3"][p]
            assert np.all(np.diag(K) == -1.0)


def test_wastewater_structure_and_units():
    sc = presets.wastewater(tau=96)
    assert sc.dims == (3, 4, 4)
    assert sc.grid.delta == pytest.approx(1 / 96)
    assert sc.boundary == "periodic"
    net = sc.network.network(1)
    np.testing.assert_allclose(net.inflow_rates, [8640.0, 34560.0, 17280.0])
    assert presets.wastewater(tau=96, paper_units=True).grid.delta == 1.0
    assert any("eta" in note for note in sc.notes)


def test_wastewater_biomass_profile():
    sc = presets.wastewater(tau=40)
    for p in range(3):
        prof = np.array(sc.kinetics.reactions[p][0].biomass_profile)
        n = np.arange(1, 41)
        np.testing.assert_allclose(prof, 100 * (1 + (-1) ** (p + 1) * np.sin(10 * np.pi * n / 40)),
                                   atol=1e-12)


def test_gradostat_structure():
    sc = presets.gradostat(n_tanks=5, yield_=0.4)
    assert sc.dims == (5, 2, 1)
    np.testing.assert_array_equal(sc.kinetics.kappa[0], [[-2.5], [1.0]])


def test_all_problems_reported_together():
    cfg = monod_tank()
    cfg["objective"]["type"] = "profit"
    cfg["influent"]["fixed"] = {"Q": 1.0}
    cfg["horizon"]["tau"] = 0
    with pytest.raises(ConfigErrors) as info:
        scenario_from_config(cfg)
    where = [p.split(":")[0] for p in info.value.problems]
    assert {"horizon", "objective", "influent.fixed"} <= set(where)


@pytest.mark.parametrize("patch,needle", [
    (lambda c: c["units"].update(flow="gal/min"), "flow"),
    (lambda c: c["kinetics"]["tanks"][0]["reactions"][0].update(model="haldane"), "haldane"),
    (lambda c: c["network"].update(diffusion=[dict(between=[0, 0], rate=1.0)]), "diffusion"),
])
def test_validation_messages(patch, needle):
    cfg = monod_tank()
    patch(cfg)
    with pytest.raises(ValidationError, match=needle):
        scenario_from_config(cfg)


def test_asymmetric_diffusion_names_the_pair(tmp_path):
    cfg = two_tank_composite()
    cfg["network"]["diffusion"] = [dict(between=["a", "b"], rates=[0.2, 0.3])]
    path = tmp_path / "d.yaml"
    path.write_text(yaml.safe_dump(cfg))
    with pytest.raises(ValidationError, match=r"d\[0,1\]"):
        load_scenario(path)


def test_unit_conversion_matches_canonical():
    a = monod_tank()
    b = monod_tank()
    b["units"] = dict(flow="m3/h", volume="m3", rate="1/h", time="h")
    b["network"]["tanks"][0].update(inflow=1 / 24, outflow=1 / 24)
    b["kinetics"]["tanks"][0]["reactions"][0]["mu"] = 2.0 / 24
    b["horizon"]["delta"] = 0.05 * 24
    sa, sb = scenario_from_config(a), scenario_from_config(b)
    assert sa.grid.delta == pytest.approx(sb.grid.delta)
    assert sa.kinetics.reactions[0][0].mu == pytest.approx(sb.kinetics.reactions[0][0].mu)
    np.testing.assert_allclose(sa.network.network(1).inflow_rates,
                               sb.network.network(1).inflow_rates)


def test_influent_csv_override(tmp_path):
    cfg = monod_tank(tau=4)
    path = tmp_path / "xin.csv"
    write_series(path, {"xin:0:S": [1.0, 2.0, 3.0, 4.0]})
    cfg["influent"]["csv"] = str(path)
    sc = scenario_from_config(cfg)
    np.testing.assert_array_equal(sc.fixed_influent()[:, 0, 0], [1, 2, 3, 4])


def test_zero_amplitudes_give_constant_totals():
    vals = synth_influent(dict(base=5.0), TimeGrid(50, 1.0))
    assert np.all(vals == 5.0)


def test_spike_is_the_maximum():
    params = dict(base=1.0, diurnal_amplitude=0.1, period=96, spike_step=30, spike_height=0.6,
                  spike_width=3.0)
    vals = synth_influent(params, TimeGrid(96, 1.0))
    assert int(np.argmax(vals)) + 1 == 30


def test_csv_override_of_full_length_series(tmp_path):
    data = np.random.default_rng(0).uniform(50, 200, 1345)
    path = tmp_path / "bod.csv"
    write_series(path, {"BOD": data})
    vals = synth_influent(dict(csv=str(path), column="BOD"), TimeGrid(1345, 1.0))
    np.testing.assert_array_equal(vals, data)
    with pytest.raises(ValidationError):
        synth_influent(dict(csv=str(path), column="BOD"), TimeGrid(96, 1.0))


def test_generator_rejects_unknown_and_negative_parameters():
    with pytest.raises(ValidationError):
        synth_influent(dict(amplitude=1.0), TimeGrid(4, 1.0))
    with pytest.raises(ValidationError):
        synth_influent(dict(spike_height=-1.0), TimeGrid(4, 1.0))


def test_noise_is_seeded():
    p = dict(noise=0.1, seed=7)
    a = synth_influent(p, TimeGrid(20, 1.0))
    b = synth_influent(p, TimeGrid(20, 1.0))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, synth_influent(dict(noise=0.1, seed=8), TimeGrid(20, 1.0)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.1, 10.0))
def test_totals_are_nonnegative(amplitude, height, scale):
    p = dict(base=2.0, diurnal_amplitude=amplitude, spike_step=10, spike_height=height)
    assert synth_influent(p, TimeGrid(30, 1.0), scale=scale).min() >= 0.0
