import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biosocp.network import (NetworkSchedule, TankNetwork, ValidationError, build_matrices,
                             is_outflow_connected, kron_lift)


def net(s, outflow, flows=None, diffusion=None, inflow=None):
    return TankNetwork(volumes=np.ones(s), inflow_rates=inflow if inflow is not None else np.zeros(s),
                       outflow_rates=outflow, flows=flows, diffusion=diffusion)


def test_single_tank_matrices():
    mats = build_matrices(net(1, [1.0]))
    assert mats.M.tolist() == [[-1.0]]
    assert mats.L.tolist() == [[0.0]]
    assert mats.N.tolist() == [[-1.0]]


def test_two_tank_flow_matrix():
    mats = build_matrices(net(2, [0.0, 1.0], flows=[[0, 1], [0, 0]]))
    np.testing.assert_array_equal(mats.M, [[-1, 0], [1, -1]])
    np.testing.assert_array_equal(mats.M.sum(axis=0), [0, -1])


def test_diffusion_laplacian():
    mats = build_matrices(net(2, [0, 0], diffusion=[[0, 0.5], [0.5, 0]]))
    np.testing.assert_array_equal(mats.L, [[-0.5, 0.5], [0.5, -0.5]])


def test_asymmetric_diffusion_names_the_pair():
    with pytest.raises(ValidationError, match=r"d\[0,1\]"):
        net(2, [1, 1], diffusion=[[0, 0.5], [0.2, 0]])


@pytest.mark.parametrize("bad", [dict(outflow=[-1.0]), dict(outflow=[1.0], flows=[[1.0]])])
def test_negative_or_self_flows_rejected(bad):
    with pytest.raises(ValidationError):
        net(1, **bad)


def test_nonpositive_volume_rejected():
    with pytest.raises(ValidationError, match="volume"):
        TankNetwork(volumes=[0.0], inflow_rates=[0.0], outflow_rates=[1.0])


def test_outflow_connectivity():
    assert is_outflow_connected(net(1, [1.0]))
    assert not is_outflow_connected(net(2, [0, 0], flows=[[0, 1], [1, 0]]))
    chain = [[0, 1, 0], [0, 0, 1], [0, 0, 0]]
    assert is_outflow_connected(net(3, [0, 0, 1], flows=chain))
    assert not is_outflow_connected(net(3, [1, 0, 0], flows=chain))


def test_kron_lift_examples():
    np.testing.assert_array_equal(kron_lift(np.eye(2), 3).toarray(), np.eye(6))
    np.testing.assert_array_equal(kron_lift([[2.0]], 2).toarray(), np.diag([2.0, 2.0]))
    lifted = kron_lift([[0, 1], [0, 0]], 2).toarray()
    expected = np.zeros((4, 4))
    expected[:2, 2:] = np.eye(2)
    np.testing.assert_array_equal(lifted, expected)


def test_schedule_indexing_and_checks():
    a, b = net(1, [1.0], inflow=[1.0]), net(1, [1.0], inflow=[2.0])
    sched = NetworkSchedule([a, b])
    assert sched.matrices(2).C[0, 0] == 2.0
    with pytest.raises(IndexError):
        sched.matrices(3)
    with pytest.raises(ValidationError):
        sched.check_horizon(5)
    with pytest.raises(ValidationError, match="volumes"):
        NetworkSchedule([a, TankNetwork(volumes=[2.0], inflow_rates=[0], outflow_rates=[1])])


@st.composite
def random_networks(draw):
    s = draw(st.integers(1, 5))
    rates = st.one_of(st.just(0.0), st.floats(0.05, 3.0))
    flows = np.array(draw(st.lists(rates, min_size=s * s, max_size=s * s))).reshape(s, s)
    np.fill_diagonal(flows, 0.0)
    d = np.array(draw(st.lists(rates, min_size=s * s, max_size=s * s))).reshape(s, s)
    d = np.triu(d, 1)
    d = d + d.T
    outflow = np.array(draw(st.lists(rates, min_size=s, max_size=s)))
    vols = np.array(draw(st.lists(st.floats(0.1, 10.0), min_size=s, max_size=s)))
    return TankNetwork(volumes=vols, inflow_rates=np.zeros(s), outflow_rates=outflow,
                       flows=flows, diffusion=d)


@settings(max_examples=200, deadline=None)
@given(random_networks())
def test_compartmental_structure(nw):
    mats = build_matrices(nw)
    off = ~np.eye(nw.n_tanks, dtype=bool)
    assert np.all(mats.M[off] >= 0)
    np.testing.assert_allclose(mats.M.sum(axis=0), -nw.outflow_rates, atol=1e-12)
    np.testing.assert_allclose(mats.L, mats.L.T)
    np.testing.assert_allclose(mats.L.sum(axis=0), 0.0, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(mats.L) <= 1e-12)


@settings(max_examples=200, deadline=None)
@given(random_networks())
def test_outflow_connected_implies_invertible(nw):
    if is_outflow_connected(nw):
        N = build_matrices(nw).N
        assert np.linalg.svd(N, compute_uv=False).min() > 1e-12
