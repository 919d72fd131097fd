import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biosocp import kinetics as kin
from biosocp.kinetics import (Contois, GeometricInteractive, KineticsSpec, Monod,
                              NonInteractive, UnsupportedKinetics)
from oracles import cone_feasible, sample_disagreements


def monod(mu=1.0, k=1.0, xbar=1.0, substrate=0):
    return Monod(mu=mu, k=k, substrate=substrate, biomass_profile=(xbar,))


def test_rate_examples():
    assert kin.evaluate_rate(monod(xbar=2.0), [1.0]) == pytest.approx(1.0)
    assert kin.evaluate_rate(Contois(2.0, 1.0, 0, 1), [3.0, 3.0]) == pytest.approx(3.0)
    assert kin.evaluate_rate(Contois(2.0, 1.0, 0, 1), [0.0, 5.0]) == 0.0


def test_time_varying_biomass_profile():
    m = Monod(mu=1.0, k=1.0, substrate=0, biomass_profile=(1.0, 3.0))
    assert kin.evaluate_rate(m, [1.0], step=2) == pytest.approx(1.5)
    with pytest.raises(Exception):
        kin.evaluate_rate(m, [1.0], step=None)


def test_jacobian_examples():
    spec = KineticsSpec(reactions=[[monod()]], kappa=[[[-1.0]]], n_states=1)
    assert kin.jacobian(spec, [0.0]).toarray()[0, 0] == pytest.approx(1.0)
    spec = KineticsSpec(reactions=[[Contois(1.0, 1.0, 0, 1)]], kappa=[[[-1.0], [1.0]]],
                        n_states=2)
    J, flags = kin.jacobian_with_flags(spec, [0.0, 1.0])
    np.testing.assert_allclose(J.toarray(), [[1.0, 0.0]])
    assert flags == []


def test_irrelevant_columns_are_structurally_zero():
    spec = KineticsSpec(reactions=[[monod(substrate=1)]], kappa=[[[0.0], [-1.0], [0.0]]],
                        n_states=3)
    J = kin.jacobian(spec, [2.0, 1.0, 7.0]).toarray()
    assert J[0, 0] == 0.0 and J[0, 2] == 0.0 and J[0, 1] > 0


def test_kinks_are_flagged():
    tied = NonInteractive(monod(), monod())
    spec = KineticsSpec(reactions=[[tied]], kappa=[[[-1.0]]], n_states=1)
    assert kin.jacobian_with_flags(spec, [1.0])[1] == [(0, 0)]
    origin = KineticsSpec(reactions=[[Contois(1.0, 1.0, 0, 1)]], kappa=[[[-1.0], [1.0]]],
                          n_states=2)
    assert kin.jacobian_with_flags(origin, [0.0, 0.0])[1] == [(0, 0)]


def test_cone_membership_examples():
    c = Contois(1.0, 1.0, 0, 1)
    assert cone_feasible(c, [2.0, 2.0], 1.0)
    assert not cone_feasible(c, [2.0, 2.0], 1.01)
    assert cone_feasible(monod(), [1.0], 0.5)
    assert not cone_feasible(monod(), [1.0], 0.5 + 1e-6)


def test_hyperbolic_row_boundary():
    # T^2 <= Ta Tb with Ta = 1, Tb = 4
    blocks = kin._rotated(({1: 1.0}, 0.0), ({2: 1.0}, 0.0), ({0: 1.0}, 0.0), "t")
    assert blocks.contains([2.0, 1.0, 4.0], 1e-12)
    assert not blocks.contains([2.1, 1.0, 4.0])


def test_state_biomass_monod_has_no_cone():
    m = Monod(mu=1.0, k=1.0, substrate=0, biomass_index=1)
    with pytest.raises(UnsupportedKinetics):
        kin.soc_rows(m, [0, 1], 2)


MODELS = {
    "monod": (monod(mu=2.0, k=1.5, xbar=3.0), 1),
    "contois": (Contois(1.7, 0.6, 0, 1), 2),
    "non_interactive": (NonInteractive(monod(mu=2.0, k=1.0), Contois(1.0, 0.5, 1, 2)), 3),
    "geometric": (GeometricInteractive(monod(mu=2.0, k=1.0), Contois(1.0, 0.5, 1, 2)), 3),
    "nested": (GeometricInteractive(NonInteractive(monod(), monod(mu=3.0, k=4.0, substrate=1)),
                                    Contois(1.0, 0.5, 1, 2)), 3),
}


@pytest.mark.parametrize("name", sorted(MODELS))
def test_cone_matches_rate_on_samples(name):
    model, m = MODELS[name]
    assert sample_disagreements(model, m, 2000, np.random.default_rng(7)) == 0


def _fd_jacobian(spec, x, h=1e-6):
    cols = []
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = h
        cols.append((kin.rates(spec, x + e) - kin.rates(spec, x - e)) / (2 * h))
    return np.array(cols).T


@pytest.mark.parametrize("name", sorted(MODELS))
def test_jacobian_matches_central_differences(name):
    model, m = MODELS[name]
    spec = KineticsSpec(reactions=[[model]], kappa=[np.zeros((m, 1))], n_states=m)
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = rng.uniform(0.2, 5.0, m)
        J, flags = kin.jacobian_with_flags(spec, x)
        if flags:
            continue
        fd = _fd_jacobian(spec, x)
        err = np.max(np.abs(J.toarray() - fd)) / max(1.0, np.max(np.abs(fd)))
        assert err <= 1e-6


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.0, 50.0), st.floats(0.0, 50.0),
       st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_rates_nonnegative_and_monotone_in_substrate(s1, s2, x, mu, k):
    lo, hi = min(s1, s2), max(s1, s2)
    for model, state in ((Contois(mu, k, 0, 1), lambda s: [s, x]),
                         (monod(mu, k, x), lambda s: [s])):
        a = kin.evaluate_rate(model, state(lo))
        b = kin.evaluate_rate(model, state(hi))
        assert 0.0 <= a <= b + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 20.0), min_size=3, max_size=3),
       st.lists(st.floats(0.0, 20.0), min_size=3, max_size=3), st.floats(0.0, 1.0))
def test_rates_concave_along_segments(a, b, t):
    """Concavity is what makes the hypograph a cone-representable set."""
    model = MODELS["geometric"][0]
    a, b = np.array(a), np.array(b)
    mid = kin.evaluate_rate(model, t * a + (1 - t) * b)
    chord = t * kin.evaluate_rate(model, a) + (1 - t) * kin.evaluate_rate(model, b)
    assert mid >= chord - 1e-9 * (1 + abs(chord))


def test_spec_validation():
    with pytest.raises(Exception, match="outside"):
        KineticsSpec(reactions=[[monod(substrate=3)]], kappa=[np.zeros((2, 1))], n_states=2)
    with pytest.raises(Exception, match="kappa"):
        KineticsSpec(reactions=[[monod()], [monod()]], kappa=[np.zeros((1, 1))], n_states=1)
