import math
from types import SimpleNamespace

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from biosocp.solver import (INFEASIBLE, OPTIMAL, UNBOUNDED, ConeDims, SolverOptions, solve_conic,
                            verify_kkt)
from oracles import grid_minimum, planted_program, random_bounded_program


def program(c, G, h, dims, A=None, b=None):
    n = len(c)
    A = sp.csc_matrix((0, n)) if A is None else sp.csc_matrix(np.atleast_2d(A))
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float)
    return SimpleNamespace(c=np.asarray(c, dtype=float), A=A, b=b, G=sp.csc_matrix(G),
                           h=np.asarray(h, dtype=float), dims=dims)


def run(p, **opts):
    return solve_conic(p.c, p.A, p.b, p.G, p.h, p.dims, SolverOptions(**opts))


LOWER_BOUND = program([1.0], [[-1.0]], [-1.0], ConeDims(1))
NORM = program([1.0], [[-1.0], [0.0], [0.0]], [0.0, 1.0, 1.0], ConeDims(0, [3]))
DEGENERATE = program([1.0, 1.0], -np.eye(2), [0.0, 0.0], ConeDims(2), A=[[1.0, 1.0]], b=[1.0])


def test_lower_bound_and_its_dual():
    sol = run(LOWER_BOUND)
    assert sol.status == OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
    assert sol.z[0] == pytest.approx(1.0, abs=1e-8)


def test_norm_of_a_constant():
    sol = run(NORM)
    assert sol.status == OPTIMAL
    assert sol.pcost == pytest.approx(math.sqrt(2.0), abs=1e-8)
    assert verify_kkt(NORM, sol).passed


def test_degenerate_face():
    sol = run(DEGENERATE)
    assert sol.status == OPTIMAL
    assert sol.pcost == pytest.approx(1.0, abs=1e-8)
    assert sol.rel_gap <= 1e-8
    assert sol.x.sum() == pytest.approx(1.0, abs=1e-8) and np.all(sol.x >= -1e-8)


def test_kkt_of_a_hand_built_pair_is_zero():
    pair = SimpleNamespace(x=np.array([1.0]), y=np.zeros(0), z=np.array([1.0]))
    rep = verify_kkt(LOWER_BOUND, pair)
    assert (rep.primal, rep.dual, rep.complementarity, rep.gap) == (0.0, 0.0, 0.0, 0.0)
    assert rep.passed


def test_kkt_reports_a_primal_perturbation():
    pair = SimpleNamespace(x=np.array([1.0 + 1e-3, 0.0]), y=np.array([-1.0]), z=np.zeros(2))
    rep = verify_kkt(DEGENERATE, pair)
    assert rep.primal == pytest.approx(1e-3, rel=1e-9)
    assert rep.dual == 0.0
    assert not rep.passed


def test_infeasible_status():
    p = program([1.0], [[-1.0], [1.0]], [-1.0, 0.0], ConeDims(2))
    assert run(p).status == INFEASIBLE


def test_unbounded_status():
    p = program([-1.0], [[-1.0]], [0.0], ConeDims(1))
    assert run(p).status == UNBOUNDED


def test_infeasible_certificate():
    # x >= 1 and x <= 0: y = 0, z certifies G'z = 0 with h'z < 0
    p = program([1.0], [[-1.0], [1.0]], [-1.0, 0.0], ConeDims(2))
    sol = run(p)
    assert np.all(sol.z >= -1e-9)
    assert abs(p.G.T @ sol.z).max() <= 1e-7
    assert p.h @ sol.z == pytest.approx(-1.0)


def test_determinism():
    rng = np.random.default_rng(3)
    p = planted_program(rng, n=10, p=3, l=6, q=[3, 4, 2])
    a, b = run(p), run(p)
    assert a.iterations == b.iterations
    for name in ("x", "y", "z", "s"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_history_records_every_iteration():
    sol = run(NORM)
    assert [r["iter"] for r in sol.history] == list(range(sol.iterations + 1))
    assert {"pcost", "dcost", "pres", "dres", "mu"} <= set(sol.history[-1])


def test_max_iterations_keeps_last_iterate():
    rng = np.random.default_rng(5)
    p = planted_program(rng, n=8, p=2, l=5, q=[3, 3])
    sol = run(p, max_iter=2)
    assert sol.status == "max-iterations"
    assert np.all(np.isfinite(sol.x)) and sol.iterations == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_planted_optimum_is_found(seed):
    p = planted_program(np.random.default_rng(seed))
    sol = run(p)
    assert sol.status == OPTIMAL
    assert sol.pcost == pytest.approx(p.optimum, abs=1e-6 * (1 + abs(p.optimum)))
    assert verify_kkt(p, sol).passed


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weak_duality_at_the_returned_point(seed):
    """c'x - (-b'y - h'z) equals s'z plus residual terms, so it is bounded below."""
    p = planted_program(np.random.default_rng(seed))
    sol = run(p)
    resid = (abs(sol.x @ (p.c + p.A.T @ sol.y + p.G.T @ sol.z))
             + abs(sol.y @ (p.A @ sol.x - p.b)) + abs(sol.z @ (p.G @ sol.x + sol.s - p.h)))
    assert sol.s @ sol.z >= -1e-12
    assert p.c @ sol.x - (-(p.b @ sol.y) - p.h @ sol.z) >= -1e-12 - resid


@pytest.mark.parametrize("seed", range(20))
def test_two_variable_programs_match_grid_search(seed):
    p = random_bounded_program(np.random.default_rng(1000 + seed))
    sol = run(p)
    assert sol.status == OPTIMAL
    brute = grid_minimum(p.c, p.G, p.h, p.dims, box=3.0)
    assert sol.pcost == pytest.approx(brute, abs=1e-4)


def test_square_constraint_stack_with_constant_objective():
    # [A; G] is square and the objective is constant on the feasible set, so
    # the regularized factorization alone loses every digit
    rng = np.random.default_rng(10_019)
    n = int(rng.integers(1, 13))
    p = planted_program(rng, n=n, p=int(rng.integers(0, n)))
    assert p.A.shape[0] + p.G.shape[0] == n and not p.z.any()
    sol = run(p)
    assert sol.status == OPTIMAL
    assert sol.pcost == pytest.approx(p.optimum, abs=1e-7)
