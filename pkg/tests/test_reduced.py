import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from naminggame.core import Configuration, ContractError
from naminggame.fast import run_full
from naminggame.harness import two_word_configuration
from naminggame.reduced import (
    JUMPS,
    Z_STAR,
    ReducedState,
    drift_b,
    drift_u,
    gillespie_step,
    project_full_to_reduced,
    rates_array,
    reaction_rates,
    simulate,
    simulate_to_consensus,
    table_du,
)
from naminggame.rng import make_rng, replicate_seed

states = st.integers(2, 200).flatmap(
    lambda n: st.tuples(st.integers(0, n), st.integers(0, n)).map(
        lambda p: ReducedState(min(p), max(p) - min(p), n - max(p))))


def test_jumps_conserve_total():
    assert np.all(JUMPS.sum(axis=1) == 0)


def test_all_ab_rates_exact():
    n = 10
    q = reaction_rates(ReducedState(0, 0, n), "exact")
    assert q[4] == q[5] == pytest.approx(n / 2)
    assert q.sum() == pytest.approx(n)
    assert np.count_nonzero(q) == 2


def test_n2_mixed_rates():
    q = reaction_rates(ReducedState(1, 1, 0), "exact")
    assert q[6] == q[7] == 1.0 and q.sum() == 2.0


def test_absorbing_rates_vanish():
    assert not reaction_rates(ReducedState(7, 0, 0)).any()
    assert not reaction_rates(ReducedState(0, 7, 0), "normalized").any()


@settings(max_examples=200)
@given(states)
def test_rates_nonnegative_and_vectorised(state):
    for mode in ("exact", "normalized"):
        q = reaction_rates(state, mode)
        assert (q >= 0).all()
        np.testing.assert_allclose(rates_array([state.X], [state.Y], [state.Z], mode)[0], q, rtol=1e-14)


def test_normalized_differs_by_n_over_n_minus_1():
    s = ReducedState(3, 4, 5)
    np.testing.assert_allclose(reaction_rates(s, "exact") * (s.n - 1) / s.n, reaction_rates(s, "normalized"))


def test_gillespie_from_all_ab_n2():
    outs = [gillespie_step(ReducedState(0, 0, 2), make_rng(k))[1].as_tuple() for k in range(4000)]
    a = sum(o == (2, 0, 0) for o in outs)
    assert set(outs) == {(2, 0, 0), (0, 2, 0)}
    assert stats.binomtest(a, len(outs), 0.5).pvalue > 0.001


def test_gillespie_from_a_ab_n2():
    outs = [gillespie_step(ReducedState(1, 0, 1), make_rng(k))[1].as_tuple() for k in range(4000)]
    a = sum(o == (2, 0, 0) for o in outs)
    assert set(outs) == {(2, 0, 0), (0, 0, 2)}
    assert stats.binomtest(a, len(outs), 0.75).pvalue > 0.001


def test_gillespie_rejects_absorbing():
    with pytest.raises(ContractError):
        gillespie_step(ReducedState(2, 0, 0), make_rng(0))


@settings(max_examples=50, deadline=None)
@given(states, st.integers(0, 2**32))
def test_total_conserved(state, seed):
    run = simulate(state, seed, record=True, max_steps=500)
    assert (run.path.states.sum(axis=1) == state.n).all()
    assert (run.path.states >= 0).all()


def test_python_step_matches_kernel_path():
    init = ReducedState(5, 3, 4)
    run = simulate(init, 9, record=True, max_steps=50)
    rng = make_rng(9)
    s, t = init, 0.0
    for k in range(1, len(run.path.times)):
        dt, s = gillespie_step(s, rng)
        t += dt
        assert s.as_tuple() == tuple(run.path.states[k])
        assert t == pytest.approx(run.path.times[k], rel=1e-12)


def test_expected_consensus_time_n2():
    # first-step analysis: E T from (1,1,0) is 1/2 + 3/8 + 1/4 = 9/8
    times = np.array([simulate_to_consensus(ReducedState(1, 1, 0), replicate_seed(1, k)).time for k in range(200_000)])
    se = times.std(ddof=1) / math.sqrt(len(times))
    assert abs(times.mean() - 9 / 8) < 3 * se


def test_already_absorbed():
    run = simulate_to_consensus(ReducedState(2, 0, 0), 1)
    assert run.time == 0 and run.winner == "A"


def test_winner_symmetry():
    wins = sum(simulate_to_consensus(ReducedState(5, 5, 10), replicate_seed(2, k)).winner == "A" for k in range(20_000))
    assert stats.binomtest(wins, 20_000, 0.5).pvalue > 0.001


def test_projection():
    assert project_full_to_reduced(Configuration.from_vocabularies([(0,)] * 4)).as_tuple() == (4, 0, 0)
    assert project_full_to_reduced(Configuration.from_vocabularies([(0, 1)] * 4)).as_tuple() == (0, 0, 4)
    with pytest.raises(ContractError):
        project_full_to_reduced(Configuration.from_vocabularies([(0,), (1,), (2,)]))
    with pytest.raises(ContractError):
        project_full_to_reduced(Configuration.from_vocabularies([(0,), (), (1,)]))


@pytest.mark.parametrize("n", [3, 4, 5])
def test_full_model_projection_matches_chain(n):
    reps = 5000
    init = (0, 0, n)
    full = [run_full(n, replicate_seed(3, k), stop="consensus", config=two_word_configuration(*init))
            for k in range(reps)]
    red = [simulate_to_consensus(ReducedState(*init), replicate_seed(4, k)) for k in range(reps)]
    assert stats.ks_2samp([r.time for r in full], [r.time for r in red]).pvalue > 0.001
    wins_full = sum(r.consensus_word == 0 for r in full)
    wins_red = sum(r.winner == "A" for r in red)
    table = [[wins_full, reps - wins_full], [wins_red, reps - wins_red]]
    assert stats.chi2_contingency(table).pvalue > 0.001


def _summed_drift(state, f):
    q = reaction_rates(state, "normalized")
    base = f(state)
    total = 0.0
    for rate, jump in zip(q, JUMPS):
        if rate > 0:
            total += rate * (f(ReducedState(state.X + int(jump[0]), state.Y + int(jump[1]), state.Z + int(jump[2]))) - base)
    return total


def test_drift_u_matches_table_summation():
    rng = np.random.default_rng(0)
    n = 100
    for _ in range(1000):
        X, Y = sorted(rng.integers(0, n + 1, size=2))
        s = ReducedState(int(X), int(Y - X), int(n - Y))
        if rng.random() < 0.5:
            s = ReducedState(s.Y, s.X, s.Z)
        expected = _summed_drift(s, lambda r: r.u)
        assert drift_u(s) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_drift_u_off_diagonal_is_uz():
    s = ReducedState(60, 20, 20)
    assert drift_u(s) == pytest.approx(s.u * s.z)


@settings(max_examples=300)
@given(states)
def test_majority_maintained(state):
    if state.u > 1 / state.n:
        assert drift_u(state) >= 0


@settings(max_examples=300)
@given(states)
def test_drift_b_matches_summation(state):
    assert drift_b(state) == pytest.approx(_summed_drift(state, lambda r: r.z), rel=1e-9, abs=1e-12)


def test_drift_b_near_fixed_point_is_order_one_over_n():
    # on the diagonal with z as close to z* as the lattice allows, only 2 z*/n survives
    n = 10**6
    s = ReducedState(381966, 381966, 236068)
    assert s.u == 0 and abs(s.z - Z_STAR) < 1e-7
    assert drift_b(s) == pytest.approx(2 * Z_STAR / n, rel=0.2)


@settings(max_examples=300)
@given(states)
def test_table_u_jumps_match_recomputed(state):
    expected = []
    for jump in JUMPS:
        X, Y = state.X + int(jump[0]), state.Y + int(jump[1])
        expected.append(abs(X - Y) / state.n - state.u)
    q = reaction_rates(state, "exact")
    got = table_du(state)
    for i in range(8):
        if q[i] > 0:
            assert got[i] == pytest.approx(expected[i], abs=1e-12)


@settings(max_examples=300)
@given(states)
def test_jump_magnitudes(state):
    q = reaction_rates(state)
    for rate, jump in zip(q, JUMPS):
        if rate > 0:
            assert abs(abs(state.X + jump[0] - state.Y - jump[1]) - abs(state.X - state.Y)) <= 2
            assert abs(jump[2]) <= 2
