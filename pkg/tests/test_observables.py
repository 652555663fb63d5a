import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from naminggame.core import Configuration, Outcome, Step, agent_clock_steps, apply_interaction, run_until_consensus
from naminggame.observables import (
    SERIES_COLUMNS,
    ClusterIndex,
    SeriesRecorder,
    Tracker,
    agreement_rate_bound,
    log_grid,
    time_grid,
    word_rate,
    write_series,
)
from naminggame.rng import make_rng


def _feed(config, s, l, u, tracker):
    pre_s, pre_l = config.vocab[s], config.vocab[l]
    new, ev = apply_interaction(config, s, l, u)
    tracker.on_event(Step(ev, pre_s, pre_l, new.vocab[s], new.vocab[l]))
    return new, ev


def test_invention_updates_ledger_and_cluster():
    config = Configuration.mute(4)
    tr = Tracker.from_configuration(config)
    config, ev = _feed(config, 2, 0, 0.5, tr)
    assert ev.outcome is Outcome.INVENTION
    assert tr.ledger.created == {2}
    assert tr.index.members[2] == {0, 2}
    tr.check(config)


def test_agreement_deletes_emptied_clusters():
    config = Configuration.from_vocabularies([(0, 1), (0, 3), (1,), (3,)])
    tr = Tracker.from_configuration(config)
    config, ev = _feed(config, 0, 1, 0.0, tr)
    assert ev.outcome is Outcome.AGREEMENT
    assert tr.index.members[1] == {2} and tr.index.members[3] == {3}
    assert tr.ledger.deleted == set()
    config2 = Configuration.from_vocabularies([(0, 1), (0, 2), (0,), (0,)])
    tr2 = Tracker.from_configuration(config2)
    config2, _ = _feed(config2, 0, 1, 0.0, tr2)
    assert tr2.ledger.deleted == {1, 2}
    tr2.check(config2)


def test_adoption_adds_member_without_deletion():
    config = Configuration.from_vocabularies([(0,), (1,), (1,)])
    tr = Tracker.from_configuration(config)
    config, ev = _feed(config, 0, 1, 0.2, tr)
    assert ev.outcome is Outcome.ADOPTION
    assert tr.index.members[0] == {0, 1}
    assert not tr.ledger.deleted


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32))
def test_tracker_invariants_every_event(n, seed):
    config = Configuration.mute(n)
    tr = Tracker.from_configuration(config)
    created_before = 0
    alive_after_to = None
    for step in agent_clock_steps(config, make_rng(seed), horizon=4.0):
        tr.on_event(step)
        tr.check(config)
        assert len(tr.ledger.created) >= created_before
        created_before = len(tr.ledger.created)
        assert tr.index.total_membership() == sum(config.sizes())
        if tr.counter.t_o is not None:
            alive = tr.ledger.alive_count
            if alive_after_to is not None:
                assert alive <= alive_after_to
            alive_after_to = alive
            assert tr.counter.mute == 0


def test_mute_zero_exactly_at_t_o():
    config = Configuration.mute(30)
    tr = Tracker.from_configuration(config)
    for step in agent_clock_steps(config, make_rng(3)):
        tr.on_event(step)
        if tr.counter.mute == 0:
            assert tr.counter.t_o == step.event.time
            break


def test_word_rate_all_mute_is_one():
    index = ClusterIndex(5)
    assert all(word_rate(index, w) == 1.0 for w in range(5))


def test_word_rate_singleton_own_word():
    config = Configuration.from_vocabularies([(0,), (1,), (1,)])
    tr = Tracker.from_configuration(config)
    assert word_rate(tr.index, 0) == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32))
def test_word_rates_sum_to_n_without_mutes(n, seed):
    config = Configuration.mute(n)
    tr = Tracker.from_configuration(config)
    for step in agent_clock_steps(config, make_rng(seed)):
        tr.on_event(step)
        if tr.counter.mute == 0:
            break
    total = sum(word_rate(tr.index, w) for w in range(n))
    assert total == pytest.approx(n)


def test_agreement_rate_singletons():
    config = Configuration.from_vocabularies([(0,), (1,), (2,)])
    assert agreement_rate_bound(Tracker.from_configuration(config).index) == (0.0, 1.0)


def test_agreement_rate_at_consensus():
    n = 7
    config = Configuration.from_vocabularies([(3,)] * n)
    rate, bound = agreement_rate_bound(Tracker.from_configuration(config).index)
    assert rate == pytest.approx(n) and bound == n


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.1, 8.0))
def test_agreement_rate_below_bound_n50(seed, horizon):
    config = Configuration.mute(50)
    tr = Tracker.from_configuration(config)
    for step in agent_clock_steps(config, make_rng(seed), horizon):
        tr.on_event(step)
    rate, bound = agreement_rate_bound(tr.index)
    assert rate <= bound + 1e-12


def test_snapshot_at_zero_and_consensus():
    tr = Tracker(9)
    row = tr.snapshot(0.0)
    assert row["V"] == 0 and row["Z"] == 9
    res = run_until_consensus(9, 4)
    tr = Tracker.from_configuration(res.config)
    row = tr.snapshot()
    assert row["V"] == 1 and row["S"] == 9 and row["u"] == 1.0


def test_two_word_u():
    config = Configuration.from_vocabularies([(0,), (0,), (0,), (1,), (0, 1)])
    assert Tracker.from_configuration(config).two_word_u() == pytest.approx(2 / 5)


def test_series_recorder_grid_semantics(tmp_path):
    n, horizon = 15, 3.0
    grid = time_grid(horizon, 0.5)
    config = Configuration.mute(n)
    rec = SeriesRecorder(Tracker(n), grid)
    events = []
    for step in agent_clock_steps(config, make_rng(8), horizon):
        events.append(step.event.time)
        rec(step)
    rows = rec.finish(horizon)
    assert [r["t"] for r in rows] == list(grid)
    assert rows[0]["Z"] == n
    path = tmp_path / "s.csv"
    write_series(rows, path)
    assert path.read_text().splitlines()[0] == ",".join(SERIES_COLUMNS)


def test_log_grid():
    g = log_grid(0.01, 10.0, 5)
    assert g[0] == 0 and g[1] == pytest.approx(0.01) and g[-1] == pytest.approx(10.0)
