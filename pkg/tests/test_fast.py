import math

import numpy as np
import pytest

from naminggame.core import Configuration, ContractError, agent_clock_steps, simulate_agent_clock
from naminggame.fast import run_full
from naminggame.observables import SeriesRecorder, Tracker, time_grid
from naminggame.rng import make_rng, replicate_seed


@pytest.mark.parametrize("n,seed,horizon", [(2, 1, 5.0), (20, 5, 30.0), (60, 9, 12.0)])
def test_compiled_engine_matches_reference(n, seed, horizon):
    grid = time_grid(horizon, 0.25)
    rec = SeriesRecorder(Tracker(n), grid)
    ref = simulate_agent_clock(n, horizon, seed, observers=[rec])
    rows = rec.finish(horizon)
    run = run_full(n, seed, horizon=horizon, grid=grid, keep_vocab=True)
    assert run.vocab == ref.vocab
    fast_rows = run.series_rows()
    assert len(fast_rows) == len(rows)
    for a, b in zip(fast_rows, rows):
        for col in ("t", "V", "Vo", "Vx", "S", "A", "Z"):
            assert a[col] == b[col]


def test_stop_at_t_o():
    run = run_full(50, 3, stop="T_o")
    assert run.mute == 0 and run.t_o == run.time and run.stopped == "T_o"


def test_stop_at_consensus_and_from_configuration():
    config = Configuration.from_vocabularies([(0,)] * 3 + [(1,)] * 3)
    run = run_full(6, 4, stop="consensus", config=config)
    assert run.alive == 1 and run.consensus_word in (0, 1)
    assert run.created == 2


def test_window_extremes_are_exact():
    n, a, b = 40, 1.0, 4.0
    run = run_full(n, 12, horizon=b, window=(a, b))
    config = Configuration.mute(n)
    tr = Tracker(n)
    values = []
    for step in agent_clock_steps(config, make_rng(12), b):
        if step.event.time > a and not values:
            values.append(tr.ledger.alive_count)
        tr.on_event(step)
        if step.event.time > a:
            values.append(tr.ledger.alive_count)
    assert run.vmin == min(values) and run.vmax == max(values)


def test_rejects_bad_stop():
    with pytest.raises(ContractError):
        run_full(5, 1, stop="never")
    with pytest.raises(ContractError):
        run_full(5, 1)


def test_mean_words_created_small_n():
    # X counts inventions; E X = n/2
    n, reps = 10, 4000
    xs = np.array([run_full(n, replicate_seed(2, k), stop="T_o").created for k in range(reps)])
    assert abs(xs.mean() - n / 2) < 3 * xs.std(ddof=1) / math.sqrt(reps)
