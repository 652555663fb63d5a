import numpy as np
import pytest

from naminggame.concentration.branching import (
    BranchingEnvironment,
    cluster_sizes_at,
    domination_check,
    envelope,
    envelope_check,
    simulate_branching_dominator,
    simulate_coupled,
)
from naminggame.core import ContractError


def _mean_final(b, r, horizon, paths=400, frozen=False, offset=0):
    return np.mean([simulate_branching_dominator(b, r, horizon, 10**7, offset + k, frozen=frozen).final
                    for k in range(paths)])


def test_starts_at_one():
    path = simulate_branching_dominator(2.0, 1.0, 0.0, 100, 0)
    assert path.final == 1 and path.value_at(0.0) == 1


def test_values_are_non_decreasing():
    path = simulate_branching_dominator(2.0, 0.8, 5.0, 10**6, 1)
    v = path.value_at(np.linspace(0, 5, 200))
    assert np.all(np.diff(v) >= 0) and v[-1] == path.final


def test_early_growth_rate_is_b():
    # for small t only immigration at rate b matters
    t = 0.01
    mean = _mean_final(3.0, 1.0, t, paths=20000)
    assert mean - 1 == pytest.approx(3.0 * t, rel=0.15)


def test_monotone_in_b():
    assert _mean_final(1.0, 1.0, 5.0) < _mean_final(4.0, 1.0, 5.0)


def test_faster_clocks_slow_growth():
    assert _mean_final(2.0, 1.0, 10.0, offset=10**5) < _mean_final(2.0, 0.5, 10.0, offset=2 * 10**5)


def test_frozen_dominates_in_mean():
    assert _mean_final(2.0, 0.8, 6.0, frozen=True) >= _mean_final(2.0, 0.8, 6.0)


@pytest.mark.parametrize("seed", range(20))
def test_coupling_never_violated(seed):
    res = simulate_coupled(2.0, 0.7, 8.0, 10**6, seed)
    assert res.violations == 0 and res.x_final <= res.y_final and not res.truncated


def test_truncation_flag():
    path = simulate_branching_dominator(5.0, 0.5, 50.0, 10, 0)
    assert path.truncated and path.final <= 10


@pytest.mark.parametrize("kwargs", [dict(b=0.5, r=1.0, cap=10), dict(b=2, r=0.3, cap=10),
                                    dict(b=2, r=1.2, cap=10), dict(b=2, r=1.0, cap=float("inf"))])
def test_environment_validation(kwargs):
    with pytest.raises(ContractError):
        BranchingEnvironment(**kwargs)


def test_envelope_shape():
    assert envelope(0.0, 1.0, 16.0, 1.0) == pytest.approx(256.0)
    assert envelope(1.0, 1.0, 1.0, 0.5) == pytest.approx((1 + np.log(2)) * 4)


def test_envelope_check_small():
    report = envelope_check(rs=(1.0,), horizon=20.0, paths=100, seed=1)
    assert report.passed


def test_cluster_sizes_account_for_all_agents():
    sizes = cluster_sizes_at(50, 1.0, 3)
    assert sizes.sum() >= 1 and (sizes >= 0).all()


def test_domination_check_small():
    assert domination_check(ns=(100,), ts=(1.0,), runs=20, paths=500, seed=4).passed
