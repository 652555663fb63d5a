import json
import math

import numpy as np
import pytest

from naminggame import harness
from naminggame.core import ContractError
from naminggame.harness import ExperimentSpec, ResultTable, fit_log_slope, run, summarize


def test_spec_roundtrip():
    spec = ExperimentSpec("final-phase", [10, 20], replicates=3, seed=7, init=[0.5, 0.2, 0.3])
    again = ExperimentSpec.from_json(spec.to_json())
    assert again == spec and again.digest() == spec.digest()


@pytest.mark.parametrize("bad", [
    dict(kind="nope", n_grid=[10]),
    dict(kind="final-phase", n_grid=[]),
    dict(kind="final-phase", n_grid=[20, 10]),
    dict(kind="final-phase", n_grid=[1]),
    dict(kind="final-phase", n_grid=[10], replicates=0),
    dict(kind="final-phase", n_grid=[10], mode="fast"),
    dict(kind="final-phase", n_grid=[10], init="0.5,0.6,0.1"),
    dict(kind="final-phase", n_grid=[10], snapshot_dt=0.0),
    dict(kind="final-phase", n_grid=[10], colour="red"),
])
def test_spec_validation(bad):
    with pytest.raises(ContractError):
        ExperimentSpec.from_dict(bad)


def test_initial_counts():
    assert harness.initial_counts("half", 11) == (5, 6, 0)
    assert harness.initial_counts("0.6,0.2,0.2", 100) == (60, 20, 20)


def test_run_is_deterministic(tmp_path):
    spec = ExperimentSpec("final-phase", [8, 16], replicates=5, seed=3)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    spec.out = str(a)
    run(spec)
    spec.out = str(b)
    run(spec)
    assert a.read_bytes() == b.read_bytes()
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta["seed"] == 3 and meta["failures"] == []


def test_rows_independent_of_scheduling():
    spec = ExperimentSpec("early-phase", [20, 40], replicates=6, seed=5)
    serial = run(spec, threads=1).rows
    parallel = run(spec, threads=2).rows
    assert serial == parallel
    # a replicate's row does not depend on how many replicates were requested
    fewer = run(ExperimentSpec("early-phase", [20, 40], replicates=2, seed=5), threads=1).rows
    assert fewer == [r for r in serial if r["replicate"] < 2]


def test_thread_count(monkeypatch):
    monkeypatch.setenv("NG_THREADS", "3")
    assert harness.thread_count() == 3
    monkeypatch.setenv("NG_THREADS", "0")
    assert harness.thread_count() >= 1
    monkeypatch.setenv("NG_THREADS", "-1")
    with pytest.raises(ContractError):
        harness.thread_count()
    monkeypatch.delenv("NG_THREADS")
    assert harness.thread_count() == 1


def test_failures_recorded(monkeypatch):
    original = harness._job

    def flaky(spec_dict, n, rep):
        if rep == 1:
            raise RuntimeError("boom")
        return original(spec_dict, n, rep)

    monkeypatch.setattr(harness, "_job", flaky)
    table = run(ExperimentSpec("final-phase", [6], replicates=3), threads=1)
    assert [r["replicate"] for r in table.rows] == [0, 2]
    assert table.metadata["failures"] == [{"n": 6, "replicate": 1, "error": "RuntimeError: boom"}]


def test_csv_roundtrip(tmp_path):
    table = run(ExperimentSpec("final-phase", [6], replicates=4, seed=1))
    path = tmp_path / "t.csv"
    table.write(path)
    back = ResultTable.read_csv(path)
    assert back.columns == table.columns
    np.testing.assert_allclose(back.column("Tc"), table.column("Tc"))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["t.csv", "t.csv.meta.json"]


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "x.txt"
    harness.atomic_write(target, "hello\n")
    assert target.read_text() == "hello\n"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


def test_summarize():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s["mean"] == 2.5 and s["var"] == pytest.approx(5 / 3)
    with pytest.raises(ValueError):
        summarize([])


def test_var_se_covers_normal_variance():
    rng = np.random.default_rng(0)
    s = summarize(rng.normal(0, 2, 40000))
    assert abs(s["var"] - 4) < 3 * s["var_se"]
    assert s["var_se"] == pytest.approx(4 * math.sqrt(2 / 40000), rel=0.05)


def test_fit_log_slope_recovers_slope():
    rng = np.random.default_rng(1)
    rows = [{"n": n, "Tc": 3 * math.log(n) + 1 + rng.normal(0, 0.5)}
            for n in (2**k for k in range(6, 14)) for _ in range(400)]
    fit = fit_log_slope(rows)
    assert fit["slope"] == pytest.approx(3.0, abs=0.05)
    lo, hi = fit["ci95"]
    assert lo < fit["slope"] < hi and hi - lo < 0.1


def test_fit_needs_three_sizes():
    with pytest.raises(ContractError):
        fit_log_slope([{"n": 10, "Tc": 1.0}, {"n": 20, "Tc": 2.0}])


def test_words_created_small_n_moments():
    table = run(ExperimentSpec("early-phase", [10], replicates=20000, seed=11))
    s = summarize(table.column("X"))
    assert abs(s["mean"] - 5) < 3 * s["se"]
    assert abs(s["var"] - 20 / 17) < 3 * s["var_se"]


def test_chi_square_merges_sparse_bins():
    res = harness.chi_square_same_distribution([1] * 50 + [2] * 50 + [9], [1] * 48 + [2] * 52)
    assert res["categories"] == 2 and res["p_value"] > 0.5


def test_plateau_column():
    table = run(ExperimentSpec("final-phase", [50], replicates=2, plateau=True))
    assert "z_mid" in table.columns
    assert all(0 <= r["z_mid"] <= 1 for r in table.rows)


def test_ode_compare_small():
    table = run(ExperimentSpec("ode-compare", [2000], replicates=3, mode="normalized",
                               init="0.6,0.2,0.2", horizon=3.0))
    assert all(r["sup_dist"] < 0.1 for r in table.rows)
