"""Declarative ensemble runner and the statistics used on its output.

An :class:`ExperimentSpec` names a kind of experiment, an n grid, a number
of replicates and a master seed.  :func:`run` executes every (n, replicate)
job, each on its own derived random stream, and returns a
:class:`ResultTable` whose rows are sorted by (n, replicate) and carry the
replicate seed, so the table does not depend on execution order.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .core import Configuration, ContractError, Outcome, graphical_steps
from .fast import run_full
from .ode import integrate
from .reduced import ReducedState, simulate, time_average
from .rng import make_rng, replicate_seed

KINDS = ("early-phase", "middle-phase", "final-phase", "ode-compare", "verify-bounds", "oracle-equivalence")
_KIND_STREAM = {k: i + 1 for i, k in enumerate(KINDS)}
CONSENSUS_COLUMNS = ("n", "replicate", "seed", "X0", "Y0", "Z0", "mode", "Tc", "winner")


# ------------------------------------------------------------------ spec


@dataclass
class ExperimentSpec:
    """Flat description of an ensemble experiment.

    ``init`` is ``"half"`` for (n/2, n/2, 0) or three fractions x, y, z.
    ``variant`` selects the oracle pair for ``oracle-equivalence``
    (``"graphical"`` or ``"projection"``).  ``plateau`` adds the mid-window
    average of z to final-phase rows.
    """

    kind: str
    n_grid: list[int]
    replicates: int = 1
    seed: int = 0
    mode: str = "exact"
    init: Any = "half"
    horizon: float | None = None
    snapshot_dt: float | None = None
    variant: str = "graphical"
    plateau: bool = False
    checks: list[str] = field(default_factory=lambda: ["azuma", "poisson", "last-passage", "appendix"])
    out: str | None = None

    def __post_init__(self):
        self.n_grid = [int(n) for n in self.n_grid]
        self.validate()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ContractError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.replicates < 1:
            raise ContractError("replicates must be >= 1")
        if not self.n_grid and self.kind != "verify-bounds":
            raise ContractError("n grid must not be empty")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ContractError("n grid must be strictly increasing")
        if any(n < 2 for n in self.n_grid):
            raise ContractError("every n must be at least 2")
        if self.mode not in ("exact", "normalized"):
            raise ContractError("mode must be exact or normalized")
        if self.snapshot_dt is not None and not self.snapshot_dt > 0:
            raise ContractError("snapshot spacing must be positive")
        if self.variant not in ("graphical", "projection"):
            raise ContractError("variant must be graphical or projection")
        initial_counts(self.init, max(self.n_grid, default=2))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ContractError(f"unknown spec keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def initial_counts(init, n: int) -> tuple[int, int, int]:
    if init == "half":
        X = n // 2
        return X, n - X, 0
    if isinstance(init, str):
        init = [float(v) for v in init.split(",")]
    x, y, z = (float(v) for v in init)
    if min(x, y, z) < 0 or abs(x + y + z - 1.0) > 1e-9:
        raise ContractError(f"initial fractions {init} must be non-negative and sum to 1")
    X = int(round(x * n))
    Y = int(round(y * n))
    return X, Y, n - X - Y


# ------------------------------------------------------------------ table


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[dict]
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def select(self, **equal) -> "ResultTable":
        rows = [r for r in self.rows if all(r[k] == v for k, v in equal.items())]
        return ResultTable(self.columns, rows, dict(self.metadata))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row.get(k)) for k in self.columns})
        return buf.getvalue()

    def write(self, path) -> None:
        """Write the CSV and a sibling ``.meta.json``, each atomically."""
        atomic_write(path, self.to_csv())
        atomic_write(str(path) + ".meta.json", json.dumps(self.metadata, indent=2, sort_keys=True))

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = [{k: _parse(v) for k, v in row.items()} for row in reader]
            return cls(list(reader.fieldnames or []), rows)


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return "" if v is None else v


def _parse(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ------------------------------------------------------------------ jobs


def words_created_graphical(n: int, seed: int) -> int:
    """Number of words created before every agent knows one, graphical engine."""
    config = Configuration.mute(n)
    mute = n
    created = 0
    for step in graphical_steps(config, make_rng(seed)):
        if step.event.outcome is Outcome.INVENTION:
            created += 1
        for pre, post in ((step.pre_speaker, step.post_speaker), (step.pre_listener, step.post_listener)):
            if not pre and post:
                mute -= 1
        if mute == 0:
            return created
    raise RuntimeError("unreachable: infinite horizon")


def two_word_configuration(X: int, Y: int, Z: int) -> Configuration:
    """Agents 0..X-1 know word 0, the next Y know word 1, the rest know both."""
    vocab = [(0,)] * X + [(1,)] * Y + [(0, 1)] * Z
    return Configuration.from_vocabularies(vocab)


def _job(spec_dict: dict, n: int, rep: int) -> dict:
    spec = ExperimentSpec.from_dict(spec_dict)
    seed = replicate_seed(spec.seed, rep, (_KIND_STREAM[spec.kind], n))
    row: dict = {"n": n, "replicate": rep, "seed": seed}
    kind = spec.kind
    if kind == "early-phase":
        run = run_full(n, seed, stop="T_o")
        row.update(X=run.created, T_o=run.t_o)
    elif kind == "middle-phase":
        a = 0.6 * math.log(n)
        b = spec.horizon if spec.horizon is not None else n ** 0.4
        run = run_full(n, seed, horizon=b, window=(a, b))
        dev = max(abs(run.vmin - n / 2), abs(run.vmax - n / 2))
        row.update(a=a, b=b, Vmin=run.vmin, Vmax=run.vmax, sup_dev=dev / n)
    elif kind == "final-phase":
        X, Y, Z = initial_counts(spec.init, n)
        res = simulate(ReducedState(X, Y, Z), seed, spec.mode, record=spec.plateau)
        row.update(X0=X, Y0=Y, Z0=Z, mode=spec.mode, Tc=res.time, winner=res.winner or "")
        if spec.plateau:
            path = res.path
            z = path.states[:, 2] / n
            row["z_mid"] = time_average(path, z, res.time / 3, 2 * res.time / 3)
    elif kind == "ode-compare":
        row.update(sup_dist=chain_ode_distance(n, seed, spec))
    elif kind == "oracle-equivalence":
        if spec.variant == "graphical":
            row.update(engine="graphical", X=words_created_graphical(n, seed))
            seed2 = replicate_seed(spec.seed, rep, (_KIND_STREAM[kind], n, 1))
            row.update(seed_ref=seed2, X_ref=run_full(n, seed2, stop="T_o").created)
        else:
            X, Y, Z = initial_counts(spec.init, n)
            full = run_full(n, seed, stop="consensus", config=two_word_configuration(X, Y, Z))
            seed2 = replicate_seed(spec.seed, rep, (_KIND_STREAM[kind], n, 1))
            red = simulate(ReducedState(X, Y, Z), seed2, "exact")
            row.update(Tc=full.time, seed_ref=seed2, Tc_ref=red.time)
    else:
        raise ContractError(f"kind {kind!r} has no per-replicate job")
    return row


def chain_ode_distance(n: int, seed: int, spec: ExperimentSpec, dt: float = 0.01, h: float = 1e-3) -> float:
    """Sup over a time grid of max(|u - u_ode|, |z - z_ode|) against the (u, z) system."""
    X, Y, Z = initial_counts(spec.init, n)
    horizon = spec.horizon if spec.horizon is not None else 10.0
    every = int(round(dt / h))
    traj = integrate("uz", (abs(X - Y) / n, Z / n), h=h, horizon=horizon, sample_every=every)
    res = simulate(ReducedState(X, Y, Z), seed, spec.mode, horizon=horizon, grid=traj.t, stop_at_absorption=False)
    g = res.grid_states
    chain = np.column_stack([np.abs(g[:, 0] - g[:, 1]) / n, g[:, 2] / n])
    m = min(len(chain), len(traj.t))
    return float(np.max(np.abs(chain[:m] - traj.state[:m])))


def _run_chunk(args) -> list:
    spec_dict, jobs = args
    out = []
    for n, rep in jobs:
        try:
            out.append(("ok", _job(spec_dict, n, rep)))
        except Exception as exc:  # reported per replicate
            out.append(("error", {"n": n, "replicate": rep, "error": f"{type(exc).__name__}: {exc}"}))
    return out


def thread_count() -> int:
    raw = os.environ.get("NG_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ContractError(f"NG_THREADS must be an integer, got {raw!r}") from None
    if k < 0:
        raise ContractError("NG_THREADS must be >= 0")
    return os.cpu_count() or 1 if k == 0 else k


_COLUMNS = {
    "early-phase": ["n", "replicate", "seed", "X", "T_o"],
    "middle-phase": ["n", "replicate", "seed", "a", "b", "Vmin", "Vmax", "sup_dev"],
    "final-phase": list(CONSENSUS_COLUMNS),
    "ode-compare": ["n", "replicate", "seed", "sup_dist"],
}


def run(spec: ExperimentSpec, threads: int | None = None) -> ResultTable:
    """Execute every replicate of ``spec``; write outputs if ``spec.out`` is set."""
    spec.validate()
    if spec.kind == "verify-bounds":
        table = _verify_table(spec)
    else:
        jobs = [(n, rep) for n in spec.n_grid for rep in range(spec.replicates)]
        k = thread_count() if threads is None else threads
        spec_dict = spec.to_dict()
        if k <= 1:
            results = _run_chunk((spec_dict, jobs))
        else:
            chunks = [jobs[i::k * 4] for i in range(k * 4)]
            with ProcessPoolExecutor(max_workers=k) as pool:
                results = [r for part in pool.map(_run_chunk, [(spec_dict, c) for c in chunks if c]) for r in part]
        rows = sorted((r for s, r in results if s == "ok"), key=lambda r: (r["n"], r["replicate"]))
        failures = sorted((r for s, r in results if s == "error"), key=lambda r: (r["n"], r["replicate"]))
        columns = list(_COLUMNS.get(spec.kind, rows[0].keys() if rows else ["n", "replicate", "seed"]))
        if spec.kind == "final-phase" and spec.plateau:
            columns.append("z_mid")
        table = ResultTable(columns, rows, {"failures": failures})
    table.metadata.update(spec=spec.to_dict(), spec_digest=spec.digest(), seed=spec.seed, build=__version__)
    if spec.out:
        table.write(spec.out)
    return table


def _verify_table(spec: ExperimentSpec) -> ResultTable:
    from .concentration import suite

    reports = suite.run_suite(seed=spec.seed, checks=spec.checks, scale=spec.replicates)
    rows = []
    for rep in reports:
        for cell in rep.cells:
            rows.append({"check": rep.name, "seed": spec.seed, "params": json.dumps(cell.params, sort_keys=True),
                         "empirical": cell.empirical, "bound": cell.bound, "se": cell.se, "pass": cell.passed})
    meta = {"reports": [r.to_dict() for r in reports]}
    return ResultTable(["check", "seed", "params", "empirical", "bound", "se", "pass"], rows, meta)


# ------------------------------------------------------------------ statistics


def summarize(values: Iterable[float], quantiles: Sequence[float] = (0.05, 0.25, 0.5, 0.75, 0.95)) -> dict:
    """Mean, variance, quantiles and standard errors of a sample.

    ``var_se`` is the large-sample standard error of the unbiased variance,
    sqrt((m4 - (N-3)/(N-1) s^4) / N) with m4 the fourth central moment.
    """
    x = np.asarray(list(values), dtype=float)
    if x.size == 0:
        raise ValueError("cannot summarize an empty selection")
    N = x.size
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if N > 1 else 0.0
    m4 = float(np.mean((x - mean) ** 4))
    var_se = math.sqrt(max(m4 - (N - 3) / (N - 1) * var * var, 0.0) / N) if N > 1 else math.inf
    return {
        "count": N,
        "mean": mean,
        "var": var,
        "se": math.sqrt(var / N) if N > 1 else math.inf,
        "var_se": var_se,
        "quantiles": {str(q): float(np.quantile(x, q)) for q in quantiles},
    }


def fit_log_slope(table: ResultTable | Sequence[dict], x: str = "n", y: str = "Tc") -> dict:
    """Least squares of mean(y | n) against ln n."""
    rows = table.rows if isinstance(table, ResultTable) else list(table)
    groups: dict[float, list[float]] = {}
    for r in rows:
        v = float(r[y])
        if math.isfinite(v):
            groups.setdefault(float(r[x]), []).append(v)
    if len(groups) < 3:
        raise ContractError("need at least 3 distinct n values")
    ns = np.array(sorted(groups))
    means = np.array([np.mean(groups[k]) for k in ns])
    fit = stats.linregress(np.log(ns), means)
    k = len(ns)
    half = stats.t.ppf(0.975, k - 2) * fit.stderr if k > 2 else math.inf
    return {
        "slope": float(fit.slope),
        "intercept": float(fit.intercept),
        "stderr": float(fit.stderr),
        "r2": float(fit.rvalue ** 2),
        "ci95": [float(fit.slope - half), float(fit.slope + half)],
        "points": [{"n": float(a), "mean": float(b), "count": len(groups[a])} for a, b in zip(ns, means)],
    }


def chi_square_same_distribution(a: Sequence[int], b: Sequence[int], min_expected: float = 5.0) -> dict:
    """Two-sample chi-square test on integer-valued samples.

    Sparse outer categories are merged until every expected count is at
    least ``min_expected``.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    values = np.union1d(a, b)
    table = np.array([[np.sum(a == v) for v in values], [np.sum(b == v) for v in values]], dtype=float)
    bins = [table[:, i].copy() for i in range(table.shape[1])]

    def expected_ok(col):
        tot = col.sum()
        return all(table[r].sum() * tot / table.sum() >= min_expected for r in range(2))

    merged = []
    acc = np.zeros(2)
    for col in bins:
        acc = acc + col
        if expected_ok(acc):
            merged.append(acc)
            acc = np.zeros(2)
    if acc.sum():
        if merged:
            merged[-1] = merged[-1] + acc
        else:
            merged.append(acc)
    obs = np.array(merged).T
    if obs.shape[1] < 2:
        return {"statistic": 0.0, "dof": 0, "p_value": 1.0, "categories": int(obs.shape[1])}
    chi2, p, dof, _ = stats.chi2_contingency(obs, correction=False)
    return {"statistic": float(chi2), "dof": int(dof), "p_value": float(p), "categories": int(obs.shape[1])}


def equivalence_report(table: ResultTable, alpha: float = 0.01) -> dict:
    """Chi-square on X (graphical) or KS on T_c (projection) for an oracle-equivalence table."""
    if not table.rows:
        raise ValueError("empty table")
    if "X" in table.rows[0]:
        test = chi_square_same_distribution(table.column("X"), table.column("X_ref"))
        test["test"] = "chi-square"
    else:
        ks = stats.ks_2samp(table.column("Tc"), table.column("Tc_ref"))
        test = {"test": "ks", "statistic": float(ks.statistic), "p_value": float(ks.pvalue)}
    test["alpha"] = alpha
    test["pass"] = bool(test["p_value"] > alpha)
    test["samples"] = len(table.rows)
    return test
