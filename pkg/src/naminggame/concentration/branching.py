"""Branching process with immigration in a decaying random environment.

X starts at 1 and grows by one at rate

    Lambda_t(X_t) = b + sum_{i=2}^{X_t} 1 / (1 + N^i_t),

where the N^i are independent rate-r Poisson clocks running from time 0.
An individual born at time s therefore arrives with N^i_s ~ Poisson(r s)
and then ticks at rate r.  The frozen variant Y stops each clock at its
owner's birth, so its rate Q_t only changes at births.

The simulation is exact (Gillespie over births and clock ticks).  Clocks
are shared between X and Y in :func:`simulate_coupled`, where births of Y
are proposed at rate Q_t and accepted by X with probability Lambda_t / Q_t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..core import ContractError
from ..fast import run_full
from ..rng import make_rng, replicate_seed
from .tails import TailBoundReport, binomial_cell, order_cell

OK, TRUNCATED = 0, 1


@dataclass
class BranchingEnvironment:
    b: float
    r: float
    cap: int

    def __post_init__(self):
        if not self.b >= 1:
            raise ContractError("immigration constant b must be >= 1")
        if not 0.5 <= self.r <= 1.0:
            raise ContractError("clock rate r must lie in [1/2, 1]")
        if not (isinstance(self.cap, (int, np.integer)) and self.cap >= 1):
            raise ContractError("population cap must be a finite positive integer")


@njit(cache=True)
def _dominator_kernel(rng, b, r, horizon, cap, frozen):
    births = np.empty(64)
    clocks = np.empty(64, np.int64)  # clocks[j] belongs to individual j + 2
    nb = 0
    t = 0.0
    lam = b
    status = 0
    while True:
        ticking = 0.0 if frozen else r * nb
        total = lam + ticking
        t += rng.standard_exponential() / total
        if t > horizon:
            break
        if rng.random() * total < lam:
            if nb + 1 >= cap:
                status = 1
                break
            if nb == births.shape[0]:
                births = np.concatenate((births, np.empty(nb)))
                clocks = np.concatenate((clocks, np.empty(nb, np.int64)))
            k = rng.poisson(r * t)
            births[nb] = t
            clocks[nb] = k
            nb += 1
            lam += 1.0 / (1.0 + k)
        else:
            j = rng.integers(0, nb)
            k = clocks[j]
            lam += 1.0 / (2.0 + k) - 1.0 / (1.0 + k)
            clocks[j] = k + 1
    return births[:nb].copy(), status


@dataclass
class BranchingPath:
    """Birth times of one dominator path; X_t = 1 + #{births <= t}."""

    env: BranchingEnvironment
    seed: int
    horizon: float
    births: np.ndarray = field(repr=False)
    truncated: bool
    frozen: bool = False

    def value_at(self, t) -> np.ndarray:
        return 1 + np.searchsorted(self.births, np.asarray(t, dtype=float), side="right")

    @property
    def final(self) -> int:
        return 1 + len(self.births)


def simulate_branching_dominator(b: float, r: float, horizon: float, cap: int, seed: int,
                                 frozen: bool = False) -> BranchingPath:
    """Exact simulation of X (or the frozen Y when ``frozen``) on [0, horizon]."""
    env = BranchingEnvironment(b, r, cap)
    if not horizon >= 0:
        raise ContractError("horizon must be non-negative")
    births, status = _dominator_kernel(make_rng(seed), float(b), float(r), float(horizon), int(cap), bool(frozen))
    return BranchingPath(env, seed, float(horizon), births, status == TRUNCATED, frozen)


@njit(cache=True)
def _coupled_kernel(rng, b, r, horizon, cap):
    # individual j (j = 0, 1, ...) is individual j + 2 of both processes
    cy = np.empty(64, np.int64)  # frozen clock value used by Y
    cx = np.empty(64, np.int64)  # live clock value used by X
    sy = np.empty(64)  # Y's birth time, i.e. when cy was read
    nx = 0
    ny = 0
    q = b
    lam = b
    t = 0.0
    violations = 0
    checks = 0
    worst = 0.0
    status = 0
    while True:
        total = q + r * nx
        t += rng.standard_exponential() / total
        if t > horizon:
            break
        if rng.random() * total < q:
            checks += 1
            if lam > q * (1 + 1e-12):
                violations += 1
                if lam - q > worst:
                    worst = lam - q
            accept = rng.random() * q < lam
            if ny + 1 >= cap:
                status = 1
                break
            if ny == cy.shape[0]:
                cy = np.concatenate((cy, np.empty(ny, np.int64)))
                cx = np.concatenate((cx, np.empty(ny, np.int64)))
                sy = np.concatenate((sy, np.empty(ny)))
            k = rng.poisson(r * t)
            cy[ny] = k
            cx[ny] = k
            sy[ny] = t
            ny += 1
            q += 1.0 / (1.0 + k)
            if accept:
                # X's next individual may have been born earlier in Y
                k = cx[nx] + rng.poisson(r * (t - sy[nx]))
                cx[nx] = k
                nx += 1
                lam += 1.0 / (1.0 + k)
        else:
            j = rng.integers(0, nx)
            k = cx[j]
            lam += 1.0 / (2.0 + k) - 1.0 / (1.0 + k)
            cx[j] = k + 1
        if nx > ny:
            violations += 1
    return nx + 1, ny + 1, checks, violations, worst, status


@dataclass
class CoupledResult:
    x_final: int
    y_final: int
    checks: int
    violations: int
    worst_excess: float
    truncated: bool


def simulate_coupled(b: float, r: float, horizon: float, cap: int, seed: int) -> CoupledResult:
    """X and its frozen dominator Y on shared clocks; counts times Lambda_t > Q_t."""
    BranchingEnvironment(b, r, cap)
    out = _coupled_kernel(make_rng(seed), float(b), float(r), float(horizon), int(cap))
    x, y, checks, violations, worst, status = out
    return CoupledResult(int(x), int(y), int(checks), int(violations), float(worst), status == TRUNCATED)


def envelope(t, M: float, x: float, r: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return M * x * (x + np.log1p(t)) * (1.0 + t) ** (1.0 / r)


def envelope_check(b: float = 2.0, rs=(0.5, 0.9, 1.0), M: float = 1.0, x: float = 16.0, horizon: float = 100.0,
                   paths: int = 1000, seed: int = 0, cap: int = 10**7, level: float = 0.05) -> TailBoundReport:
    """Fraction of paths with sup_t X_t - envelope(t) > 0, against ``level``.

    X only jumps upward and the envelope is increasing, so the supremum is
    attained at a birth time.  Truncated paths count as exceedances.
    """
    report = TailBoundReport("branching-envelope")
    for ri, r in enumerate(rs):
        hits = 0
        for p in range(paths):
            path = simulate_branching_dominator(b, r, horizon, cap, replicate_seed(seed, p, (5, ri)))
            sizes = np.arange(2, path.final + 1)
            if path.truncated or np.any(sizes > envelope(path.births, M, x, r)):
                hits += 1
        report.cells.append(binomial_cell({"b": b, "r": r, "M": M, "x": x, "horizon": horizon}, hits, paths, level))
    return report


def cluster_sizes_at(n: int, t: float, seed: int) -> np.ndarray:
    """Sizes |C_t(w)| of every word created by time t (0 for extinct words)."""
    run = run_full(n, seed, horizon=t, keep_vocab=True)
    sizes = np.zeros(n, np.int64)
    for vocab in run.vocab:
        for w in vocab:
            sizes[w] += 1
    alive = sizes[sizes > 0]
    return np.concatenate((alive, np.zeros(run.deleted, np.int64)))


QUANTILES = (0.5, 0.9, 0.95)


def domination_check(ns=(100, 1000), ts=(1.0, 2.0, 5.0), runs: int = 100, paths: int = 2000, b: float = 2.0,
                     seed: int = 0) -> TailBoundReport:
    """Compare per-word cluster sizes of the full model with dominator quantiles.

    Each word's cluster starts at size 1 and is dominated by X run for the
    word's age, which is at most t; X is non-decreasing, so X_t dominates.
    The clock rate is r = 1 - b/(n-1).  A cell passes when the full-model
    quantile does not exceed the dominator quantile; the final cell per
    (n, t) bounds P(|C_t(w)| > q_0.95(X_t)) by 5% with binomial slack.
    """
    report = TailBoundReport("domination")
    for ni, n in enumerate(ns):
        r = 1.0 - b / (n - 1)
        for ti, t in enumerate(ts):
            sizes = np.concatenate([cluster_sizes_at(n, t, replicate_seed(seed, k, (6, ni, ti))) for k in range(runs)])
            dom = np.array([simulate_branching_dominator(b, r, t, 10**7, replicate_seed(seed, k, (7, ni, ti))).final
                            for k in range(paths)])
            for q in QUANTILES:
                qc = float(np.quantile(sizes, q))
                qx = float(np.quantile(dom, q))
                report.cells.append(order_cell({"n": n, "t": t, "q": q}, qc, qx, len(sizes)))
            q95 = float(np.quantile(dom, 0.95))
            report.cells.append(binomial_cell({"n": n, "t": t, "q": "exceed-q95", "dominator_q": q95},
                                              int(np.sum(sizes > q95)), len(sizes), 0.05))
    return report
