"""Two-word reduced chain on type counts (X, Y, Z).

With only words A and B left, every agent has type A, B or AB and the
counts (X, Y, Z) form a continuous-time Markov chain with eight reactions:

====  ================  ===============  ==========================
row   reaction          jump (dX,dY,dZ)  exact rate
====  ================  ===============  ==========================
r1    A + AB -> 2AB     (-1,  0, +1)     XZ / (2(n-1))
r2    A + AB -> 2A      (+1,  0, -1)     3XZ / (2(n-1))
r3    B + AB -> 2AB     ( 0, -1, +1)     YZ / (2(n-1))
r4    B + AB -> 2B      ( 0, +1, -1)     3YZ / (2(n-1))
r5    AB + AB -> 2A     (+2,  0, -2)     Z(Z-1) / (2(n-1))
r6    AB + AB -> 2B     ( 0, +2, -2)     Z(Z-1) / (2(n-1))
r7    A + B -> A + AB   ( 0, -1, +1)     XY / (n-1)
r8    A + B -> B + AB   (-1,  0, +1)     XY / (n-1)
====  ================  ===============  ==========================

``mode="exact"`` uses the n-1 denominators of the chain on K_n;
``mode="normalized"`` replaces n-1 by n, which is the large-n scaling used
for the drift formulas.  The chain is stepped with Gillespie's direct
method; the compiled kernel and :func:`gillespie_step` draw the same two
numbers per step (exponential gap, then the reaction selector) so they agree
path by path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import Configuration, ContractError
from .rng import make_rng

JUMPS = np.array([
    [-1, 0, 1],
    [1, 0, -1],
    [0, -1, 1],
    [0, 1, -1],
    [2, 0, -2],
    [0, 2, -2],
    [0, -1, 1],
    [-1, 0, 1],
], dtype=np.int64)

REACTIONS = (
    "A+AB->2AB", "A+AB->2A", "B+AB->2AB", "B+AB->2B",
    "AB+AB->2A", "AB+AB->2B", "A+B->A+AB", "A+B->B+AB",
)

MODES = ("exact", "normalized")


@dataclass(frozen=True)
class ReducedState:
    X: int
    Y: int
    Z: int

    def __post_init__(self):
        if min(self.X, self.Y, self.Z) < 0:
            raise ContractError(f"negative type count in {self}")
        if self.n < 2:
            raise ContractError("need at least two agents")

    @property
    def n(self) -> int:
        return self.X + self.Y + self.Z

    @property
    def x(self) -> float:
        return self.X / self.n

    @property
    def y(self) -> float:
        return self.Y / self.n

    @property
    def z(self) -> float:
        return self.Z / self.n

    @property
    def u(self) -> float:
        return abs(self.X - self.Y) / self.n

    @property
    def b(self) -> float:
        return self.z - Z_STAR

    def is_absorbing(self) -> bool:
        return self.Z == 0 and (self.X == 0 or self.Y == 0)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.X, self.Y, self.Z)


Z_STAR = math.sqrt(5.0) - 2.0


def _exact_flag(mode: str) -> bool:
    if mode not in MODES:
        raise ContractError(f"mode must be one of {MODES}, got {mode!r}")
    return mode == "exact"


@njit(cache=True)
def _fill_rates(X, Y, Z, n, exact, out):
    den = float(n - 1) if exact else float(n)
    xz = X * Z / den
    yz = Y * Z / den
    zz = Z * (Z - 1) / (2.0 * den)
    xy = X * Y / den
    out[0] = 0.5 * xz
    out[1] = 1.5 * xz
    out[2] = 0.5 * yz
    out[3] = 1.5 * yz
    out[4] = zz
    out[5] = zz
    out[6] = xy
    out[7] = xy


def reaction_rates(state: ReducedState, mode: str = "exact") -> np.ndarray:
    out = np.empty(8)
    _fill_rates(state.X, state.Y, state.Z, state.n, _exact_flag(mode), out)
    return out


def rates_array(X, Y, Z, mode: str = "exact") -> np.ndarray:
    """Vectorised rates for arrays of states, shape (len, 8)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n = X + Y + Z
    den = n - 1 if _exact_flag(mode) else n
    xz, yz, xy = X * Z / den, Y * Z / den, X * Y / den
    zz = Z * (Z - 1) / (2 * den)
    return np.stack([0.5 * xz, 1.5 * xz, 0.5 * yz, 1.5 * yz, zz, zz, xy, xy], axis=-1)


def gillespie_step(state: ReducedState, rng: np.random.Generator, mode: str = "exact") -> tuple[float, ReducedState]:
    """One direct-method step: (waiting time, next state)."""
    if state.is_absorbing():
        raise ContractError("no transitions out of an absorbing state")
    q = reaction_rates(state, mode)
    total = q.sum()
    dt = rng.standard_exponential() / total
    pick = rng.random() * total
    i = _select(q, pick)
    dX, dY, dZ = JUMPS[i]
    return dt, ReducedState(state.X + int(dX), state.Y + int(dY), state.Z + int(dZ))


@njit(cache=True)
def _select(q, pick):
    acc = 0.0
    for i in range(7):
        acc += q[i]
        if pick < acc:
            return i
    # rounding can leave pick just above the last partial sum
    i = 7
    while q[i] <= 0.0:
        i -= 1
    return i


@njit(cache=True)
def _simulate_kernel(rng, X, Y, Z, exact, t0, t_max, max_steps, stop_absorb, grid, record):
    n = X + Y + Z
    q = np.empty(8)
    jumps = np.array([[-1, 0, 1], [1, 0, -1], [0, -1, 1], [0, 1, -1],
                      [2, 0, -2], [0, 2, -2], [0, -1, 1], [-1, 0, 1]])
    ng = grid.shape[0]
    gX = np.empty(ng, np.int64)
    gY = np.empty(ng, np.int64)
    gZ = np.empty(ng, np.int64)
    gi = 0
    cap = 1024 if record else 1
    pt = np.empty(cap)
    pX = np.empty(cap, np.int64)
    pY = np.empty(cap, np.int64)
    pZ = np.empty(cap, np.int64)
    npath = 0
    if record:
        pt[0] = t0
        pX[0] = X
        pY[0] = Y
        pZ[0] = Z
        npath = 1
    t = t0
    steps = 0
    status = 0
    while True:
        if Z == 0 and (X == 0 or Y == 0):
            status = 1
            if stop_absorb:
                break
            t = t_max
            break
        if steps >= max_steps:
            status = 2
            break
        _fill_rates(X, Y, Z, n, exact, q)
        total = 0.0
        for i in range(8):
            total += q[i]
        dt = rng.standard_exponential() / total
        pick = rng.random() * total
        tn = t + dt
        while gi < ng and grid[gi] < tn:
            gX[gi] = X
            gY[gi] = Y
            gZ[gi] = Z
            gi += 1
        if tn > t_max:
            t = t_max
            break
        i = _select(q, pick)
        X += jumps[i, 0]
        Y += jumps[i, 1]
        Z += jumps[i, 2]
        t = tn
        steps += 1
        if record:
            if npath == cap:
                cap *= 2
                pt2 = np.empty(cap)
                pX2 = np.empty(cap, np.int64)
                pY2 = np.empty(cap, np.int64)
                pZ2 = np.empty(cap, np.int64)
                pt2[:npath] = pt[:npath]
                pX2[:npath] = pX[:npath]
                pY2[:npath] = pY[:npath]
                pZ2[:npath] = pZ[:npath]
                pt, pX, pY, pZ = pt2, pX2, pY2, pZ2
            pt[npath] = t
            pX[npath] = X
            pY[npath] = Y
            pZ[npath] = Z
            npath += 1
    if status != 2:
        while gi < ng and grid[gi] <= t:
            gX[gi] = X
            gY[gi] = Y
            gZ[gi] = Z
            gi += 1
    final = np.array([X, Y, Z, steps, status, gi, npath], np.int64)
    return t, final, gX, gY, gZ, pt[:npath], pX[:npath], pY[:npath], pZ[:npath]


@dataclass
class ReducedPath:
    """Event-resolved trajectory: state[k] holds on [times[k], times[k+1])."""

    times: np.ndarray
    states: np.ndarray  # (len, 3) int
    end_time: float
    mode: str

    @property
    def n(self) -> int:
        return int(self.states[0].sum())


@dataclass
class ReducedRun:
    seed: int
    init: ReducedState
    mode: str
    time: float
    final: ReducedState
    steps: int
    absorbed: bool
    timed_out: bool
    grid: np.ndarray = field(repr=False)
    grid_states: np.ndarray = field(repr=False)
    path: ReducedPath | None = field(default=None, repr=False)

    @property
    def winner(self) -> str | None:
        if not self.absorbed:
            return None
        return "A" if self.final.X > 0 else "B"


def simulate(init: ReducedState, seed: int, mode: str = "exact", horizon: float = math.inf,
             grid=None, record: bool = False, max_steps: int = 2**62, stop_at_absorption: bool = True) -> ReducedRun:
    exact = _exact_flag(mode)
    grid = np.zeros(0) if grid is None else np.asarray(grid, dtype=float)
    t, final, gX, gY, gZ, pt, pX, pY, pZ = _simulate_kernel(
        make_rng(seed), init.X, init.Y, init.Z, exact, 0.0, float(horizon), int(max_steps),
        stop_at_absorption, grid, record)
    X, Y, Z, steps, status, ng, npath = (int(v) for v in final)
    path = None
    if record:
        path = ReducedPath(pt.copy(), np.stack([pX, pY, pZ], axis=1), float(t), mode)
    return ReducedRun(
        seed=seed, init=init, mode=mode, time=float(t), final=ReducedState(X, Y, Z), steps=steps,
        absorbed=status == 1, timed_out=status == 2, grid=grid[:ng],
        grid_states=np.stack([gX[:ng], gY[:ng], gZ[:ng]], axis=1), path=path)


def simulate_to_consensus(init: ReducedState, seed: int, mode: str = "exact", record: bool = False,
                          max_steps: int = 2**62) -> ReducedRun:
    """Run until absorption at (n,0,0) or (0,n,0); ``run.time`` is T_c."""
    return simulate(init, seed, mode, math.inf, record=record, max_steps=max_steps)


def time_average(path: ReducedPath, values: np.ndarray, t_a: float, t_b: float) -> float:
    """Average of a piecewise-constant path quantity over [t_a, t_b]."""
    if not t_b > t_a:
        raise ValueError("need t_b > t_a")
    edges = np.append(path.times, path.end_time)
    lo = np.clip(edges[:-1], t_a, t_b)
    hi = np.clip(edges[1:], t_a, t_b)
    return float(np.sum(values * (hi - lo)) / (t_b - t_a))


def project_full_to_reduced(config: Configuration, word_a: int | None = None, word_b: int | None = None) -> ReducedState:
    """Count agents of type A, B and AB in a two-word configuration."""
    alive = sorted(config.words())
    if word_a is None or word_b is None:
        if len(alive) > 2 or not alive:
            raise ContractError(f"expected at most two words, found {len(alive)}")
        word_a = alive[0] if word_a is None else word_a
        word_b = (alive[1] if len(alive) == 2 else word_a + 1) if word_b is None else word_b
    pair = {word_a, word_b}
    X = Y = Z = 0
    for agent, vocab in enumerate(config.vocab):
        if not vocab or not set(vocab) <= pair:
            raise ContractError(f"agent {agent} has vocabulary {vocab} outside {{A, B}}")
        if len(vocab) == 2:
            Z += 1
        elif vocab[0] == word_a:
            X += 1
        else:
            Y += 1
    return ReducedState(X, Y, Z)


def drift_u(state: ReducedState) -> float:
    """Drift of u = |X - Y|/n under normalized rates.

    Equal to u*z away from the diagonal; within one agent of it the
    reactions that cross or touch the diagonal add a bounded correction.
    """
    n = state.n
    x, y, z = state.x, state.y, state.z
    d = abs(state.X - state.Y)
    if d >= 2:
        return state.u * z
    if d == 1:
        return state.u * z + z * (z - 1.0 / n)
    return 2.0 * (x * z + y * z + z * (z - 1.0 / n) + x * y)


def drift_b(state: ReducedState) -> float:
    """Drift of b = z - z* under normalized rates."""
    z, u = state.z, state.u
    b = z - Z_STAR
    return 0.5 * (-b * (z + 2.0 + math.sqrt(5.0)) - u * u) + 2.0 * z / state.n


def table_du(state: ReducedState) -> np.ndarray:
    """The u-jump of each reaction written with sign and indicator terms (times 1/n)."""
    n = state.n
    d = state.X - state.Y
    sgn = float(np.sign(d))
    on_diag = 1.0 if d == 0 else 0.0
    return np.array([
        -sgn + on_diag,
        sgn + on_diag,
        sgn + on_diag,
        -sgn + on_diag,
        2.0 * (sgn + (1.0 if d in (0, -1) else 0.0)),
        2.0 * (-sgn + (1.0 if d in (0, 1) else 0.0)),
        sgn + on_diag,
        -sgn + on_diag,
    ]) / n
