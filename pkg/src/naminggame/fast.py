"""Compiled agent-clock engine for ensemble runs.

The kernel mirrors :func:`naminggame.core.agent_clock_steps` draw for draw
(exponential gap, speaker, listener offset, uniform mark), so for the same
seed it produces the same trajectory as the reference engine.  Vocabularies
live in a dense ``(n, capacity)`` array that doubles when an agent runs out
of room; cluster sizes are kept as a histogram so the largest cluster is
available in O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import Configuration, ContractError, _check_n
from .observables import SERIES_COLUMNS
from .rng import make_rng

STOP_HORIZON, STOP_TO, STOP_CONSENSUS = 0, 1, 2
_STOP_CODES = {"horizon": STOP_HORIZON, "T_o": STOP_TO, "consensus": STOP_CONSENSUS}


@njit(cache=True)
def _grow(voc):
    n, cap = voc.shape
    out = np.empty((n, 2 * cap), np.int64)
    out[:, :cap] = voc
    return out


@njit(cache=True)
def _find(voc, v, k, word):
    lo = 0
    hi = k
    while lo < hi:
        mid = (lo + hi) >> 1
        if voc[v, mid] < word:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def _run_kernel(rng, voc, vlen, t0, horizon, grid, stop_mode, max_events, win_a, win_b):
    n = vlen.shape[0]
    csize = np.zeros(n, np.int64)
    hist = np.zeros(n + 2, np.int64)
    mute = 0
    for v in range(n):
        if vlen[v] == 0:
            mute += 1
        for j in range(vlen[v]):
            csize[voc[v, j]] += 1
    n_created = 0
    smax = 0
    for w in range(n):
        if csize[w] > 0:
            hist[csize[w]] += 1
            n_created += 1
            if csize[w] > smax:
                smax = csize[w]
    n_deleted = 0
    agreements = 0
    t = t0
    t_o = t0 if mute == 0 else -1.0
    ng = grid.shape[0]
    snaps = np.zeros((ng, 7))
    gi = 0
    events = 0
    alive = n_created
    vmin = alive
    vmax = alive
    in_window = t0 >= win_a and t0 <= win_b
    status = 0
    while True:
        if stop_mode == 1 and mute == 0:
            status = 1
            break
        if stop_mode == 2 and mute == 0 and alive == 1:
            status = 2
            break
        if events >= max_events:
            status = 3
            break
        dt = rng.standard_exponential() / n
        while not (t + dt > t):
            dt = rng.standard_exponential() / n
        tn = t + dt
        while gi < ng and grid[gi] < tn:
            snaps[gi, 0] = grid[gi]
            snaps[gi, 1] = alive
            snaps[gi, 2] = n_created
            snaps[gi, 3] = n_deleted
            snaps[gi, 4] = smax
            snaps[gi, 5] = agreements
            snaps[gi, 6] = mute
            gi += 1
        if not in_window and tn > win_a and tn <= win_b:
            # state on (win_a, tn) is the current one
            in_window = True
            vmin = alive
            vmax = alive
        if tn > horizon:
            t = horizon
            break
        if tn > win_b:
            in_window = False
        s = rng.integers(0, n)
        li = rng.integers(0, n - 1)
        if li >= s:
            li += 1
        u = rng.random()
        t = tn
        events += 1
        k = vlen[s]
        if k == 0:
            word = s
            voc[s, 0] = s
            vlen[s] = 1
            mute -= 1
            n_created += 1
            alive += 1
            csize[s] = 1
            hist[1] += 1
            if smax < 1:
                smax = 1
            agree = False
        else:
            i = int(u * k)
            if i >= k:
                i = k - 1
            word = voc[s, i]
            kl = vlen[li]
            pos = _find(voc, li, kl, word)
            agree = pos < kl and voc[li, pos] == word
        if agree:
            agreements += 1
            for side in range(2):
                v = s if side == 0 else li
                for j in range(vlen[v]):
                    w = voc[v, j]
                    if w == word:
                        continue
                    a = csize[w]
                    hist[a] -= 1
                    csize[w] = a - 1
                    if a > 1:
                        hist[a - 1] += 1
                    else:
                        n_deleted += 1
                        alive -= 1
                voc[v, 0] = word
                vlen[v] = 1
            while smax > 0 and hist[smax] == 0:
                smax -= 1
        else:
            kl = vlen[li]
            if kl == 0:
                mute -= 1
            if kl + 1 > voc.shape[1]:
                voc = _grow(voc)
            pos = _find(voc, li, kl, word)
            for j in range(kl, pos, -1):
                voc[li, j] = voc[li, j - 1]
            voc[li, pos] = word
            vlen[li] = kl + 1
            a = csize[word]
            if a > 0:
                hist[a] -= 1
            hist[a + 1] += 1
            csize[word] = a + 1
            if a + 1 > smax:
                smax = a + 1
        if mute == 0 and t_o < 0.0:
            t_o = t
        if in_window:
            if alive < vmin:
                vmin = alive
            if alive > vmax:
                vmax = alive
    if status == 0:
        while gi < ng and grid[gi] <= t:
            snaps[gi, 0] = grid[gi]
            snaps[gi, 1] = alive
            snaps[gi, 2] = n_created
            snaps[gi, 3] = n_deleted
            snaps[gi, 4] = smax
            snaps[gi, 5] = agreements
            snaps[gi, 6] = mute
            gi += 1
    consensus = -1
    if mute == 0 and alive == 1:
        consensus = voc[0, 0]
    counts = np.array([events, n_created, n_deleted, agreements, mute, smax, consensus, gi, status], np.int64)
    return t, t_o, counts, snaps, vmin, vmax, voc, vlen


@dataclass
class FullRun:
    """Summary of one compiled trajectory."""

    n: int
    seed: int
    time: float
    events: int
    created: int
    deleted: int
    agreements: int
    mute: int
    max_cluster: int
    t_o: float
    consensus_word: int | None
    stopped: str
    vmin: int
    vmax: int
    series: np.ndarray = field(repr=False)
    vocab: list[tuple[int, ...]] | None = field(default=None, repr=False)

    @property
    def alive(self) -> int:
        return self.created - self.deleted

    def series_rows(self) -> list[dict]:
        return [dict(zip(SERIES_COLUMNS, (float(r[0]),) + tuple(int(x) for x in r[1:]))) for r in self.series]


_STATUS = {0: "horizon", 1: "T_o", 2: "consensus", 3: "max_events"}


def _pack_config(config: Configuration):
    n = config.n
    cap = 8
    longest = max((len(v) for v in config.vocab), default=0)
    while cap < longest + 1:
        cap *= 2
    voc = np.zeros((n, cap), np.int64)
    vlen = np.zeros(n, np.int64)
    for v, words in enumerate(config.vocab):
        vlen[v] = len(words)
        voc[v, :len(words)] = words
    return voc, vlen


def run_full(n: int, seed: int, horizon: float = math.inf, grid=None, stop: str = "horizon",
             config: Configuration | None = None, window: tuple[float, float] | None = None,
             max_events: int = 2**62, keep_vocab: bool = False) -> FullRun:
    """Simulate one trajectory of the full model with the compiled engine.

    ``stop`` is ``"horizon"``, ``"T_o"`` (first time nobody is mute) or
    ``"consensus"``.  ``grid`` gives snapshot times; ``window=(a, b)`` makes
    the run report the exact min and max of |V_t| over a <= t <= b.
    """
    n = _check_n(n)
    if stop not in _STOP_CODES:
        raise ContractError(f"stop must be one of {sorted(_STOP_CODES)}")
    if stop == "horizon" and not math.isfinite(horizon):
        raise ContractError("an infinite horizon needs a stopping rule")
    config = Configuration.mute(n) if config is None else config
    if config.n != n:
        raise ContractError("configuration size does not match n")
    voc, vlen = _pack_config(config)
    grid = np.zeros(0) if grid is None else np.asarray(grid, dtype=float)
    wa, wb = (math.inf, -math.inf) if window is None else window
    t, t_o, counts, snaps, vmin, vmax, voc, vlen = _run_kernel(
        make_rng(seed), voc, vlen, float(config.time), float(horizon), grid, _STOP_CODES[stop],
        int(max_events), float(wa), float(wb))
    events, created, deleted, agreements, mute, smax, consensus, ngrid, status = (int(c) for c in counts)
    vocab = None
    if keep_vocab:
        vocab = [tuple(int(w) for w in voc[v, :vlen[v]]) for v in range(n)]
    return FullRun(
        n=n, seed=seed, time=float(t), events=events, created=created, deleted=deleted,
        agreements=agreements, mute=mute, max_cluster=smax, t_o=float(t_o) if t_o >= 0 else math.nan,
        consensus_word=None if consensus < 0 else consensus, stopped=_STATUS[status],
        vmin=int(vmin), vmax=int(vmax), series=snaps[:ngrid], vocab=vocab)
