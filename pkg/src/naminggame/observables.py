"""Incremental statistics of the full naming game.

A :class:`Tracker` is fed every :class:`~naminggame.core.Step` and keeps

* the word ledger: words ever created, words created then extinct;
* the cluster index: for each word the set of agents knowing it, the exact
  multiset of cluster sizes (so the largest cluster is O(1) to read) and the
  vocabulary size of every agent;
* agreement bookkeeping: number of agreements, agents involved in one,
  number of mute agents and the first time nobody is mute.

Each update costs O(size of the two vocabularies touched).
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import Configuration, Outcome, Step

SERIES_COLUMNS = ("t", "V", "Vo", "Vx", "S", "A", "Z")


@dataclass
class WordLedger:
    created: set[int] = field(default_factory=set)
    deleted: set[int] = field(default_factory=set)

    @property
    def alive_count(self) -> int:
        return len(self.created) - len(self.deleted)


class ClusterIndex:
    """Inverse map word -> knowers, with cluster-size statistics."""

    def __init__(self, n: int):
        self.n = n
        self.members: dict[int, set[int]] = {}
        self.vocab_size = [0] * n
        self._size_count: Counter[int] = Counter()
        self._max = 0

    def add(self, word: int, agent: int) -> None:
        club = self.members.get(word)
        if club is None:
            club = self.members[word] = set()
        assert agent not in club, "agent already knows the word"
        old = len(club)
        club.add(agent)
        self.vocab_size[agent] += 1
        if old:
            self._drop_size(old)
        self._size_count[old + 1] += 1
        if old + 1 > self._max:
            self._max = old + 1

    def remove(self, word: int, agent: int) -> bool:
        """Remove ``agent`` from the cluster of ``word``; True if it emptied."""
        club = self.members[word]
        old = len(club)
        club.remove(agent)
        self.vocab_size[agent] -= 1
        self._drop_size(old)
        if old > 1:
            self._size_count[old - 1] += 1
        else:
            del self.members[word]
        while self._max and not self._size_count.get(self._max):
            self._max -= 1
        return old == 1

    def _drop_size(self, size: int) -> None:
        c = self._size_count[size] - 1
        if c:
            self._size_count[size] = c
        else:
            del self._size_count[size]

    def cluster_size(self, word: int) -> int:
        club = self.members.get(word)
        return len(club) if club else 0

    @property
    def max_size(self) -> int:
        """S_t, the size of the largest cluster."""
        return self._max

    def size_multiset(self) -> Counter[int]:
        return Counter(self._size_count)

    def total_membership(self) -> int:
        return sum(len(c) for c in self.members.values())


@dataclass
class AgreementCounter:
    mute: int
    agreements: int = 0
    involved: set[int] = field(default_factory=set)
    first_agreement: dict[int, float] = field(default_factory=dict)
    t_o: float | None = None


class Tracker:
    """Observer maintaining all statistics along one trajectory."""

    def __init__(self, n: int):
        self.n = n
        self.ledger = WordLedger()
        self.index = ClusterIndex(n)
        self.counter = AgreementCounter(mute=n)
        self.time = 0.0
        self.events = 0

    @classmethod
    def from_configuration(cls, config: Configuration) -> "Tracker":
        tr = cls(config.n)
        tr.time = config.time
        for agent, vocab in enumerate(config.vocab):
            for w in vocab:
                tr.index.add(w, agent)
                tr.ledger.created.add(w)
        tr.counter.mute = sum(1 for v in config.vocab if not v)
        if tr.counter.mute == 0:
            tr.counter.t_o = config.time
        return tr

    def __call__(self, step: Step) -> None:
        self.on_event(step)

    def on_event(self, step: Step) -> None:
        ev = step.event
        self.time = ev.time
        self.events += 1
        index = self.index
        counter = self.counter
        if ev.outcome is Outcome.INVENTION:
            assert not step.pre_speaker, "invention by a non-mute speaker"
            assert counter.t_o is None, "word created after every agent knew a word"
            self.ledger.created.add(ev.word)
        for agent, pre, post in ((ev.speaker, step.pre_speaker, step.post_speaker),
                                 (ev.listener, step.pre_listener, step.post_listener)):
            if pre is post:
                continue
            if not pre and post:
                counter.mute -= 1
            pre_set = set(pre)
            post_set = set(post)
            for w in post_set - pre_set:
                index.add(w, agent)
            for w in pre_set - post_set:
                if index.remove(w, agent):
                    self.ledger.deleted.add(w)
        if ev.outcome is Outcome.AGREEMENT:
            counter.agreements += 1
            for agent in (ev.speaker, ev.listener):
                if agent not in counter.involved:
                    counter.involved.add(agent)
                    counter.first_agreement[agent] = ev.time
        if counter.mute == 0 and counter.t_o is None:
            counter.t_o = ev.time

    def consensus_word(self) -> int | None:
        if self.counter.mute or self.ledger.alive_count != 1:
            return None
        (word,) = self.index.members
        return word

    def two_word_u(self) -> float:
        """|X - Y|/n when at most two words are alive and nobody is mute, else NaN."""
        if self.counter.mute:
            return math.nan
        alive = self.ledger.alive_count
        if alive == 1:
            return 1.0
        if alive != 2:
            return math.nan
        a, b = self.index.members
        return abs(self.index.cluster_size(a) - self.index.cluster_size(b)) / self.n

    def snapshot(self, t: float | None = None) -> dict:
        return series_snapshot(self, self.time if t is None else t)

    def check(self, config: Configuration) -> None:
        """Assert every definitional invariant against a configuration."""
        members: dict[int, set[int]] = {}
        for agent, vocab in enumerate(config.vocab):
            assert list(vocab) == sorted(set(vocab)), "vocabulary not strictly sorted"
            assert self.index.vocab_size[agent] == len(vocab)
            for w in vocab:
                members.setdefault(w, set()).add(agent)
        assert members == self.index.members
        assert self.ledger.deleted <= self.ledger.created
        assert set(members) == self.ledger.created - self.ledger.deleted
        sizes = Counter(len(c) for c in members.values())
        assert sizes == self.index.size_multiset()
        assert self.index.max_size == max(sizes, default=0)
        assert self.counter.mute == sum(1 for v in config.vocab if not v)
        assert len(self.ledger.deleted) <= 2 * self.counter.agreements
        assert len(self.counter.involved) <= 2 * self.counter.agreements


def word_rate(index: ClusterIndex, word: int) -> float:
    """Rate at which ``word`` is spoken: 1(N(word)=0) + sum over knowers of 1/N(v)."""
    rate = 1.0 if index.vocab_size[word] == 0 else 0.0
    for v in index.members.get(word, ()):
        rate += 1.0 / index.vocab_size[v]
    return rate


def agreement_rate_bound(index: ClusterIndex) -> tuple[float, float]:
    """Total agreement rate and its upper bound S_t.

    The agreement rate on word w is R_t(w) * (S_t(w) - 1)/(n - 1); words with
    an empty cluster contribute nothing.
    """
    n = index.n
    rate = 0.0
    for w, club in index.members.items():
        s = len(club)
        if s > 1:
            rate += word_rate(index, w) * (s - 1) / (n - 1)
    return rate, float(index.max_size)


def series_snapshot(tracker: Tracker, t: float) -> dict:
    led = tracker.ledger
    row = {
        "t": t,
        "V": led.alive_count,
        "Vo": len(led.created),
        "Vx": len(led.deleted),
        "S": tracker.index.max_size,
        "A": tracker.counter.agreements,
        "Z": tracker.counter.mute,
    }
    u = tracker.two_word_u()
    if not math.isnan(u):
        row["u"] = u
    return row


def time_grid(horizon: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError("snapshot spacing must be positive")
    k = int(math.floor(horizon / dt + 1e-9))
    return np.arange(k + 1) * dt


def log_grid(t_min: float, horizon: float, num: int) -> np.ndarray:
    return np.concatenate(([0.0], np.geomspace(t_min, horizon, num)))


class SeriesRecorder:
    """Observer that records snapshots on a time grid or after every event.

    With a grid, the snapshot at grid time g is the state just before the
    first event later than g.  Call :meth:`finish` with the final time to
    flush the remaining grid points.
    """

    def __init__(self, tracker: Tracker, grid: Sequence[float] | None = None):
        self.tracker = tracker
        self.grid = None if grid is None else np.asarray(grid, dtype=float)
        self._next = 0
        self.rows: list[dict] = []
        if self.grid is None:
            self.rows.append(tracker.snapshot())

    def __call__(self, step: Step) -> None:
        if self.grid is not None:
            self._flush(step.event.time, inclusive=False)
        self.tracker.on_event(step)
        if self.grid is None:
            self.rows.append(self.tracker.snapshot())

    def _flush(self, t: float, inclusive: bool) -> None:
        grid = self.grid
        while self._next < len(grid) and (grid[self._next] < t or (inclusive and grid[self._next] <= t)):
            self.rows.append(self.tracker.snapshot(float(grid[self._next])))
            self._next += 1

    def finish(self, t: float) -> list[dict]:
        if self.grid is not None:
            self._flush(t, inclusive=True)
        return self.rows


def write_series(rows: Iterable[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for row in rows:
            writer.writerow([f"{row['t']:.12g}"] + [int(row[c]) for c in SERIES_COLUMNS[1:]])
