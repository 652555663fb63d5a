"""Exact simulation of the naming game on the complete graph K_n.

Words are identified with the agent that invented them, so a word id is an
agent index.  Vocabularies are kept as sorted tuples of word ids; sorting
makes the uniform word choice a deterministic function of the uniform mark
attached to each interaction.

Two schedulers produce the same process law:

* :func:`agent_clock_steps` -- one aggregate Exponential(n) clock, uniform
  speaker, uniform listener among the other n-1 agents.  O(1) scheduling
  per event.
* :func:`graphical_steps` -- the literal construction with an independent
  marked Poisson process of intensity 1/(n-1) on every directed edge.  Uses
  O(n^2) memory and is only meant as an oracle for small n.

Both yield :class:`Step` records and mutate the :class:`Configuration`
they are handed.  The compiled ensemble engine in :mod:`naminggame.fast`
consumes random numbers in exactly the same order as
:func:`agent_clock_steps`, so the two agree path by path for a given seed.
"""

from __future__ import annotations

import csv
import enum
import heapq
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .rng import make_rng

Vocabulary = tuple[int, ...]


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class ResourceLimitError(RuntimeError):
    """Raised when an oracle construction would exceed its memory cap."""


class Outcome(enum.IntEnum):
    INVENTION = 0
    ADOPTION = 1
    AGREEMENT = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class InteractionEvent:
    time: float
    speaker: int
    listener: int
    word: int
    outcome: Outcome


@dataclass(frozen=True)
class Step:
    """One interaction together with the two vocabularies it touched."""

    event: InteractionEvent
    pre_speaker: Vocabulary
    pre_listener: Vocabulary
    post_speaker: Vocabulary
    post_listener: Vocabulary


def _check_n(n) -> int:
    if isinstance(n, float) and not math.isfinite(n):
        raise ContractError("infinite graphs are not supported")
    if int(n) != n or n < 2:
        raise ContractError(f"need an integer number of agents n >= 2, got {n!r}")
    return int(n)


@dataclass
class Configuration:
    """Vocabularies of all agents at a given time."""

    n: int
    vocab: list[Vocabulary]
    time: float = 0.0

    def __post_init__(self):
        self.n = _check_n(self.n)
        if len(self.vocab) != self.n:
            raise ContractError("need one vocabulary per agent")

    @classmethod
    def mute(cls, n: int) -> "Configuration":
        n = _check_n(n)
        return cls(n, [()] * n)

    @classmethod
    def from_vocabularies(cls, vocabs: Sequence[Iterable[int]], time: float = 0.0) -> "Configuration":
        n = len(vocabs)
        out = []
        for v in vocabs:
            words = tuple(sorted(set(int(w) for w in v)))
            if words and (words[0] < 0 or words[-1] >= n):
                raise ContractError(f"word ids must lie in [0, {n})")
            out.append(words)
        return cls(n, out, float(time))

    def copy(self) -> "Configuration":
        return Configuration(self.n, list(self.vocab), self.time)

    def sizes(self) -> list[int]:
        return [len(v) for v in self.vocab]

    def words(self) -> set[int]:
        alive: set[int] = set()
        for v in self.vocab:
            alive.update(v)
        return alive

    def consensus_word(self) -> int | None:
        first = self.vocab[0]
        if len(first) != 1:
            return None
        return first[0] if all(v == first for v in self.vocab) else None


def choose_word(vocab: Sequence[int], u: float) -> int:
    """Return the i-th smallest word, where (i-1)/k <= u < i/k."""
    k = len(vocab)
    if k == 0:
        raise ContractError("cannot choose from an empty vocabulary; a mute speaker invents")
    if not 0.0 <= u < 1.0:
        raise ContractError(f"u must lie in [0, 1), got {u}")
    # u*k can round up to k when u is within one ulp of 1
    return vocab[min(int(u * k), k - 1)]


def _insert(vocab: Vocabulary, word: int) -> Vocabulary:
    i = bisect_left(vocab, word)
    return vocab[:i] + (word,) + vocab[i:]


def _contains(vocab: Vocabulary, word: int) -> bool:
    i = bisect_left(vocab, word)
    return i < len(vocab) and vocab[i] == word


def _interact(vocab: list[Vocabulary], speaker: int, listener: int, u: float, time: float) -> Step:
    pre_s = vocab[speaker]
    pre_l = vocab[listener]
    if not pre_s:
        word = speaker
        outcome = Outcome.INVENTION
        post_s = (speaker,)
        post_l = _insert(pre_l, word)
    else:
        word = choose_word(pre_s, u)
        if _contains(pre_l, word):
            outcome = Outcome.AGREEMENT
            post_s = post_l = (word,)
        else:
            outcome = Outcome.ADOPTION
            post_s = pre_s
            post_l = _insert(pre_l, word)
    vocab[speaker] = post_s
    vocab[listener] = post_l
    event = InteractionEvent(time, speaker, listener, word, outcome)
    return Step(event, pre_s, pre_l, post_s, post_l)


def apply_interaction(config: Configuration, speaker: int, listener: int, u: float) -> tuple[Configuration, InteractionEvent]:
    """Pure transition: the state after ``speaker`` talks to ``listener``.

    The event is stamped with ``config.time``; the input is not modified.
    """
    if speaker == listener:
        raise ContractError("speaker and listener must differ")
    if not (0 <= speaker < config.n and 0 <= listener < config.n):
        raise ContractError("agent index out of range")
    new = config.copy()
    step = _interact(new.vocab, speaker, listener, u, config.time)
    return new, step.event


def _draw_dt(rng: np.random.Generator, t: float, total_rate: float) -> float:
    # zero gaps (or gaps lost to rounding) have probability zero; redraw them
    while True:
        dt = rng.standard_exponential() / total_rate
        if t + dt > t:
            return dt


def agent_clock_steps(config: Configuration, rng: np.random.Generator, horizon: float = math.inf) -> Iterator[Step]:
    """Run the aggregate-clock scheduler, mutating ``config`` as events occur.

    Random numbers are consumed per event in the order: exponential gap,
    speaker, listener offset, uniform mark.  When the next event would fall
    after ``horizon`` the generator stops and ``config.time`` is set to the
    horizon.
    """
    n = config.n
    vocab = config.vocab
    t = config.time
    while True:
        t_next = t + _draw_dt(rng, t, n)
        if t_next > horizon:
            config.time = horizon
            return
        speaker = int(rng.integers(0, n))
        listener = int(rng.integers(0, n - 1))
        if listener >= speaker:
            listener += 1
        u = rng.random()
        t = t_next
        config.time = t
        yield _interact(vocab, speaker, listener, u, t)


DEFAULT_GRAPHICAL_MAX_N = 64


def graphical_steps(config: Configuration, rng: np.random.Generator, horizon: float = math.inf,
                    max_n: int = DEFAULT_GRAPHICAL_MAX_N) -> Iterator[Step]:
    """Literal per-directed-edge construction.

    Every ordered pair (v, w) carries its own stream of points (t_i, u_i)
    with Exponential gaps of mean n-1; at a point of stream (v, w) agent v
    speaks to w using the mark u_i.  The streams are merged with a heap.
    """
    n = config.n
    if n > max_n:
        raise ResourceLimitError(f"graphical oracle limited to n <= {max_n} (got {n}); it keeps n(n-1) streams")
    mean_gap = float(n - 1)
    t0 = config.time
    heap = []
    for v in range(n):
        for w in range(n):
            if v != w:
                heap.append((t0 + mean_gap * rng.standard_exponential(), v, w, rng.random()))
    heapq.heapify(heap)
    vocab = config.vocab
    t_last = t0
    while True:
        t, v, w, u = heap[0]
        if t > horizon:
            config.time = horizon
            return
        heapq.heapreplace(heap, (t + mean_gap * rng.standard_exponential(), v, w, rng.random()))
        if t <= t_last:
            # tie with a previous point: measure zero, drop it
            continue
        t_last = t
        config.time = t
        yield _interact(vocab, v, w, u, t)


Observer = Callable[[Step], None]


def simulate_agent_clock(n: int, horizon: float, seed: int, observers: Sequence[Observer] = (),
                         config: Configuration | None = None) -> Configuration:
    """Simulate up to ``horizon`` and return the final configuration."""
    if horizon < 0:
        raise ContractError("horizon must be non-negative")
    config = Configuration.mute(n) if config is None else config
    for step in agent_clock_steps(config, make_rng(seed), horizon):
        for obs in observers:
            obs(step)
    return config


def simulate_graphical(n: int, horizon: float, seed: int, max_n: int = DEFAULT_GRAPHICAL_MAX_N) -> list[InteractionEvent]:
    config = Configuration.mute(n)
    return [s.event for s in graphical_steps(config, make_rng(seed), horizon, max_n)]


@dataclass
class ConsensusResult:
    time: float
    word: int
    events: int
    config: Configuration = field(repr=False)


class ConsensusTimeout(RuntimeError):
    """The time cap was reached before consensus; carries the partial state."""

    def __init__(self, config: Configuration, events: int):
        super().__init__(f"no consensus by t={config.time:g} after {events} events")
        self.config = config
        self.events = events


def run_until_consensus(n: int, seed: int, cap: float = math.inf, config: Configuration | None = None,
                        scheduler: str = "agent-clock") -> ConsensusResult:
    """Run until every vocabulary is the same singleton.

    Raises :class:`ConsensusTimeout` if ``cap`` is reached first.
    """
    from .observables import Tracker

    config = Configuration.mute(n) if config is None else config
    tracker = Tracker.from_configuration(config)
    word = tracker.consensus_word()
    if word is not None:
        return ConsensusResult(config.time, word, 0, config)
    rng = make_rng(seed)
    if scheduler == "agent-clock":
        steps = agent_clock_steps(config, rng, cap)
    elif scheduler == "graphical":
        steps = graphical_steps(config, rng, cap)
    else:
        raise ContractError(f"unknown scheduler {scheduler!r}")
    events = 0
    for step in steps:
        events += 1
        tracker.on_event(step)
        word = tracker.consensus_word()
        if word is not None:
            return ConsensusResult(step.event.time, word, events, config)
    raise ConsensusTimeout(config, events)


TRACE_COLUMNS = ("t", "speaker", "listener", "word", "outcome")


def write_event_trace(events: Iterable[InteractionEvent], path) -> int:
    """Write events as CSV; ``t`` keeps 12 significant digits."""
    count = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for ev in events:
            writer.writerow([f"{ev.time:.12g}", ev.speaker, ev.listener, ev.word, ev.outcome.label])
            count += 1
    return count


def read_event_trace(path) -> list[InteractionEvent]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(InteractionEvent(float(row["t"]), int(row["speaker"]), int(row["listener"]),
                                        int(row["word"]), Outcome[row["outcome"].upper()]))
    return out
