"""Drift and diffusivity integrals along pure-jump trajectories.

For a chain with reaction rates q_i and jump vectors J_i, a scalar
functional f has drift mu = sum_i q_i (f(s + J_i) - f(s)) and diffusivity
sigma^2 = sum_i q_i (f(s + J_i) - f(s))^2.  Rates are constant between jumps,
so both path integrals are computed exactly as sums over holding intervals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import ContractError
from ..reduced import JUMPS, ReducedPath, rates_array


@dataclass
class CompensatedPath:
    """A scalar functional along a trajectory with its predictable parts.

    ``values[k]`` holds on [times[k], times[k+1]); ``int_mu[k]`` and
    ``int_sigma2[k]`` are the integrals up to ``times[k]``.  The last entry of
    ``times`` is the end of the observation window, where no jump occurs.
    """

    name: str
    times: np.ndarray
    values: np.ndarray
    int_mu: np.ndarray
    int_sigma2: np.ndarray
    sigma2: np.ndarray
    c_delta: float
    c_q: float

    def sup_excess(self, sign: int, lam: float) -> float:
        """sup_t of sign*(X_t - X_0 - int mu) - lam * int sigma^2 over the whole path.

        Between jumps the expression is linear in t, so the supremum is
        attained at a jump time (before or after the jump) or at an end.
        """
        x0 = self.values[0]
        vals = self.values[:-1]  # values[-1] duplicates the state at the end time
        post = sign * (vals - x0 - self.int_mu[:-1]) - lam * self.int_sigma2[:-1]
        pre = sign * (vals - x0 - self.int_mu[1:]) - lam * self.int_sigma2[1:]
        return float(max(post.max(), pre.max()))

    def martingale_part(self) -> np.ndarray:
        return self.values - self.values[0] - self.int_mu


def track_compensator(times: np.ndarray, states: np.ndarray, end_time: float,
                      rate_fn: Callable[[np.ndarray], np.ndarray], jumps: np.ndarray,
                      functional: Callable[[np.ndarray], np.ndarray], c_delta: float,
                      c_q: float | None = None, name: str = "f") -> CompensatedPath:
    """Integrate drift and diffusivity of ``functional`` along a recorded path.

    ``states`` has one row per holding interval starting at ``times``;
    ``rate_fn`` maps the (K, d) state array to (K, m) rates and ``jumps`` is
    the (m, d) table of jump vectors.  Raises :class:`ContractError` if a jump
    with positive rate moves the functional by more than ``c_delta``.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] != len(times):
        states = states.T
    q = rate_fn(states)
    f0 = functional(states)
    df = np.stack([functional(states + j) - f0 for j in np.asarray(jumps, dtype=float)], axis=1)
    active = q > 0
    worst = np.abs(df[active]).max(initial=0.0)
    if worst > c_delta * (1 + 1e-9):
        raise ContractError(f"functional {name!r} jumps by {worst:g} > declared bound {c_delta:g}")
    mu = np.sum(q * np.where(active, df, 0.0), axis=1)
    sigma2 = np.sum(q * np.where(active, df * df, 0.0), axis=1)
    edges = np.append(times, end_time)
    dt = np.diff(edges)
    int_mu = np.concatenate(([0.0], np.cumsum(mu * dt)))
    int_sigma2 = np.concatenate(([0.0], np.cumsum(sigma2 * dt)))
    values = np.append(f0, f0[-1])
    total = q.sum(axis=1)
    return CompensatedPath(name, edges, values, int_mu, int_sigma2, sigma2, float(c_delta),
                           float(total.max() if c_q is None else c_q))


def poisson_path(rate: float, horizon: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Jump times (with 0 prepended) and counts of a Poisson process on [0, horizon]."""
    count = rng.poisson(rate * horizon)
    jumps = np.sort(rng.uniform(0.0, horizon, size=count))
    return np.concatenate(([0.0], jumps)), np.arange(count + 1)


def compensate_poisson(rate: float, horizon: float, rng: np.random.Generator) -> CompensatedPath:
    times, counts = poisson_path(rate, horizon, rng)
    return track_compensator(
        times, counts[:, None], horizon,
        rate_fn=lambda s: np.full((len(s), 1), rate),
        jumps=np.array([[1.0]]),
        functional=lambda s: s[:, 0],
        c_delta=1.0, c_q=rate, name="N")


REDUCED_FUNCTIONALS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    # name: (functional of (X, Y, Z) rows, jump bound in units of 1/n)
    "u": (lambda s: np.abs(s[:, 0] - s[:, 1]) / s.sum(axis=1), 2.0),
    "z": (lambda s: s[:, 2] / s.sum(axis=1), 2.0),
    "x": (lambda s: s[:, 0] / s.sum(axis=1), 2.0),
    "total": (lambda s: s.sum(axis=1), 0.0),
}


def compensate_reduced(path: ReducedPath, functional: str = "u") -> CompensatedPath:
    """Compensator of u, z, x or the conserved total along a reduced-chain path."""
    f, jump_units = REDUCED_FUNCTIONALS[functional]
    n = path.n
    c_delta = jump_units / n if jump_units else 0.0
    return track_compensator(
        path.times, path.states, path.end_time,
        rate_fn=lambda s: rates_array(s[:, 0], s[:, 1], s[:, 2], path.mode),
        jumps=JUMPS, functional=f, c_delta=c_delta, c_q=float(n), name=functional)
