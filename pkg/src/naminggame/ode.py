"""Mean-field limit of the two-word chain.

Fractions (x, y) of type-A and type-B agents, z = 1 - x - y, follow

    x' = xz + z^2 - xy,    y' = yz + z^2 - xy,

on the simplex {x, y >= 0, x + y <= 1}.  In the coordinates u = |x - y|
and z this becomes u' = uz, z' = (1 - u^2 - 4z - z^2)/2.  On the diagonal
x = y the mixed fraction relaxes to z* = sqrt(5) - 2, and the consensus time
of the stochastic chain grows like gamma * log n with
gamma = 1 + 1/(2 z*).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

INVARIANT_TOL = 1e-9
SQRT5 = math.sqrt(5.0)


class DomainError(ValueError):
    """State outside the invariant set of the system."""


class IntegrationError(RuntimeError):
    """The integrator left the invariant set by more than the tolerance."""


def constants() -> dict[str, float]:
    z_star = SQRT5 - 2.0
    gamma = 1.0 + 1.0 / (-4.0 + 2.0 * SQRT5)
    assert abs(gamma - (1.0 + 1.0 / (2.0 * z_star))) < 1e-14
    return {
        "z_star": z_star,
        "equilibrium": (3.0 - SQRT5) / 2.0,
        "gamma": gamma,
    }


def _check_xy(x: float, y: float, tol: float = INVARIANT_TOL) -> None:
    if x < -tol or y < -tol or x + y > 1.0 + tol:
        raise DomainError(f"(x, y) = ({x}, {y}) is outside the simplex")


def _check_uz(u: float, z: float, tol: float = INVARIANT_TOL) -> None:
    if u < -tol or z < -tol or u + z > 1.0 + tol:
        raise DomainError(f"(u, z) = ({u}, {z}) is outside the invariant set")


def rhs_xy(x: float, y: float) -> tuple[float, float]:
    _check_xy(x, y)
    z = 1.0 - x - y
    return x * z + z * z - x * y, y * z + z * z - x * y


def rhs_uz(u: float, z: float) -> tuple[float, float]:
    _check_uz(u, z)
    return u * z, 0.5 * (1.0 - u * u - 4.0 * z - z * z)


def diagonal_rhs(z: float) -> float:
    return 0.5 * (1.0 - 4.0 * z - z * z)


@dataclass
class Trajectory:
    t: np.ndarray
    state: np.ndarray  # (len, dim)
    names: tuple[str, ...]

    def column(self, name: str) -> np.ndarray:
        return self.state[:, self.names.index(name)]


SYSTEMS: dict[str, tuple[Callable, Callable, tuple[str, ...]]] = {
    "xy": (rhs_xy, _check_xy, ("x", "y")),
    "uz": (rhs_uz, _check_uz, ("u", "z")),
}


def integrate(system: str, initial, h: float = 1e-3, horizon: float = 10.0, sample_every: int = 1) -> Trajectory:
    """Fixed-step RK4.

    Every accepted step is checked against the invariant set; leaving it by
    more than 1e-9 raises :class:`IntegrationError` instead of clamping.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    if system == "diagonal":
        rhs = lambda z: (diagonal_rhs(z[0]),)  # noqa: E731
        check = lambda z: None  # noqa: E731
        names = ("z",)
    else:
        rhs2, check2, names = SYSTEMS[system]
        rhs = lambda s: rhs2(s[0], s[1])  # noqa: E731
        check = lambda s: check2(s[0], s[1])  # noqa: E731
    s = np.array(initial, dtype=float)
    check(s)
    steps = int(round(horizon / h))
    ts = [0.0]
    out = [s.copy()]
    for k in range(1, steps + 1):
        try:
            k1 = np.array(rhs(s))
            k2 = np.array(rhs(s + 0.5 * h * k1))
            k3 = np.array(rhs(s + 0.5 * h * k2))
            k4 = np.array(rhs(s + h * k3))
            s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            check(s)
        except DomainError as exc:
            raise IntegrationError(f"left the invariant set at t={k * h:g}: {exc}") from None
        if k % sample_every == 0 or k == steps:
            ts.append(k * h)
            out.append(s.copy())
    if system == "xy":
        state = np.column_stack([np.array(out), 1.0 - np.array(out).sum(axis=1)])
        names = ("x", "y", "z")
    else:
        state = np.array(out)
    return Trajectory(np.array(ts), state, names)


def write_trajectory(traj: Trajectory, path) -> None:
    header = ",".join(("t",) + traj.names)
    data = np.column_stack([traj.t, traj.state])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.12g")
