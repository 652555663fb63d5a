"""Falsification checks for exponential tail bounds.

Every check produces a :class:`TailBoundReport` of cells.  A cell compares an
empirical exceedance frequency (or an exact probability) against a claimed
upper bound; it fails only when the empirical value exceeds the bound by more
than three binomial standard errors evaluated at the bound.  Bounds of at
least one are vacuous and pass automatically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, special, stats

from ..core import ContractError
from ..rng import replicate_rng
from .compensator import CompensatedPath

SLACK_SE = 3.0


@dataclass
class Cell:
    params: dict
    empirical: float
    bound: float
    se: float
    samples: int
    rule: str = "tail"  # "order": a plain comparison, no vacuous-bound rule
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.rule == "order":
            self.passed = bool(self.empirical <= self.bound)
        else:
            self.passed = bool(self.bound >= 1.0 or self.empirical <= self.bound + SLACK_SE * self.se + 1e-12)


def binomial_cell(params: dict, hits: int, samples: int, bound: float) -> Cell:
    """Monte Carlo cell; the standard error is taken at the bound (the null)."""
    b = min(max(bound, 0.0), 1.0)
    se = math.sqrt(b * (1.0 - b) / samples) if samples else math.inf
    return Cell(params, hits / samples, float(bound), se, samples)


def exact_cell(params: dict, value: float, bound: float) -> Cell:
    return Cell(params, float(value), float(bound), 0.0, 0)


def order_cell(params: dict, value: float, bound: float, samples: int = 0) -> Cell:
    return Cell(params, float(value), float(bound), 0.0, samples, rule="order")


@dataclass
class TailBoundReport:
    name: str
    cells: list[Cell] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells)

    @property
    def violations(self) -> list[Cell]:
        return [c for c in self.cells if not c.passed]

    def merge(self, other: "TailBoundReport") -> "TailBoundReport":
        return TailBoundReport(self.name, self.cells + other.cells, self.notes + other.notes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "cells": [
                {"params": c.params, "empirical": c.empirical, "bound": c.bound, "se": c.se,
                 "samples": c.samples, "pass": c.passed}
                for c in self.cells
            ],
            "notes": list(self.notes),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def summary_line(self) -> str:
        bad = len(self.violations)
        return f"{self.name}: {len(self.cells) - bad}/{len(self.cells)} cells pass"


# ---------------------------------------------------------------- martingale


def check_azuma(paths: Sequence[CompensatedPath], lam: float, a: float, sign: int = 1,
                label: str | None = None) -> TailBoundReport:
    """P(sup_t sign*(X_t - X_0 - X^p_t) - lam <X^m>_t >= a) <= exp(-lam a)."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not paths:
        raise ValueError("need at least one path")
    c_delta = max(p.c_delta for p in paths)
    if not lam > 0 or lam * c_delta > 0.5 + 1e-12:
        raise ContractError(f"need 0 < lam * c_delta <= 1/2, got {lam * c_delta:g}")
    hits = sum(p.sup_excess(sign, lam) >= a for p in paths)
    params = {"functional": label or paths[0].name, "lam": lam, "a": a, "sign": sign}
    report = TailBoundReport("azuma")
    report.cells.append(binomial_cell(params, int(hits), len(paths), math.exp(-lam * a)))
    return report


# ---------------------------------------------------------------- Poisson tails


def poisson_x_grid(lam: float, xs: Iterable[float] = (0.5, 1.0, 2.0)) -> list[float]:
    """Admissible deviations 0 < x <= sqrt(lam), always including the boundary."""
    root = math.sqrt(lam)
    return sorted({float(x) for x in xs if 0 < x <= root} | {root})


def poisson_tail_check(lams: Sequence[float] = (1, 10, 100, 1000), xs: Sequence[float] = (0.5, 1.0, 2.0),
                       samples: int = 0, seed: int = 0) -> TailBoundReport:
    """Lower tail P(X < lam - x sqrt(lam)) <= e^{-x^2/2}, upper tail with e^{-x^2/3}.

    Exact probabilities come from the Poisson CDF; with ``samples > 0`` a
    Monte Carlo estimate of each tail is added as a separate cell.
    """
    report = TailBoundReport("poisson_tail")
    for k, lam in enumerate(lams):
        draws = None
        if samples:
            draws = replicate_rng(seed, k, stream=(3,))[1].poisson(lam, size=samples)
        for x in poisson_x_grid(lam, xs):
            lo = lam - x * math.sqrt(lam)
            hi = lam + x * math.sqrt(lam)
            p_lo = stats.poisson.cdf(math.ceil(lo) - 1, lam)  # P(X < lo)
            p_hi = stats.poisson.sf(math.floor(hi), lam)  # P(X > hi)
            for side, p, bound in (("lower", p_lo, math.exp(-x * x / 2)), ("upper", p_hi, math.exp(-x * x / 3))):
                report.cells.append(exact_cell({"lam": lam, "x": x, "side": side, "method": "exact"}, p, bound))
            if draws is not None:
                report.cells.append(binomial_cell({"lam": lam, "x": x, "side": "lower", "method": "mc"},
                                                  int(np.sum(draws < lo)), samples, math.exp(-x * x / 2)))
                report.cells.append(binomial_cell({"lam": lam, "x": x, "side": "upper", "method": "mc"},
                                                  int(np.sum(draws > hi)), samples, math.exp(-x * x / 3)))
    return report


def last_passage_bounds(lam: float, alpha: float, t: float) -> tuple[float, float]:
    """Claimed bounds on P(tau_1 > t) and P(tau_2 > t)."""
    p = 1.0 - 2.0 * alpha
    e = (lam * t) ** (2.0 * alpha)
    return 6.0 * t ** p * math.exp(-e / 3.0), 4.0 * t ** p * math.exp(-e / 2.0)


def _passes_after(jumps: np.ndarray, t: float, horizon: float, lam: float, curve) -> tuple[bool, bool]:
    """Whether N leaves [lam s - g(s), lam s + g(s)] at some s in (t, horizon].

    Between jumps N_s - lam s - g(s) decreases, so the upper excursion is
    checked right after t and at every jump; N_s - lam s + g(s) is concave
    between jumps, so the lower one is checked right after t, at the left
    limit of every jump and at the horizon.
    """
    n_t = int(np.searchsorted(jumps, t, side="right"))
    later = jumps[n_t:]
    later = later[later <= horizon]
    counts = n_t + 1 + np.arange(len(later))
    above = (n_t - lam * t >= curve(t)) or bool(np.any(counts - lam * later >= curve(later)))
    left = counts - 1
    below = (n_t - lam * t <= -curve(t)) or bool(np.any(left - lam * later <= -curve(later)))
    n_h = n_t + len(later)
    below = below or (n_h - lam * horizon <= -curve(horizon))
    return above, below


def last_passage_check(lam: float = 1.0, alpha: float = 0.5, ts: Sequence[float] = (8, 12, 16),
                       paths: int = 20000, seed: int = 0, curve_scale: float = 0.5,
                       horizon_factor: float = 4.0) -> TailBoundReport:
    """Last passage of a rate-``lam`` Poisson process outside lam t +- c (lam t)^(1/2+alpha).

    ``curve_scale`` is c; 1/2 is the curve in the statement being tested.
    Paths are observed on [0, horizon_factor * t]; a passage after that is
    missed, which biases the estimate down by at most the claimed bound at
    the observation horizon (recorded per cell as ``truncation``).
    """
    if lam < 1:
        raise ContractError("need lam >= 1")
    if not 0 < alpha <= 0.5:
        raise ContractError("need alpha in (0, 1/2]")
    for t in ts:
        if t ** (2 * alpha) < 6:
            raise ContractError(f"need t^(2 alpha) >= 6, fails at t={t}")

    def curve(s):
        return curve_scale * (lam * np.asarray(s, dtype=float)) ** (0.5 + alpha)

    t_max = horizon_factor * max(ts)
    _, rng = replicate_rng(seed, 0, stream=(4,))
    hits1 = np.zeros(len(ts), dtype=np.int64)
    hits2 = np.zeros(len(ts), dtype=np.int64)
    for _ in range(paths):
        k = rng.poisson(lam * t_max)
        jumps = np.sort(rng.uniform(0.0, t_max, size=k))
        for j, t in enumerate(ts):
            up, down = _passes_after(jumps, t, horizon_factor * t, lam, curve)
            hits1[j] += up
            hits2[j] += down
    report = TailBoundReport("last_passage")
    report.notes.append(f"observation horizon {horizon_factor:g} t; curve scale {curve_scale:g}")
    for j, t in enumerate(ts):
        b1, b2 = last_passage_bounds(lam, alpha, t)
        tr1, tr2 = last_passage_bounds(lam, alpha, horizon_factor * t)
        base = {"lam": lam, "alpha": alpha, "t": t, "curve_scale": curve_scale}
        report.cells.append(binomial_cell({**base, "tau": 1, "truncation": min(tr1, 1.0)}, int(hits1[j]), paths, b1))
        report.cells.append(binomial_cell({**base, "tau": 2, "truncation": min(tr2, 1.0)}, int(hits2[j]), paths, b2))
    return report


# ---------------------------------------------------------------- appendix


def exp_asym_bound(a: float, beta: float, c: float, x: float, corrected: bool = False) -> float:
    """Closed-form bound on int_x^inf t^a exp(-c t^beta) dt.

    The stated form divides by c - (1+a-beta) x^-beta.  Differentiating
    x^(1+a-beta) exp(-c x^beta) produces c*beta rather than c, so with
    ``corrected=True`` the denominator is c*beta - (1+a-beta) x^-beta.  The
    two agree at beta = 1.
    """
    lead = c * beta if corrected else c
    k = lead - (1.0 + a - beta) * x ** (-beta)
    if k <= 0:
        raise ContractError("bound needs a positive denominator")
    return x ** (1.0 + a - beta) * math.exp(-c * x ** beta) / k


def exp_asym_integral(a: float, beta: float, c: float, x: float) -> tuple[float, float]:
    """Adaptive quadrature of int_x^inf t^a exp(-c t^beta) dt: (value, error estimate).

    Integrated in u = t^beta, where the integrand u^(s-1) e^(-c u) / beta with
    s = (a+1)/beta has a light tail even for small beta.
    """
    s = (a + 1.0) / beta
    val, err = integrate.quad(lambda u: u ** (s - 1.0) * math.exp(-c * u), x ** beta, math.inf,
                              epsabs=0.0, epsrel=1e-11, limit=200)
    return val / beta, err / beta


def exp_asym_closed_form(a: float, beta: float, c: float, x: float) -> float:
    """Same integral through the upper incomplete gamma function."""
    s = (a + 1.0) / beta
    return special.gammaincc(s, c * x ** beta) * special.gamma(s) / (beta * c ** s)


def recip_bound_sides(lam: float, alpha: float) -> tuple[float, float]:
    lhs = 1.0 / (1.0 + lam - lam ** (0.5 + alpha) / 2.0)
    rhs = 1.0 / (1.0 + lam) + (1.0 + lam) ** (-1.5 + alpha)
    return lhs, rhs


def appendix_inequality_checks(a_grid=(0.0, 0.5, 1.0, 2.0), beta_grid=(0.25, 0.5, 1.0, 2.0),
                               c_grid=(1 / 3, 0.5, 1.0, 2.0), x_grid=(1.0, 2.0, 4.0, 8.0, 16.0),
                               lam_grid=None, alpha_grid=None, corrected: bool = False) -> TailBoundReport:
    """Integral tail bound over a parameter grid and the reciprocal bound over (lam, alpha).

    Grid points must satisfy the bound's hypotheses: a positive denominator
    and 1 + a - beta >= 0, which makes c - (1+a-beta) t^-beta increasing.
    """
    report = TailBoundReport("appendix-corrected" if corrected else "appendix")
    for a in a_grid:
        for beta in beta_grid:
            if 1.0 + a - beta < 0:
                continue
            for c in c_grid:
                for x in x_grid:
                    lead = c * beta if corrected else c
                    if lead - (1.0 + a - beta) * x ** (-beta) <= 0:
                        continue
                    bound = exp_asym_bound(a, beta, c, x, corrected)
                    val, err = exp_asym_integral(a, beta, c, x)
                    # quadrature error is charged against the inequality
                    cell = exact_cell({"check": "exp-asym", "a": a, "beta": beta, "c": c, "x": x},
                                      val - err, bound * (1 + 1e-12))
                    report.cells.append(cell)
    lam_grid = np.geomspace(1.0, 1e8, 161) if lam_grid is None else lam_grid
    alpha_grid = np.linspace(0.0, 0.5, 51)[1:] if alpha_grid is None else alpha_grid
    for lam in lam_grid:
        for alpha in alpha_grid:
            lhs, rhs = recip_bound_sides(float(lam), float(alpha))
            report.cells.append(exact_cell({"check": "recip-bound", "lam": float(lam), "alpha": float(alpha)},
                                           lhs, rhs * (1 + 1e-12)))
    return report
