"""The standard set of falsification checks, as run by ``naming-game verify``."""

from __future__ import annotations

from ..reduced import ReducedState, simulate
from ..rng import replicate_rng, replicate_seed
from .compensator import compensate_poisson, compensate_reduced
from .tails import TailBoundReport, appendix_inequality_checks, check_azuma, last_passage_check, poisson_tail_check

DEFAULT_CHECKS = ("azuma", "poisson", "last-passage", "appendix")
# variants that test repaired statements; reported but not part of the default set
EXTRA_CHECKS = ("last-passage-proof-curve", "appendix-corrected")


def azuma_suite(seed: int = 0, poisson_paths: int = 10_000, chain_paths: int = 500, n: int = 1000,
                horizon: float = 3.0) -> TailBoundReport:
    report = TailBoundReport("azuma")
    poisson = [compensate_poisson(1.0, 10.0, replicate_rng(seed, k, (8,))[1]) for k in range(poisson_paths)]
    for sign in (1, -1):
        report = report.merge(check_azuma(poisson, 0.4, 5.0, sign, label="poisson"))
    init = ReducedState(int(0.45 * n), int(0.25 * n), n - int(0.45 * n) - int(0.25 * n))
    paths = [simulate(init, replicate_seed(seed, k, (9,)), "normalized", horizon=horizon, record=True).path
             for k in range(chain_paths)]
    for name in ("u", "z"):
        comps = [compensate_reduced(p, name) for p in paths]
        for sign in (1, -1):
            report = report.merge(check_azuma(comps, n / 8, 10.0 / n, sign, label=f"reduced-{name}"))
    return report


def run_suite(seed: int = 0, checks=DEFAULT_CHECKS, scale: float = 1.0) -> list[TailBoundReport]:
    """Run the named checks; ``scale`` multiplies every Monte Carlo sample size."""
    s = max(float(scale), 0.01)
    out = []
    for name in checks:
        if name == "azuma":
            out.append(azuma_suite(seed, poisson_paths=int(10_000 * s), chain_paths=int(500 * s)))
        elif name == "poisson":
            out.append(poisson_tail_check(samples=int(100_000 * s), seed=seed))
        elif name == "last-passage":
            out.append(last_passage_check(paths=int(20_000 * s), seed=seed))
        elif name == "last-passage-proof-curve":
            rep = last_passage_check(paths=int(20_000 * s), seed=seed, curve_scale=1.0)
            rep.name = "last_passage_proof_curve"
            out.append(rep)
        elif name == "appendix":
            out.append(appendix_inequality_checks())
        elif name == "appendix-corrected":
            out.append(appendix_inequality_checks(corrected=True))
        else:
            raise ValueError(f"unknown check {name!r}; known: {DEFAULT_CHECKS + EXTRA_CHECKS}")
    return out
