"""Empirical checks of martingale and Poisson tail bounds, and the branching dominator."""

from .compensator import CompensatedPath, compensate_poisson, compensate_reduced, track_compensator
from .tails import (
    Cell,
    TailBoundReport,
    appendix_inequality_checks,
    check_azuma,
    last_passage_check,
    poisson_tail_check,
)

__all__ = [
    "Cell",
    "CompensatedPath",
    "TailBoundReport",
    "appendix_inequality_checks",
    "check_azuma",
    "compensate_poisson",
    "compensate_reduced",
    "last_passage_check",
    "poisson_tail_check",
    "track_compensator",
]
