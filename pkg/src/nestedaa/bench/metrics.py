"""Solution-quality metrics relative to the exact optimum."""

from __future__ import annotations

from typing import NamedTuple


class MetricError(ValueError):
    pass


class Gap(NamedTuple):
    value: float
    defined: bool  # False when the greedy solution is already optimal


def approximation_ratio(y: int, y_star: int) -> float:
    if y_star <= 0:
        raise MetricError("optimum must be positive")
    if y < 0:
        raise MetricError("incumbent value must be non-negative")
    if y > y_star:
        raise MetricError(f"incumbent {y} exceeds optimum {y_star}: solver inconsistency")
    return y / y_star


def optimality_gap(alpha: float, alpha_greedy: float) -> Gap:
    """Progress from the greedy ratio (0) to optimality (1).

    Greedy-optimal instances have no gap to close; they report 1 with
    ``defined=False`` so callers can filter them.
    """
    if alpha_greedy >= 1.0:
        return Gap(1.0, False)
    return Gap((alpha - alpha_greedy) / (1.0 - alpha_greedy), True)


def gap_from_values(y: int, y_greedy: int, y_star: int) -> Gap:
    approximation_ratio(y, y_star)
    approximation_ratio(y_greedy, y_star)
    if y_greedy == y_star:
        return Gap(1.0, False)
    # integer form of the same ratio, free of rounding in the alphas
    return Gap((y - y_greedy) / (y_star - y_greedy), True)
