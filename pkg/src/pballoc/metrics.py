"""Derived statistics for reports: change, over/undershoot, reduction
rates and footprint inequality."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_vector
from .exceptions import DegenerateInput, InvalidInput

# Returned by change_pct when the starting value is zero.
NO_BASELINE = None


def change_pct(start_value: float, end_value: float) -> float | None:
    """Percentage change from ``start_value`` to ``end_value``; ``None`` without a baseline."""
    if start_value == 0:
        return NO_BASELINE
    return (end_value - start_value) / start_value * 100.0


def reduction_rate(actual: float, budget: float, base_year: int, target_year: int) -> float:
    """Constant yearly rate (percent) taking ``actual`` to ``budget`` by ``target_year``.

    Negative means a required reduction; a non-negative rate means the
    entity already fits its budget.
    """
    if not actual > 0:
        raise InvalidInput(f"actual must be > 0, got {actual}")
    if not budget > 0:
        raise InvalidInput(f"budget must be > 0, got {budget}")
    if target_year <= base_year:
        raise InvalidInput(f"target year {target_year} is not after base year {base_year}")
    years = target_year - base_year
    # expm1/log keeps small rates accurate over long horizons
    return math.expm1(math.log(budget / actual) / years) * 100.0


def growth_rate(start_value: float, end_value: float, start_year: int, end_year: int) -> float:
    """Observed yearly growth rate between two years, same convention as ``reduction_rate``."""
    return reduction_rate(start_value, end_value, start_year, end_year)


def is_compliant(rate_pct: float) -> bool:
    return rate_pct >= 0


def over_under(actual: float, budget: float) -> float:
    """``actual / budget``; above 1 is an overshoot."""
    if not budget > 0:
        raise InvalidInput(f"budget must be > 0 for an over/under ratio, got {budget}")
    return actual / budget


@dataclass(frozen=True)
class LorenzResult:
    population_share: np.ndarray
    footprint_share: np.ndarray
    gini: float

    def top_share(self, population_fraction: float) -> float:
        """Share of the total held by the top ``population_fraction`` of units."""
        if not 0 <= population_fraction <= 1:
            raise InvalidInput("population_fraction must be in [0, 1]")
        below = np.interp(1.0 - population_fraction, self.population_share, self.footprint_share)
        return float(1.0 - below)

    def population_holding(self, footprint_fraction: float) -> float:
        """Smallest top fraction of units responsible for ``footprint_fraction`` of the total."""
        if not 0 <= footprint_fraction <= 1:
            raise InvalidInput("footprint_fraction must be in [0, 1]")
        target = 1.0 - footprint_fraction
        pop, cum = self.population_share, self.footprint_share
        # largest bottom fraction whose Lorenz value stays at or below target
        j = int(np.flatnonzero(cum <= target)[-1])
        if j == cum.size - 1:
            return 0.0
        bottom = pop[j] + (target - cum[j]) / (cum[j + 1] - cum[j]) * (pop[j + 1] - pop[j])
        return float(1.0 - bottom)


def lorenz_gini(values, weights=None) -> LorenzResult:
    """Lorenz curve (ascending) and Gini coefficient.

    ``weights`` are optional unit sizes, e.g. persons per household. Gini is
    ``1 - 2 * area under the Lorenz curve`` using the trapezoid rule, which
    for point masses is exact.
    """
    x = check_vector(values, "values")
    if x.size == 0:
        raise InvalidInput("empty input")
    if (x < 0).any():
        raise InvalidInput("footprints must be >= 0")
    w = np.ones_like(x) if weights is None else check_vector(weights, "weights", length=x.size)
    if (w <= 0).any():
        raise InvalidInput("weights must be > 0")
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    mass = x * w
    total = math.fsum(mass)
    if total <= 0:
        raise DegenerateInput("all footprints are zero")
    pop = np.concatenate([[0.0], np.cumsum(w) / math.fsum(w)])
    cum = np.concatenate([[0.0], np.cumsum(mass) / total])
    pop[-1] = cum[-1] = 1.0
    area = math.fsum(np.diff(pop) * (cum[1:] + cum[:-1]) / 2.0)
    return LorenzResult(pop, cum, 1.0 - 2.0 * area)
