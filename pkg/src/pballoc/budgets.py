"""Global boundary budgets for the analysis year."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from . import units
from .exceptions import ConfigurationError, InvalidInput

BOUNDARIES = ("climate_CO2", "climate_GHG", "freshwater", "biodiversity")

# Remaining CO2 budgets from the start of 2020 (Gt CO2), by (target, probability).
REMAINING_CO2_FROM_2020 = {
    ("1.5C", 66): 235.0,
    ("1.5C", 50): 395.0,
    ("2.0C", 66): 985.0,
    ("2.0C", 50): 1315.0,
}
# Approximate global CO2 emitted 2016-2019, added back when analysing 2016.
BACKCAST_2016_GT = 168.0
GHG_FACTOR = 1.25
FRESHWATER_KM3 = 4000.0
BIODIVERSITY_EPC_PICO = 2.0

BASE_UNITS = {
    "climate_CO2": "Gt CO2",
    "climate_GHG": "Gt CO2eq",
    "freshwater": "km3",
    "biodiversity": "PDF*yr",
}


@dataclass(frozen=True)
class BudgetSpec:
    """A global boundary resolved to one number.

    ``basis`` is ``yearly_flow`` for annual budgets and ``cumulative_stock``
    for a budget over the whole horizon.
    """

    boundary: str
    global_annual: float
    unit: str
    basis: Literal["yearly_flow", "cumulative_stock"] = "yearly_flow"

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"unknown boundary {self.boundary!r}; expected one of {BOUNDARIES}")
        if self.unit is None:
            raise ConfigurationError(f"{self.boundary}: budget has no unit")
        object.__setattr__(self, "unit", units.canonical(self.unit))
        if self.basis not in ("yearly_flow", "cumulative_stock"):
            raise ConfigurationError(f"unknown basis {self.basis!r}")
        value = float(self.global_annual)
        if not math.isfinite(value) or value < 0:
            raise InvalidInput(f"{self.boundary}: global budget must be finite and >= 0, got {value!r}")
        object.__setattr__(self, "global_annual", value)

    def in_unit(self, unit):
        return units.convert(self.global_annual, self.unit, unit)


def _normalize_target(target):
    t = str(target).replace("°", "").replace(" ", "").upper().rstrip("C")
    try:
        return f"{float(t):.1f}C"
    except ValueError:
        if t.lower() == "custom":
            return "custom"
        raise ConfigurationError(f"unrecognised climate target {target!r}") from None


def _normalize_probability(p):
    if isinstance(p, str):
        p = p.strip().rstrip("%")
    p = float(p)
    if p < 1:
        p *= 100
    return int(round(p))


@dataclass(frozen=True)
class ClimateBudgetSpec:
    target: str = "1.5C"
    probability: int = 50
    analysis_year: int = 2016
    horizon_end: int = 2100
    backcast_emissions: float | None = None
    budget_from_2020: float | None = None

    def __post_init__(self):
        target = _normalize_target(self.target)
        prob = _normalize_probability(self.probability)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "probability", prob)
        named = REMAINING_CO2_FROM_2020.get((target, prob))
        if target != "custom" and named is None:
            raise ConfigurationError(f"no named budget for {target} at {prob}%")
        if self.budget_from_2020 is None:
            if named is None:
                raise ConfigurationError("custom climate target needs budget_from_2020")
            object.__setattr__(self, "budget_from_2020", named)
        elif named is not None and float(self.budget_from_2020) != named:
            raise ConfigurationError(
                f"{target} {prob}% budget is {named} Gt CO2, got {self.budget_from_2020}"
            )
        if self.analysis_year > 2020:
            raise ConfigurationError(f"analysis year {self.analysis_year} is after the 2020 budget start")
        if self.horizon_end <= self.analysis_year:
            raise ConfigurationError("horizon_end must be after analysis_year")
        if self.backcast_emissions is None:
            if self.analysis_year == 2016:
                object.__setattr__(self, "backcast_emissions", BACKCAST_2016_GT)
            elif self.analysis_year == 2020:
                object.__setattr__(self, "backcast_emissions", 0.0)
            else:
                raise ConfigurationError(
                    f"analysis year {self.analysis_year} needs an explicit backcast_emissions"
                )

    @property
    def adjusted_budget(self):
        return float(self.budget_from_2020) + float(self.backcast_emissions)

    @property
    def years(self):
        return self.horizon_end - self.analysis_year


def climate_yearly_budget(spec: ClimateBudgetSpec) -> BudgetSpec:
    """Remaining CO2 budget shifted to the analysis year, spread evenly to the horizon."""
    return BudgetSpec("climate_CO2", spec.adjusted_budget / spec.years, "Gt CO2", "yearly_flow")


def climate_cumulative_budget(spec: ClimateBudgetSpec) -> BudgetSpec:
    return BudgetSpec("climate_CO2", spec.adjusted_budget, "Gt CO2", "cumulative_stock")


def ghg_from_co2(co2_budget: BudgetSpec, factor: float = GHG_FACTOR) -> BudgetSpec:
    if co2_budget.boundary != "climate_CO2":
        raise InvalidInput(f"expected a climate_CO2 budget, got {co2_budget.boundary}")
    value = units.convert(co2_budget.global_annual, co2_budget.unit, "Gt CO2")
    return BudgetSpec("climate_GHG", value * factor, "Gt CO2eq", co2_budget.basis)


def freshwater_budget(global_km3: float = FRESHWATER_KM3) -> BudgetSpec:
    """Consumptive blue-water use limit in km3/yr."""
    return BudgetSpec("freshwater", global_km3, "km3", "yearly_flow")


def biodiversity_budget(global_population: float, per_capita_epc: float = BIODIVERSITY_EPC_PICO) -> BudgetSpec:
    """Global land-use biodiversity budget anchored to a per-capita value.

    There is no agreed global PDF limit, so the budget is the per-capita
    anchor (pico PDF*yr) times world population, which makes an equal
    per-capita allocation return the anchor for every entity.
    """
    if not per_capita_epc > 0:
        raise InvalidInput(f"per-capita biodiversity anchor must be > 0, got {per_capita_epc}")
    if not global_population > 0:
        raise InvalidInput(f"global population must be > 0, got {global_population}")
    value = units.convert(per_capita_epc, "pico PDF*yr", "PDF*yr") * global_population
    return BudgetSpec("biodiversity", value, "PDF*yr", "yearly_flow")


def budgets_from_config(cfg: dict, global_population: float | None, analysis_year: int = 2016) -> dict:
    """Resolve every boundary from scenario keys (``climate.*``, ``freshwater.*``, ``biodiversity.*``)."""
    known = {
        "climate": {"target", "probability", "analysis_year", "horizon_end", "backcast_gt", "budget_from_2020_gt", "ghg_factor"},
        "freshwater": {"global_km3"},
        "biodiversity": {"epc_pico_pdf_yr"},
    }
    for section, keys in known.items():
        extra = set(cfg.get(section) or {}) - keys
        if extra:
            raise ConfigurationError(f"unknown {section} keys {sorted(extra)}")
    climate = cfg.get("climate", {}) or {}
    spec = ClimateBudgetSpec(
        target=climate.get("target", "1.5C"),
        probability=climate.get("probability", 50),
        analysis_year=int(climate.get("analysis_year", analysis_year)),
        horizon_end=int(climate.get("horizon_end", 2100)),
        backcast_emissions=climate.get("backcast_gt"),
        budget_from_2020=climate.get("budget_from_2020_gt"),
    )
    co2 = climate_yearly_budget(spec)
    out = {
        "climate_CO2": co2,
        "climate_GHG": ghg_from_co2(co2, float(climate.get("ghg_factor", GHG_FACTOR))),
        "freshwater": freshwater_budget(float((cfg.get("freshwater") or {}).get("global_km3", FRESHWATER_KM3))),
    }
    if global_population is not None:
        out["biodiversity"] = biodiversity_budget(
            global_population,
            float((cfg.get("biodiversity") or {}).get("epc_pico_pdf_yr", BIODIVERSITY_EPC_PICO)),
        )
    return out
