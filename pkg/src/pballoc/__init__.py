"""Downscaling planetary boundaries to countries, sectors and local units,
with MRIO footprints for comparing actual pressures against the budgets."""

from .allocation import (
    AbilityToPay,
    AllocatedBudget,
    AllocationShares,
    Approach,
    Blended,
    EntityStats,
    EqualPerCapita,
    Grandfathering,
    ValueAdded,
    allocate_budget,
    blended_shares,
    compute_shares,
    two_stage_allocate,
)
from .budgets import (
    BudgetSpec,
    ClimateBudgetSpec,
    biodiversity_budget,
    climate_yearly_budget,
    freshwater_budget,
    ghg_from_co2,
)
from .exceptions import ComputeError, InputError, PBAllocError
from .fixtures import FixtureSpec, generate_fixture
from .local import (
    EcoregionRecord,
    WatershedRecord,
    classify_ecoregion,
    ecoregion_reduction_target,
    transgression_abs,
    transgression_rel,
    watershed_lb,
)
from .metrics import change_pct, lorenz_gini, over_under, reduction_rate
from .mrio import (
    ExtensionAccount,
    FootprintAccounts,
    FootprintModel,
    LeontiefSolver,
    MrioTable,
    footprint_accounts,
    leontief_inverse,
    technical_coefficients,
)
from .report import ScenarioConfig, run_scenario

__version__ = "0.1.0"

__all__ = [
    "AbilityToPay",
    "AllocatedBudget",
    "AllocationShares",
    "Approach",
    "Blended",
    "BudgetSpec",
    "ClimateBudgetSpec",
    "ComputeError",
    "EcoregionRecord",
    "EntityStats",
    "EqualPerCapita",
    "ExtensionAccount",
    "FixtureSpec",
    "FootprintAccounts",
    "FootprintModel",
    "Grandfathering",
    "InputError",
    "LeontiefSolver",
    "MrioTable",
    "PBAllocError",
    "ScenarioConfig",
    "ValueAdded",
    "WatershedRecord",
    "allocate_budget",
    "biodiversity_budget",
    "blended_shares",
    "change_pct",
    "classify_ecoregion",
    "climate_yearly_budget",
    "compute_shares",
    "ecoregion_reduction_target",
    "footprint_accounts",
    "freshwater_budget",
    "generate_fixture",
    "ghg_from_co2",
    "leontief_inverse",
    "lorenz_gini",
    "over_under",
    "reduction_rate",
    "run_scenario",
    "technical_coefficients",
    "transgression_abs",
    "transgression_rel",
    "two_stage_allocate",
    "watershed_lb",
]
