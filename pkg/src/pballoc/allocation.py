"""Effort-sharing rules and budget allocation.

Five rules turn entity statistics into shares of a global budget:

* EPC  equal per capita            s_i = pop_i / sum(pop)
* GF   grandfathering              s_i = ep_i / sum(ep)
* AP   ability to pay              s_i ~ emp_i * (va_i / emp_i) ** -alpha
* VA   value added                 s_i = va_i / sum(va)
* BA   blended                     s_i = sum_k w_k s_i^k

A budget is then ``share * global boundary``. Sector and city budgets use a
two-stage split (country share, then within-country share) which keeps
every country's sub-budgets summing to the country budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import normalize
from .budgets import BudgetSpec
from .exceptions import (
    ComputeError,
    ConfigurationError,
    DegenerateEntity,
    DegenerateInput,
    InvalidInput,
    InvalidPressure,
    StructuralError,
)

SHARE_SUM_TOL = 1e-12
BUDGET_SUM_TOL = 1e-9
DEFAULT_ALPHA = 0.5


class Approach(str, Enum):
    EPC = "EPC"
    GF = "GF"
    AP = "AP"
    VA = "VA"
    BA = "BA"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ConfigurationError(f"unknown allocation approach {value!r}") from None


DEFAULT_BA_WEIGHTS = ((Approach.EPC, 1 / 3), (Approach.GF, 1 / 3), (Approach.AP, 1 / 3))


@dataclass(frozen=True)
class EntityStats:
    """Per-entity inputs. ``pressure`` maps a field name such as
    ``"ghg_cba"`` to the entity's current pressure. Missing value-added or
    employment is NaN. ``parent`` links a sector or city to its country."""

    entity_id: str
    population: float = 0.0
    pressure: Mapping[str, float] = field(default_factory=dict)
    value_added: float = math.nan
    employment: float = math.nan
    parent: str | None = None

    def __post_init__(self):
        if self.population < 0 or not math.isfinite(self.population):
            raise InvalidInput(f"{self.entity_id}: population must be finite and >= 0")
        if self.employment < 0:
            raise InvalidInput(f"{self.entity_id}: employment must be >= 0")


@dataclass(frozen=True, eq=False)
class AllocationShares:
    approach: Approach
    entity_ids: tuple
    shares: np.ndarray
    weights: tuple | None = None
    alpha: float | None = None
    pressure_field: str | None = None

    def __post_init__(self):
        ids = tuple(str(e) for e in self.entity_ids)
        shares = np.asarray(self.shares, dtype=float).copy()
        if shares.shape != (len(ids),):
            raise StructuralError(f"{len(ids)} entities but shares of shape {shares.shape}")
        if len(set(ids)) != len(ids):
            raise StructuralError("duplicate entity ids in shares")
        if not np.all(np.isfinite(shares)) or (shares < 0).any():
            raise InvalidInput(f"{self.approach}: shares must be finite and >= 0")
        total = math.fsum(shares)
        if abs(total - 1.0) > SHARE_SUM_TOL:
            raise InvalidInput(f"{self.approach}: shares sum to {total!r}, not 1")
        shares.setflags(write=False)
        object.__setattr__(self, "entity_ids", ids)
        object.__setattr__(self, "shares", shares)
        object.__setattr__(self, "approach", Approach.parse(self.approach))

    def as_dict(self):
        return dict(zip(self.entity_ids, self.shares.tolist()))

    def share_of(self, entity_id):
        try:
            return float(self.shares[self.entity_ids.index(entity_id)])
        except ValueError:
            raise StructuralError(f"entity {entity_id!r} has no {self.approach.value} share") from None

    def aligned(self, entity_ids: Sequence[str]) -> np.ndarray:
        if set(entity_ids) != set(self.entity_ids) or len(entity_ids) != len(self.entity_ids):
            raise StructuralError(f"{self.approach.value} shares cover a different entity set")
        lookup = self.as_dict()
        return np.array([lookup[e] for e in entity_ids])


@dataclass(frozen=True)
class AllocatedBudget:
    entity_id: str
    budget: float
    approach: Approach
    boundary_name: str
    unit: str
    budget_per_capita: float | None = None
    parent: str | None = None


def _ids(stats):
    return tuple(s.entity_id for s in stats)


def _require(stats):
    stats = list(stats)
    if not stats:
        raise StructuralError("no entities given")
    return stats


def epc_shares(stats: Iterable[EntityStats]) -> AllocationShares:
    stats = _require(stats)
    pop = np.array([s.population for s in stats], dtype=float)
    if math.fsum(pop) <= 0:
        raise DegenerateInput("total population is zero")
    shares, _ = normalize(pop)
    return AllocationShares(Approach.EPC, _ids(stats), shares)


def _pressures(stats, pressure_field):
    out = []
    for s in stats:
        if pressure_field not in s.pressure:
            raise StructuralError(f"{s.entity_id}: no pressure field {pressure_field!r}")
        out.append(float(s.pressure[pressure_field]))
    return np.array(out)


def gf_shares(stats: Iterable[EntityStats], pressure_field: str) -> AllocationShares:
    stats = _require(stats)
    ep = _pressures(stats, pressure_field)
    if not np.all(np.isfinite(ep)):
        raise InvalidPressure(f"non-finite {pressure_field} pressure")
    if (ep < 0).any():
        bad = [stats[i].entity_id for i in np.flatnonzero(ep < 0)]
        raise InvalidPressure(f"negative {pressure_field} pressure for {bad}")
    if math.fsum(ep) <= 0:
        raise DegenerateInput(f"total {pressure_field} pressure is zero")
    shares, _ = normalize(ep)
    return AllocationShares(Approach.GF, _ids(stats), shares, pressure_field=pressure_field)


def ap_shares(
    stats: Iterable[EntityStats],
    alpha: float = DEFAULT_ALPHA,
    redistribute_missing: bool = False,
) -> AllocationShares:
    """Shares inversely related to value added per employee.

    Entities with missing or non-positive employment/value added are an
    error unless ``redistribute_missing`` is set, in which case they get a
    zero share and the rest is renormalised over the remaining entities.
    """
    stats = _require(stats)
    emp = np.array([s.employment for s in stats], dtype=float)
    va = np.array([s.value_added for s in stats], dtype=float)
    if (va < 0).any():
        bad = [stats[i].entity_id for i in np.flatnonzero(va < 0)]
        raise InvalidInput(f"negative value added for {bad}")
    usable = np.isfinite(emp) & np.isfinite(va) & (emp > 0) & (va > 0)
    if not usable.all() and not redistribute_missing:
        bad = [stats[i].entity_id for i in np.flatnonzero(~usable)]
        raise DegenerateEntity(
            f"ability-to-pay needs employment > 0 and value added > 0; missing for {bad}"
        )
    weights = np.zeros(len(stats))
    weights[usable] = emp[usable] * (va[usable] / emp[usable]) ** (-alpha)
    if math.fsum(weights) <= 0:
        raise DegenerateInput("no entity has usable employment and value-added data")
    shares, _ = normalize(weights)
    return AllocationShares(Approach.AP, _ids(stats), shares, alpha=alpha)


def va_shares(stats: Iterable[EntityStats]) -> AllocationShares:
    stats = _require(stats)
    va = np.array([s.value_added for s in stats], dtype=float)
    if not np.all(np.isfinite(va)):
        bad = [stats[i].entity_id for i in np.flatnonzero(~np.isfinite(va))]
        raise InvalidInput(f"missing value added for {bad}")
    if (va < 0).any():
        bad = [stats[i].entity_id for i in np.flatnonzero(va < 0)]
        raise InvalidInput(f"negative value added for {bad}")
    if math.fsum(va) <= 0:
        raise DegenerateInput("total value added is zero")
    shares, _ = normalize(va)
    return AllocationShares(Approach.VA, _ids(stats), shares)


def blended_shares(components: Sequence[tuple[AllocationShares, float]]) -> AllocationShares:
    """Convex combination of share vectors.

    Components may list entities in different orders; they are aligned to
    the first component. Equal weights reduce to the plain arithmetic mean.
    """
    if not components:
        raise ConfigurationError("blended allocation needs at least one component")
    weights = np.array([float(w) for _, w in components])
    if (weights < 0).any() or not np.all(np.isfinite(weights)):
        raise ConfigurationError(f"blend weights must be finite and >= 0, got {weights.tolist()}")
    if abs(math.fsum(weights) - 1.0) > SHARE_SUM_TOL:
        raise ConfigurationError(f"blend weights sum to {math.fsum(weights)!r}, not 1")
    ids = components[0][0].entity_ids
    stacked = np.vstack([c.aligned(ids) for c, _ in components])
    if np.all(weights == weights[0]):
        mixed = stacked.mean(axis=0)
    else:
        mixed = weights @ stacked
    alpha = next((c.alpha for c, _ in components if c.alpha is not None), None)
    pressure_field = next((c.pressure_field for c, _ in components if c.pressure_field), None)
    return AllocationShares(
        Approach.BA,
        ids,
        mixed,
        weights=tuple((c.approach.value, float(w)) for c, w in components),
        alpha=alpha,
        pressure_field=pressure_field,
    )


def ba_shares(
    stats: Iterable[EntityStats],
    pressure_field: str,
    weights: Mapping | Sequence | None = None,
    alpha: float = DEFAULT_ALPHA,
    redistribute_missing: bool = False,
) -> AllocationShares:
    """Blend of EPC, GF and AP; equal weights unless ``weights`` is given."""
    stats = _require(stats)
    w = dict(DEFAULT_BA_WEIGHTS) if weights is None else _parse_weights(weights)
    parts = {
        Approach.EPC: lambda: epc_shares(stats),
        Approach.GF: lambda: gf_shares(stats, pressure_field),
        Approach.AP: lambda: ap_shares(stats, alpha, redistribute_missing),
        Approach.VA: lambda: va_shares(stats),
    }
    components = []
    for approach, weight in w.items():
        if approach not in parts:
            raise ConfigurationError(f"{approach.value} cannot be a blend component")
        components.append((parts[approach](), weight))
    return blended_shares(components)


def _parse_weights(weights):
    if isinstance(weights, Mapping):
        items = weights.items()
    elif len(weights) == 3 and all(isinstance(w, (int, float)) for w in weights):
        items = zip((Approach.EPC, Approach.GF, Approach.AP), weights)
    else:
        items = weights
    return {Approach.parse(k): float(v) for k, v in items}


def compute_shares(
    stats: Iterable[EntityStats],
    approach,
    pressure_field: str | None = None,
    alpha: float = DEFAULT_ALPHA,
    weights=None,
    redistribute_missing: bool = False,
) -> AllocationShares:
    approach = Approach.parse(approach)
    if approach in (Approach.GF, Approach.BA) and pressure_field is None:
        raise ConfigurationError(f"{approach.value} needs a pressure field")
    if approach is Approach.EPC:
        return epc_shares(stats)
    if approach is Approach.GF:
        return gf_shares(stats, pressure_field)
    if approach is Approach.AP:
        return ap_shares(stats, alpha, redistribute_missing)
    if approach is Approach.VA:
        return va_shares(stats)
    return ba_shares(stats, pressure_field, weights, alpha, redistribute_missing)


def allocate_budget(
    shares: AllocationShares,
    boundary: BudgetSpec,
    population: Mapping[str, float] | None = None,
) -> list[AllocatedBudget]:
    """Entity budgets ``share * PB``; per-capita values when ``population`` is given."""
    if not isinstance(boundary, BudgetSpec):
        raise ConfigurationError(f"boundary must be a resolved BudgetSpec, got {type(boundary).__name__}")
    pb = boundary.global_annual
    budgets = shares.shares * pb
    if abs(math.fsum(budgets) - pb) > BUDGET_SUM_TOL * max(abs(pb), 1e-300):
        raise ComputeError("allocated budgets do not sum to the boundary")
    out = []
    for eid, b in zip(shares.entity_ids, budgets.tolist()):
        pc = None
        if population is not None and population.get(eid, 0) > 0:
            pc = b / population[eid]
        out.append(AllocatedBudget(eid, b, shares.approach, boundary.boundary, boundary.unit, pc))
    return out


def shares_by_parent(
    sub_stats: Iterable[EntityStats],
    approach,
    **kwargs,
) -> dict[str, AllocationShares]:
    """Within-country shares: apply one rule separately to each parent's children."""
    groups: dict[str, list[EntityStats]] = {}
    for s in sub_stats:
        if s.parent is None:
            raise StructuralError(f"sub-entity {s.entity_id!r} has no parent")
        groups.setdefault(s.parent, []).append(s)
    return {parent: compute_shares(children, approach, **kwargs) for parent, children in groups.items()}


def two_stage_allocate(
    country_shares: AllocationShares,
    within_country_shares: Mapping[str, AllocationShares],
    boundary: BudgetSpec,
) -> list[AllocatedBudget]:
    """Allocate to countries, then split each country's budget among its parts.

    Countries without an entry in ``within_country_shares`` are skipped.
    """
    country_budget = {
        b.entity_id: b.budget for b in allocate_budget(country_shares, boundary)
    }
    seen = set()
    out = []
    for country, within in within_country_shares.items():
        if country not in country_budget:
            raise StructuralError(f"{country!r} has sub-entity shares but no country share")
        overlap = seen.intersection(within.entity_ids)
        if overlap:
            raise StructuralError(f"sub-entities {sorted(overlap)} appear under more than one country")
        seen.update(within.entity_ids)
        cb = country_budget[country]
        for eid, s in zip(within.entity_ids, within.shares.tolist()):
            out.append(
                AllocatedBudget(eid, cb * s, country_shares.approach, boundary.boundary, boundary.unit, parent=country)
            )
    return out


class _Allocator(BaseEstimator):
    """``fit`` learns shares from entity statistics, ``predict`` turns a
    budget into per-entity amounts aligned with ``entity_ids_``."""

    def _shares(self, stats):
        raise NotImplementedError

    def fit(self, X: Sequence[EntityStats], y=None):
        self.shares_ = self._shares(list(X))
        self.entity_ids_ = self.shares_.entity_ids
        return self

    def predict(self, X: BudgetSpec) -> np.ndarray:
        check_is_fitted(self, "shares_")
        return np.array([b.budget for b in allocate_budget(self.shares_, X)])

    def allocate(self, boundary: BudgetSpec, population=None) -> list[AllocatedBudget]:
        check_is_fitted(self, "shares_")
        return allocate_budget(self.shares_, boundary, population)


class EqualPerCapita(_Allocator):
    def _shares(self, stats):
        return epc_shares(stats)


class Grandfathering(_Allocator):
    def __init__(self, pressure_field="pressure"):
        self.pressure_field = pressure_field

    def _shares(self, stats):
        return gf_shares(stats, self.pressure_field)


class AbilityToPay(_Allocator):
    def __init__(self, alpha=DEFAULT_ALPHA, redistribute_missing=False):
        self.alpha = alpha
        self.redistribute_missing = redistribute_missing

    def _shares(self, stats):
        return ap_shares(stats, self.alpha, self.redistribute_missing)


class ValueAdded(_Allocator):
    def _shares(self, stats):
        return va_shares(stats)


class Blended(_Allocator):
    """Blend of EPC/GF/AP. ``weights`` is a mapping approach -> weight or
    an (epc, gf, ap) triple; None means equal thirds."""

    def __init__(self, pressure_field="pressure", weights=None, alpha=DEFAULT_ALPHA, redistribute_missing=False):
        self.pressure_field = pressure_field
        self.weights = weights
        self.alpha = alpha
        self.redistribute_missing = redistribute_missing

    def _shares(self, stats):
        return ba_shares(stats, self.pressure_field, self.weights, self.alpha, self.redistribute_missing)
