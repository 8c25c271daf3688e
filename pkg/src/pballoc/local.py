"""Local safe operating spaces for watersheds and ecoregions.

Watershed space::

    LB = MAF - (HWC + EWR + 0.15 * MAF)

is negative in water-scarce basins; the negative space (the exceedance) is
allocated with the same shares, so rules that normally grant more space now
carry more of the deficit.

Ecoregion space is a percentage cut of today's total land-use biodiversity
loss, with the cut set by the protection status of the ecoregion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .allocation import AllocationShares, Approach, blended_shares
from .exceptions import IncompleteUnit, InvalidInput, StructuralError

PRECAUTION = 0.15
# sums within this distance of a threshold count as equal to it
THRESHOLD_EPS = 1e-12
NO_FOOTPRINT = "no footprint"


class EcoregionStatus(str, Enum):
    HALF_PROTECTED = "HalfProtected"
    COULD_REACH_HALF = "CouldReachHalf"
    COULD_RECOVER = "CouldRecover"
    IMPERILLED = "Imperilled"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace(" ", "").replace("_", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise InvalidInput(f"unknown ecoregion status {value!r}")


REDUCTION_TARGETS = {
    EcoregionStatus.HALF_PROTECTED: 0.0,
    EcoregionStatus.COULD_REACH_HALF: 0.10,
    EcoregionStatus.COULD_RECOVER: 0.30,
    EcoregionStatus.IMPERILLED: 0.50,
}


class StatusMismatchWarning(UserWarning):
    pass


class Band(str, Enum):
    WITHIN = "within"
    OVER_WITHIN_UNIT = "over_within_unit"
    OVER_UNIT_EXCEEDED = "over_unit_exceeded"


@dataclass(frozen=True)
class WatershedRecord:
    """Flows in Mm3/yr. ``country_consumption`` is each country's water
    footprint sourced from this watershed."""

    watershed_id: str
    MAF: float
    HWC: float
    EWR: float
    country_consumption: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("MAF", "HWC", "EWR"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidInput(f"watershed {self.watershed_id}: {name} must be finite and >= 0, got {v}")
        if self.EWR > self.MAF:
            raise InvalidInput(f"watershed {self.watershed_id}: EWR {self.EWR} exceeds MAF {self.MAF}")
        for c, v in self.country_consumption.items():
            if not math.isfinite(v) or v < 0:
                raise InvalidInput(f"watershed {self.watershed_id}: consumption of {c} must be >= 0")

    @property
    def total_consumption(self):
        return math.fsum(self.country_consumption.values())


@dataclass(frozen=True)
class EcoregionRecord:
    """``country_loss`` in pico PDF*yr of land-use biodiversity loss."""

    ecoregion_id: str
    protected_frac: float
    habitat_frac: float
    country_loss: Mapping[str, float] = field(default_factory=dict)
    status: EcoregionStatus | None = None

    def __post_init__(self):
        computed = classify_ecoregion(self.protected_frac, self.habitat_frac)
        if self.status is None:
            object.__setattr__(self, "status", computed)
        else:
            declared = EcoregionStatus.parse(self.status)
            if declared is not computed:
                warnings.warn(
                    f"ecoregion {self.ecoregion_id}: declared status {declared.value} but "
                    f"protected={self.protected_frac}, habitat={self.habitat_frac} gives {computed.value}",
                    StatusMismatchWarning,
                    stacklevel=3,
                )
            object.__setattr__(self, "status", computed)

    @property
    def total_loss(self):
        return math.fsum(self.country_loss.values())


@dataclass(frozen=True)
class LocalSosResult:
    unit_id: str
    country: str
    approach: str
    A_SOS: float
    ACTUAL: float
    abs_transgression: float
    rel_transgression: float
    band: Band

    @property
    def no_footprint(self):
        return self.ACTUAL == 0


def watershed_lb(rec: WatershedRecord) -> float:
    return rec.MAF - (rec.HWC + rec.EWR + PRECAUTION * rec.MAF)


def allocate_local_sos(lb: float, shares: AllocationShares, country: str) -> float:
    """Country slice of a unit's space. Negative space scales the same way."""
    return shares.share_of(country) * lb


def transgression_abs(actual: float, a_sos: float) -> float:
    return actual - a_sos


def transgression_rel(actual: float, a_sos: float, unit_total: float, unit_lb: float) -> tuple[float, Band]:
    """Relative transgression ``(ACTUAL - A_SOS) / ACTUAL`` and its band.

    ``unit_total`` is the unit's total pressure and ``unit_lb`` the total
    the unit can carry. A unit with ``unit_lb < 0`` is already beyond its
    space, so it never falls in the ``over_within_unit`` band. Zero actual
    impact gives ``-inf`` and band ``within``.
    """
    if actual == 0:
        return -math.inf, Band.WITHIN
    if actual < 0:
        raise InvalidInput(f"actual impact must be >= 0, got {actual}")
    ratio = (actual - a_sos) / actual
    if ratio < 0:
        return ratio, Band.WITHIN
    if ratio <= 1 and unit_lb >= 0 and unit_total <= unit_lb:
        return ratio, Band.OVER_WITHIN_UNIT
    return ratio, Band.OVER_UNIT_EXCEEDED


def classify_ecoregion(protected_frac: float, habitat_frac: float) -> EcoregionStatus:
    for name, v in (("protected_frac", protected_frac), ("habitat_frac", habitat_frac)):
        if not (0.0 <= v <= 1.0):
            raise InvalidInput(f"{name} must be in [0, 1], got {v}")
    if protected_frac > 0.5 + THRESHOLD_EPS:
        return EcoregionStatus.HALF_PROTECTED
    total = protected_frac + habitat_frac
    if total > 0.5 + THRESHOLD_EPS:
        return EcoregionStatus.COULD_REACH_HALF
    if total > 0.2 + THRESHOLD_EPS:
        return EcoregionStatus.COULD_RECOVER
    return EcoregionStatus.IMPERILLED


def ecoregion_reduction_target(status) -> float:
    return REDUCTION_TARGETS[EcoregionStatus.parse(status) if not isinstance(status, EcoregionStatus) else status]


def ecoregion_unit_sos(rec: EcoregionRecord) -> float:
    if not rec.country_loss:
        raise IncompleteUnit(f"ecoregion {rec.ecoregion_id}: no country loss data")
    total = rec.total_loss
    if not math.isfinite(total):
        raise IncompleteUnit(f"ecoregion {rec.ecoregion_id}: total loss is not finite")
    return (1.0 - ecoregion_reduction_target(rec.status)) * total


def ecoregion_sos(rec: EcoregionRecord, shares: AllocationShares) -> dict[str, float]:
    """Allocated space per country: share times the reduced total loss."""
    unit_sos = ecoregion_unit_sos(rec)
    return {c: s * unit_sos for c, s in shares.as_dict().items()}


def unit_gf_shares(consumption: Mapping[str, float], unit_id: str) -> AllocationShares:
    """Grandfathering inside one unit, from each country's use of that unit."""
    ids = sorted(consumption)
    values = [float(consumption[c]) for c in ids]
    total = math.fsum(values)
    if not ids or total <= 0:
        raise IncompleteUnit(f"unit {unit_id}: no consumption to grandfather from")
    return AllocationShares(Approach.GF, ids, [v / total for v in values], pressure_field=f"{unit_id}:local")


def _evaluate(unit_id, country, approach, a_sos, actual, unit_total, unit_lb):
    ratio, band = transgression_rel(actual, a_sos, unit_total, unit_lb)
    return LocalSosResult(unit_id, country, approach, a_sos, actual, transgression_abs(actual, a_sos), ratio, band)


def evaluate_watershed(
    rec: WatershedRecord,
    country: str,
    shares: Mapping[str, AllocationShares],
    approaches=None,
    local_gf: bool = True,
    ba_weights=None,
) -> list[LocalSosResult]:
    """Transgression of ``country`` in one watershed under each approach.

    ``shares`` maps approach name to global shares; see ``local_shares``.
    """
    lb = watershed_lb(rec)
    actual = float(rec.country_consumption.get(country, 0.0))
    # human use fits the basin when HWC <= MAF - EWR - 0.15 MAF, i.e. LB >= 0
    capacity = (1.0 - PRECAUTION) * rec.MAF - rec.EWR
    resolved = local_shares(shares, rec.country_consumption, rec.watershed_id, approaches, local_gf, ba_weights)
    return [
        _evaluate(rec.watershed_id, country, name, allocate_local_sos(lb, s, country), actual, rec.HWC, capacity)
        for name, s in resolved
    ]


def evaluate_ecoregion(
    rec: EcoregionRecord,
    country: str,
    shares: Mapping[str, AllocationShares],
    approaches=None,
    local_gf: bool = True,
    ba_weights=None,
) -> list[LocalSosResult]:
    unit_sos = ecoregion_unit_sos(rec)
    actual = float(rec.country_loss.get(country, 0.0))
    resolved = local_shares(shares, rec.country_loss, rec.ecoregion_id, approaches, local_gf, ba_weights)
    return [
        _evaluate(rec.ecoregion_id, country, name, s.share_of(country) * unit_sos, actual, rec.total_loss, unit_sos)
        for name, s in resolved
    ]


def local_shares(
    global_shares: Mapping[str, AllocationShares],
    local_use: Mapping[str, float],
    unit_id: str,
    approaches=None,
    local_gf: bool = True,
    ba_weights: Mapping[str, float] | None = None,
) -> list[tuple[str, AllocationShares]]:
    """Share vectors used inside one unit, all over the same entity set.

    GF is replaced by the unit's own use pattern when ``local_gf`` is set.
    BA blends the (possibly local) EPC/GF/AP vectors.
    """
    by_name = {Approach.parse(k): v for k, v in global_shares.items()}
    if approaches is None:
        approaches = list(by_name)
    approaches = [Approach.parse(a) for a in approaches]
    if local_gf and (Approach.GF in approaches or Approach.BA in approaches):
        by_name[Approach.GF] = unit_gf_shares(local_use, unit_id)
    by_name = dict(_widen(list(by_name.items())))
    if Approach.BA in approaches:
        weights = {Approach.parse(k): v for k, v in (ba_weights or {}).items()} or {
            Approach.EPC: 1 / 3, Approach.GF: 1 / 3, Approach.AP: 1 / 3
        }
        missing = [a.value for a in weights if a not in by_name]
        if missing:
            raise StructuralError(f"unit {unit_id}: BA needs shares for {missing}")
        by_name[Approach.BA] = blended_shares([(by_name[a], w) for a, w in weights.items()])
    out = []
    for a in approaches:
        if a not in by_name:
            raise StructuralError(f"unit {unit_id}: no shares for {a.value}")
        out.append((a.value, by_name[a]))
    return out


def _widen(pairs):
    """Give every share vector the union entity set (absent entities get 0)."""
    ids = sorted(set().union(*(s.entity_ids for _, s in pairs))) if pairs else []
    widened = []
    for name, s in pairs:
        lookup = s.as_dict()
        widened.append(
            (name, AllocationShares(s.approach, ids, [lookup.get(e, 0.0) for e in ids], s.weights, s.alpha, s.pressure_field))
        )
    return widened
