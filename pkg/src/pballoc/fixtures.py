"""Seeded synthetic MRIO datasets at desk scale."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio
from .allocation import EntityStats
from .exceptions import ConfigurationError
from .local import EcoregionRecord, WatershedRecord, classify_ecoregion
from .mrio import ExtensionAccount, FootprintModel, MrioTable

MAX_COLUMN_SUM = 0.7
# world-like totals so per-capita results land in familiar ranges
WORLD_FINAL_DEMAND_MEUR = 7.0e7
WORLD_POPULATION = 7.5e9

DEFAULT_PROFILES = {
    "co2": {"unit": "kt CO2", "intensity": 0.3, "household_share": 0.15},
    "ghg": {"unit": "kt CO2eq", "intensity": 0.4, "household_share": 0.12},
    "water": {"unit": "Mm3", "intensity": 0.02, "household_share": 0.05},
    "biodiversity": {"unit": "pico PDF*yr", "intensity": 50.0, "household_share": 0.0},
}


@dataclass(frozen=True)
class FixtureSpec:
    n_regions: int = 3
    n_sectors: int = 2
    trade_intensity: float = 0.2
    seed: int = 0
    pressure_profiles: dict = field(default_factory=lambda: dict(DEFAULT_PROFILES))
    n_watersheds: int = 0
    n_ecoregions: int = 0

    def __post_init__(self):
        if self.n_regions < 1 or self.n_sectors < 1:
            raise ConfigurationError("fixture needs at least one region and one sector")
        if not 0.0 <= self.trade_intensity <= 1.0:
            raise ConfigurationError(f"trade_intensity must be in [0, 1], got {self.trade_intensity}")
        for name, prof in self.pressure_profiles.items():
            if "unit" not in prof:
                raise ConfigurationError(f"pressure profile {name!r} has no unit")

    @classmethod
    def from_dict(cls, raw):
        known = {k: raw[k] for k in cls.__dataclass_fields__ if k in raw}
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigurationError(f"unknown fixture keys {sorted(unknown)}")
        return cls(**known)


@dataclass
class Fixture:
    table: MrioTable
    extensions: list
    stats: list
    sector_stats: list = field(default_factory=list)
    watersheds: list = field(default_factory=list)
    ecoregions: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.table, self.extensions, self.stats))


def _block_mask(n, m):
    region = np.repeat(np.arange(n), m)
    return region[:, None] == region[None, :]


def generate_fixture(spec: FixtureSpec) -> Fixture:
    """Balanced, productive table with pressures and entity statistics.

    A is drawn with every column sum in [0.1, 0.7]; a share
    ``trade_intensity`` of each column (and of final demand) comes from
    other regions, so 0 yields a block-diagonal, autarkic table. Gross
    output is solved from final demand, which makes rows balance exactly.
    """
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n_regions, spec.n_sectors
    N = n * m
    t = spec.trade_intensity if n > 1 else 0.0
    regions = tuple(f"R{i + 1}" for i in range(n))
    sectors = tuple(f"S{j + 1}" for j in range(m))
    domestic = _block_mask(n, m)

    raw = rng.uniform(0.05, 1.0, size=(N, N))
    col_total = rng.uniform(0.1, MAX_COLUMN_SUM, size=N)
    dom = np.where(domestic, raw, 0.0)
    frn = np.where(domestic, 0.0, raw)
    A = dom / dom.sum(axis=0) * (1 - t) * col_total
    if t > 0:
        A = A + frn / frn.sum(axis=0) * t * col_total

    region_of = np.repeat(np.arange(n), m)
    y_raw = rng.uniform(50.0, 150.0, size=(N, n))
    home = region_of[:, None] == np.arange(n)[None, :]
    Y = np.where(home, y_raw * (1 - t), y_raw * t / max(n - 1, 1))
    Y *= WORLD_FINAL_DEMAND_MEUR / Y.sum()
    x = np.linalg.solve(np.eye(N) - A, Y.sum(axis=1))
    Z = A * x[None, :]
    # recompute x from the flows so rows balance to rounding
    x = Z.sum(axis=1) + Y.sum(axis=1)
    table = MrioTable(regions, sectors, Z, Y, x)

    extensions = []
    for name in sorted(spec.pressure_profiles):
        prof = spec.pressure_profiles[name]
        q = rng.uniform(0.2, 1.0, size=N) * float(prof.get("intensity", 1.0))
        f = q * x
        f_hh = rng.uniform(0.5, 1.5, size=n) * float(prof.get("household_share", 0.0)) * f.reshape(n, m).sum(axis=1)
        extensions.append(ExtensionAccount(name, prof["unit"], f, f_hh))

    model = FootprintModel().fit(table)
    accounts = model.transform(extensions)

    population = np.round(rng.dirichlet(np.full(n, 2.0)) * WORLD_POPULATION) + 1.0
    value_added = x - Z.sum(axis=0)
    # MEUR of value added per worker
    productivity = rng.uniform(0.005, 0.1, size=N)
    sector_employment = np.round(value_added / productivity) + 1.0

    stats = []
    for i, r in enumerate(regions):
        sl = slice(i * m, (i + 1) * m)
        pressure = {}
        for acc in accounts:
            pressure[f"{acc.name}_pba"] = float(acc.pba[i])
            pressure[f"{acc.name}_cba"] = float(acc.cba[i])
        stats.append(
            EntityStats(r, float(population[i]), pressure, float(value_added[sl].sum()), float(sector_employment[sl].sum()))
        )

    sector_stats = []
    for k, (r, s) in enumerate(table.labels):
        pressure = {}
        for acc in accounts:
            pressure[f"{acc.name}_pba"] = float(acc.sectoral_pba[k])
            pressure[f"{acc.name}_cba"] = float(acc.sectoral_cba[k])
        sector_stats.append(
            EntityStats(f"{r}:{s}", 0.0, pressure, float(value_added[k]), float(sector_employment[k]), parent=r)
        )

    watersheds = []
    for w in range(spec.n_watersheds):
        maf = float(rng.uniform(100.0, 10000.0))
        ewr = float(rng.uniform(0.1, 0.6) * maf)
        hwc = float(rng.uniform(0.0, 0.5) * maf)
        share = rng.dirichlet(np.ones(n))
        consumption = {r: float(hwc * share[i]) for i, r in enumerate(regions)}
        watersheds.append(WatershedRecord(f"W{w + 1}", maf, hwc, ewr, consumption))

    ecoregions = []
    for e in range(spec.n_ecoregions):
        protected = float(rng.uniform(0.0, 0.7))
        habitat = float(rng.uniform(0.0, 1.0 - protected))
        loss = {r: float(v) for r, v in zip(regions, rng.uniform(0.0, 10.0, size=n))}
        ecoregions.append(EcoregionRecord(f"E{e + 1}", protected, habitat, loss, classify_ecoregion(protected, habitat)))

    return Fixture(table, extensions, stats, sector_stats, watersheds, ecoregions)


def write_fixture(fixture: Fixture, directory, base_year: int = 2016) -> Path:
    """Serialize a fixture and its manifest; returns the manifest path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    mrio = dataio.write_mrio(fixture.table, d)
    extensions = {}
    for ext in fixture.extensions:
        rel = f"ext_{ext.name}.csv"
        dataio.write_extension(ext, fixture.table, d / rel)
        extensions[ext.name] = (rel, ext.unit)
    dataio.write_stats(fixture.stats, d / "stats.csv")
    files = {"stats": "stats.csv"}
    if fixture.sector_stats:
        dataio.write_stats(fixture.sector_stats, d / "sector_stats.csv")
        files["sub_stats"] = "sector_stats.csv"
    if fixture.watersheds:
        dataio.write_local_units(fixture.watersheds, d / "watersheds.csv")
        files["watersheds"] = "watersheds.csv"
    if fixture.ecoregions:
        dataio.write_local_units(fixture.ecoregions, d / "ecoregions.csv")
        files["ecoregions"] = "ecoregions.csv"
    return dataio.write_manifest(d, base_year, mrio, extensions, **files)


def load_fixture_spec(path) -> FixtureSpec:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"fixture spec not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise dataio.ParseError(exc.msg, path, exc.lineno, exc.colno) from None
    return FixtureSpec.from_dict(raw)
