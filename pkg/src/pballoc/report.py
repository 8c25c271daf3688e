"""Scenario runs: footprints -> budgets -> allocation -> evaluation -> files.

A run writes into a staging directory and only moves the files into the
output directory once every table has been produced, so a failed run leaves
no partial outputs behind.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import shutil
import tempfile
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

from . import dataio, units
from .allocation import (
    Approach,
    EntityStats,
    allocate_budget,
    blended_shares,
    compute_shares,
    two_stage_allocate,
)
from .budgets import BOUNDARIES, budgets_from_config
from .exceptions import ConfigurationError, InputError, ParseError, StructuralError
from .local import evaluate_ecoregion, evaluate_watershed
from .metrics import change_pct, growth_rate, lorenz_gini, over_under, reduction_rate
from .mrio import FootprintModel, normalized_comparison, per_capita

logger = logging.getLogger(__name__)

BOUNDARY_ALIASES = {
    "climate": ("climate_CO2", "climate_GHG"),
    "co2": ("climate_CO2",),
    "ghg": ("climate_GHG",),
    "water": ("freshwater",),
    "freshwater": ("freshwater",),
    "biodiversity": ("biodiversity",),
}
DEFAULT_EXTENSIONS = {
    "climate_CO2": "co2",
    "climate_GHG": "ghg",
    "freshwater": "water",
    "biodiversity": "biodiversity",
}
# per-capita display unit and decimals for report tables
DISPLAY = {
    "climate_CO2": ("t CO2", 1),
    "climate_GHG": ("t CO2eq", 1),
    "freshwater": ("m3", 0),
    "biodiversity": ("pico PDF*yr", 1),
}
# actual/budget ratio decimals per boundary
RATIO_DECIMALS = {"climate_CO2": 1, "climate_GHG": 1, "freshwater": 2, "biodiversity": 2}
PCT_DECIMALS = 1
# axis limits of the over/undershoot panels; carried as metadata only
CLIP_BOUNDS = {"climate_CO2": [0, 17], "climate_GHG": [0, 17], "freshwater": [0, 2]}
SCOPES = ("countries", "sectors", "cities")
SUMMARY_APPROACHES = (Approach.EPC, Approach.GF, Approach.AP)


def _parse_boundaries(values):
    out = []
    for v in values:
        key = str(v).strip()
        names = (key,) if key in BOUNDARIES else BOUNDARY_ALIASES.get(key.lower())
        if names is None:
            raise ConfigurationError(f"unknown boundary {v!r}")
        out.extend(n for n in names if n not in out)
    return tuple(out)


def _parse_perspectives(values):
    out = []
    for v in values:
        v = str(v).lower()
        names = ("pba", "cba") if v == "both" else (v,)
        for n in names:
            if n not in ("pba", "cba"):
                raise ConfigurationError(f"unknown perspective {v!r}")
            if n not in out:
                out.append(n)
    return tuple(out)


@dataclass
class ScenarioConfig:
    dataset: Path
    boundaries: tuple = BOUNDARIES
    approaches: tuple = tuple(Approach)
    ba_weights: dict = field(default_factory=lambda: {a: 1 / 3 for a in SUMMARY_APPROACHES})
    ap_alpha: float = 0.5
    redistribute_missing: bool = False
    perspectives: tuple = ("pba", "cba")
    scope: str = "countries"
    within_approach: str | None = None
    base_year: int = 2016
    start_year: int | None = None
    target_years: tuple = (2050, 2100)
    budgets: dict = field(default_factory=dict)
    extensions: dict = field(default_factory=lambda: dict(DEFAULT_EXTENSIONS))
    focus: tuple | None = None
    withhold_actual: tuple = ()
    normalization_subset: tuple | None = None
    local: dict | None = None
    output_dir: Path = Path("out")

    def __post_init__(self):
        self.boundaries = _parse_boundaries(self.boundaries)
        self.approaches = tuple(Approach.parse(a) for a in self.approaches)
        self.perspectives = _parse_perspectives(self.perspectives)
        self.ba_weights = {Approach.parse(k): float(v) for k, v in self.ba_weights.items()}
        self.target_years = tuple(int(y) for y in self.target_years)
        self.withhold_actual = _parse_boundaries(self.withhold_actual) if self.withhold_actual else ()
        self.validate()

    def validate(self):
        if not self.boundaries:
            raise ConfigurationError("select at least one boundary")
        if not self.approaches:
            raise ConfigurationError("select at least one allocation approach")
        if not self.perspectives:
            raise ConfigurationError("select at least one accounting perspective")
        w = list(self.ba_weights.values())
        if any(x < 0 for x in w) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise ConfigurationError(f"BA weights must be >= 0 and sum to 1, got {self.ba_weights}")
        if self.scope not in SCOPES:
            raise ConfigurationError(f"scope must be one of {SCOPES}, got {self.scope!r}")
        if any(y <= self.base_year for y in self.target_years):
            raise ConfigurationError("target years must be after the base year")
        if self.start_year is not None and self.start_year >= self.base_year:
            raise ConfigurationError("start year must be before the base year")
        missing = [b for b in self.boundaries if b not in self.extensions]
        if missing:
            raise ConfigurationError(f"no extension mapped for boundaries {missing}")
        if self.within_approach is not None:
            Approach.parse(self.within_approach)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None, **overrides):
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}
        if "dataset" not in raw:
            raise ConfigurationError("scenario needs a 'dataset' manifest path")
        years = raw.get("years") or {}
        kwargs = dict(
            dataset=_resolve(base, raw["dataset"], dataset=True),
            budgets={
                **(raw.get("budgets") or {}),
                **{k: raw[k] for k in ("climate", "freshwater", "biodiversity") if k in raw},
            },
            output_dir=_resolve(base, raw.get("output_dir", "out")),
        )
        simple = (
            "boundaries",
            "approaches",
            "ba_weights",
            "ap_alpha",
            "redistribute_missing",
            "perspectives",
            "scope",
            "within_approach",
            "withhold_actual",
            "local",
        )
        kwargs.update({k: raw[k] for k in simple if k in raw})
        if "extensions" in raw:
            kwargs["extensions"] = {**DEFAULT_EXTENSIONS, **raw["extensions"]}
        if "focus" in raw and raw["focus"] is not None:
            kwargs["focus"] = tuple(raw["focus"])
        if raw.get("normalization_subset"):
            kwargs["normalization_subset"] = tuple(raw["normalization_subset"])
        if "base" in years:
            kwargs["base_year"] = int(years["base"])
        if years.get("start") is not None:
            kwargs["start_year"] = int(years["start"])
        if "targets" in years:
            kwargs["target_years"] = tuple(years["targets"])
        unknown = set(raw) - set(simple) - {
            "dataset", "output_dir", "climate", "freshwater", "biodiversity", "budgets", "years",
            "extensions", "focus", "normalization_subset",
        }
        if unknown:
            raise ConfigurationError(f"unknown scenario keys {sorted(unknown)}")
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path, **overrides):
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigurationError(f"scenario not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None
        return cls.from_dict(raw, base_dir=path.resolve().parent, **overrides)

    def to_dict(self):
        return {
            "dataset": str(self.dataset),
            "boundaries": list(self.boundaries),
            "approaches": [a.value for a in self.approaches],
            "ba_weights": {a.value: w for a, w in self.ba_weights.items()},
            "ap_alpha": self.ap_alpha,
            "perspectives": list(self.perspectives),
            "scope": self.scope,
            "within_approach": self.within_approach,
            "years": {"base": self.base_year, "start": self.start_year, "targets": list(self.target_years)},
            "budgets": self.budgets,
            "extensions": dict(sorted(self.extensions.items())),
            "focus": list(self.focus) if self.focus else None,
            "withhold_actual": list(self.withhold_actual),
            "local": self.local,
        }


def _resolve(base, p, dataset=False):
    p = Path(p)
    if p.is_absolute():
        return p
    if dataset and not (base / p).exists():
        return dataio.resolve_manifest_path(p)
    return base / p


@dataclass
class ReportRow:
    entity: str
    boundary: str
    approach: str
    perspective: str
    budget: float
    actual: float | None
    over_under_ratio: float | None
    change_pct: float | None
    reduction_rate: dict
    unit: str
    per_capita: bool
    parent: str | None = None
    historical_rate: float | None = None
    has_baseline: bool = False


@dataclass
class Dataset:
    manifest: dataio.DatasetManifest
    stats: list
    sub_stats: list | None = None
    accounts: dict = field(default_factory=dict)
    watersheds: list | None = None
    ecoregions: list | None = None
    households: dict | None = None
    table: object = None
    extensions: list | None = None


def load_dataset(config: ScenarioConfig) -> Dataset:
    manifest = dataio.load_manifest(config.dataset)
    stats = dataio.load_stats(manifest)
    ds = Dataset(manifest, stats)
    if config.scope != "countries":
        if not manifest.has("sub_stats"):
            raise ConfigurationError(f"scope {config.scope!r} needs a sub_stats file in the manifest")
        ds.sub_stats = dataio.load_stats(manifest, "sub_stats")
    if manifest.has_mrio:
        table = dataio.load_mrio(manifest)
        exts = [dataio.load_extension(manifest, name, table) for name in sorted(manifest.extensions)]
        ds.table, ds.extensions = table, exts
    if config.local:
        if manifest.has("watersheds"):
            ds.watersheds = dataio.load_local_units(manifest, "watershed")
        if manifest.has("ecoregions"):
            ds.ecoregions = dataio.load_local_units(manifest, "ecoregion")
    if manifest.has("households"):
        ds.households = dataio.load_households(manifest)
    return ds


def _fill_pressures(stats, by_id_values, overwrite=False):
    out = []
    for s in stats:
        extra = by_id_values.get(s.entity_id, {})
        pressure = dict(s.pressure)
        for k, v in extra.items():
            if overwrite or k not in pressure:
                pressure[k] = v
        out.append(EntityStats(s.entity_id, s.population, pressure, s.value_added, s.employment, s.parent))
    return out


def _attach_footprints(ds: Dataset):
    if ds.table is None:
        return
    model = FootprintModel().fit(ds.table)
    region_vals: dict[str, dict] = {}
    sector_vals: dict[str, dict] = {}
    for acc in model.transform(ds.extensions):
        ds.accounts[acc.name] = acc
        for i, r in enumerate(acc.regions):
            region_vals.setdefault(r, {})[f"{acc.name}_pba"] = float(acc.pba[i])
            region_vals.setdefault(r, {})[f"{acc.name}_cba"] = float(acc.cba[i])
        for k, (r, s) in enumerate(ds.table.labels):
            d = sector_vals.setdefault(f"{r}:{s}", {})
            d[f"{acc.name}_pba"] = float(acc.sectoral_pba[k])
            d[f"{acc.name}_cba"] = float(acc.sectoral_cba[k])
    known = {s.entity_id for s in ds.stats}
    missing = sorted(set(ds.table.regions) - known)
    if missing:
        raise StructuralError(f"entity statistics lack MRIO regions {missing}")
    ds.stats = _fill_pressures(ds.stats, region_vals)
    if ds.sub_stats is not None:
        ds.sub_stats = _fill_pressures(ds.sub_stats, sector_vals)


class _Context:
    """Per-run share cache and unit helpers."""

    def __init__(self, config, ds):
        self.config = config
        self.ds = ds
        self.population = {s.entity_id: s.population for s in ds.stats}
        self.sub_population = {s.entity_id: s.population for s in (ds.sub_stats or [])}
        self._cache = {}

    def shares(self, approach, pressure_field, stats=None, key="countries"):
        approach = Approach.parse(approach)
        needs_pressure = approach in (Approach.GF, Approach.BA)
        ck = (key, approach, pressure_field if needs_pressure else None)
        if ck not in self._cache:
            stats = self.ds.stats if stats is None else stats
            if approach is Approach.BA:
                parts = [(self.shares(a, pressure_field, stats, key), w) for a, w in self.config.ba_weights.items()]
                self._cache[ck] = blended_shares(parts)
            else:
                self._cache[ck] = compute_shares(
                    stats,
                    approach,
                    pressure_field=pressure_field,
                    alpha=self.config.ap_alpha,
                    redistribute_missing=self.config.redistribute_missing,
                )
        return self._cache[ck]

    def pressure_unit(self, ext):
        unit = self.ds.manifest.pressure_units.get(ext)
        if unit is None:
            raise ConfigurationError(f"no unit declared for pressure {ext!r} (manifest pressure_units)")
        return unit


def _round(value, decimals):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return ""
    q = Decimal(repr(float(value))).quantize(Decimal(1).scaleb(-decimals), rounding=ROUND_HALF_EVEN)
    if q == 0:
        q = abs(q)
    return str(q)


def _g(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return ""
    return format(float(value), ".6g")


def _rows_for(ctx, boundary, budget_spec, perspective, approaches, entity_budgets, population):
    """ReportRows for one boundary/perspective. ``entity_budgets`` maps
    approach -> list of AllocatedBudget in the boundary unit."""
    cfg = ctx.config
    ext = cfg.extensions[boundary]
    pfield = f"{ext}_{perspective}"
    p_unit = ctx.pressure_unit(ext)
    to_pressure = units.conversion_factor(budget_spec.unit, p_unit)
    disp_unit, _ = DISPLAY[boundary]
    to_display = units.conversion_factor(p_unit, disp_unit)
    withhold = boundary in cfg.withhold_actual
    stats_by_id = {s.entity_id: s for s in (ctx.ds.stats + (ctx.ds.sub_stats or []))}
    rows = []
    for approach in approaches:
        for b in entity_budgets[approach]:
            s = stats_by_id[b.entity_id]
            pop = population.get(b.entity_id, 0.0)
            pc = pop > 0
            scale = to_display / pop if pc else 1.0
            budget = b.budget * to_pressure * scale
            actual = None if withhold or pfield not in s.pressure else s.pressure[pfield] * scale
            start = s.pressure.get(f"{pfield}_start")
            rates = {}
            if actual is not None and actual > 0 and budget > 0:
                rates = {y: reduction_rate(actual, budget, cfg.base_year, y) for y in cfg.target_years}
            hist = None
            if actual is not None and start is not None and cfg.start_year is not None and start > 0 and actual > 0:
                hist = growth_rate(start * scale, actual, cfg.start_year, cfg.base_year)
            rows.append(
                ReportRow(
                    entity=b.entity_id,
                    boundary=boundary,
                    approach=approach.value,
                    perspective=perspective,
                    budget=budget,
                    actual=actual,
                    over_under_ratio=over_under(actual, budget) if actual is not None and budget > 0 else None,
                    change_pct=change_pct(start * scale, actual) if actual is not None and start is not None else None,
                    reduction_rate=rates,
                    unit=units.per_capita_unit(disp_unit) if pc else p_unit,
                    per_capita=pc,
                    parent=b.parent,
                    historical_rate=hist,
                    has_baseline=start is not None and actual is not None,
                )
            )
    return rows


def _country_rows(ctx, boundary, spec, perspective):
    cfg = ctx.config
    pfield = f"{cfg.extensions[boundary]}_{perspective}"
    budgets = {
        a: allocate_budget(ctx.shares(a, pfield), spec) for a in cfg.approaches
    }
    return _rows_for(ctx, boundary, spec, perspective, cfg.approaches, budgets, ctx.population)


def _sub_rows(ctx, boundary, spec, perspective):
    cfg = ctx.config
    pfield = f"{cfg.extensions[boundary]}_{perspective}"
    groups: dict[str, list] = {}
    for s in ctx.ds.sub_stats:
        if s.parent is None:
            raise StructuralError(f"sub-entity {s.entity_id!r} has no parent")
        groups.setdefault(s.parent, []).append(s)
    unknown = sorted(set(groups) - set(ctx.population))
    if unknown:
        raise StructuralError(f"sub-entities reference unknown countries {unknown}")
    budgets = {}
    for a in cfg.approaches:
        within_a = Approach.parse(cfg.within_approach) if cfg.within_approach else a
        if within_a in (Approach.EPC, Approach.BA):
            empty = [p for p, ch in groups.items() if math.fsum(c.population for c in ch) <= 0]
            if empty:
                raise ConfigurationError(
                    f"within-country {within_a.value} needs sub-entity population; none for {sorted(empty)}"
                )
        within = {
            parent: ctx.shares(within_a, pfield, children, key=f"sub:{parent}")
            for parent, children in sorted(groups.items())
        }
        budgets[a] = two_stage_allocate(ctx.shares(a, pfield), within, spec)
    return _rows_for(ctx, boundary, spec, perspective, cfg.approaches, budgets, ctx.sub_population)


def _summary(ctx, boundary, spec, perspective):
    """Min/max/mean over EPC, GF and AP per focus entity, mean being the
    equal-weight blend."""
    cfg = ctx.config
    pfield = f"{cfg.extensions[boundary]}_{perspective}"
    parts = {a: ctx.shares(a, pfield) for a in SUMMARY_APPROACHES}
    equal = blended_shares([(parts[a], 1 / 3) for a in SUMMARY_APPROACHES])
    budgets = {a: allocate_budget(s, spec) for a, s in parts.items()}
    budgets[Approach.BA] = allocate_budget(equal, spec)
    rows = _rows_for(ctx, boundary, spec, perspective, list(budgets), budgets, ctx.population)
    by_entity: dict[str, dict] = {}
    for r in rows:
        by_entity.setdefault(r.entity, {})[r.approach] = r
    out = []
    focus = cfg.focus or sorted(by_entity)
    for e in focus:
        if e not in by_entity:
            raise ConfigurationError(f"focus entity {e!r} not in the dataset")
        d = by_entity[e]
        vals = [d[a.value].budget for a in SUMMARY_APPROACHES]
        mean = d["BA"].budget
        actual = d["BA"].actual
        out.append(
            {
                "entity": e,
                "boundary": boundary,
                "perspective": perspective,
                "unit": d["BA"].unit,
                "AP": d["AP"].budget,
                "EPC": d["EPC"].budget,
                "GF": d["GF"].budget,
                "min": min(vals),
                "max": max(vals),
                "mean": mean,
                "actual": actual,
                "actual_over_mean": over_under(actual, mean) if actual is not None and mean > 0 else None,
            }
        )
    return out


def _normalized(ctx):
    cfg = ctx.config
    stats = ctx.ds.stats
    ids = [s.entity_id for s in stats]
    pop = [s.population for s in stats]
    out = []
    exts = sorted({cfg.extensions[b] for b in cfg.boundaries})
    for ext in exts:
        for p in cfg.perspectives:
            pfield = f"{ext}_{p}"
            if not all(pfield in s.pressure for s in stats) or sum(pop) <= 0:
                continue
            pc = per_capita([s.pressure[pfield] for s in stats], pop)
            modes = {
                "global": normalized_comparison(pc, "global_population_weighted", population=pop),
                "country_mean": normalized_comparison(pc, "country_mean"),
            }
            if cfg.normalization_subset:
                sel = [i for i, e in enumerate(ids) if e in set(cfg.normalization_subset)]
                modes["subset_mean"] = normalized_comparison(pc, "subset_mean", subset=sel)
            for i, e in enumerate(ids):
                row = {"entity": e, "extension": ext, "perspective": p, "per_capita": float(pc[i])}
                row.update({k: float(v[i]) for k, v in modes.items()})
                out.append(row)
    return out


def _local(ctx):
    cfg = ctx.config
    local = cfg.local or {}
    country = local.get("country")
    if not country:
        raise ConfigurationError("local evaluation needs local.country")
    approaches = [Approach.parse(a) for a in local.get("approaches", ["EPC", "GF", "BA"])]
    local_gf = bool(local.get("local_gf", True))
    perspective = local.get("perspective", "cba")
    results = {}
    for kind, records, boundary in (
        ("watersheds", ctx.ds.watersheds, "freshwater"),
        ("ecoregions", ctx.ds.ecoregions, "biodiversity"),
    ):
        if not records:
            continue
        pfield = f"{cfg.extensions[boundary]}_{perspective}"
        needed = set(approaches) - {Approach.BA}
        if Approach.BA in approaches:
            needed |= set(cfg.ba_weights)
        if local_gf:
            needed.discard(Approach.GF)
        global_shares = {a.value: ctx.shares(a, pfield) for a in sorted(needed, key=lambda a: a.value)}
        weights = {a.value: w for a, w in cfg.ba_weights.items()}
        evaluate = evaluate_watershed if kind == "watersheds" else evaluate_ecoregion
        rows = []
        for rec in records:
            rows.extend(evaluate(rec, country, global_shares, approaches, local_gf, weights))
        results[kind] = rows
    return results


def _inequality(ds):
    out, curves = [], []
    for group in sorted(ds.households or {}):
        values, weights = ds.households[group]
        res = lorenz_gini(values, weights)
        out.append(
            {
                "group": group,
                "n": int(values.size),
                "gini": res.gini,
                "top10_share": res.top_share(0.10),
                "top20_share": res.top_share(0.20),
                "population_holding_50": res.population_holding(0.50),
            }
        )
        curves.extend(
            {"group": group, "population_share": float(p), "footprint_share": float(f)}
            for p, f in zip(res.population_share, res.footprint_share)
        )
    return out, curves


def compute(config: ScenarioConfig, ds: Dataset) -> dict:
    _attach_footprints(ds)
    ctx = _Context(config, ds)
    world_pop = math.fsum(ctx.population.values())
    specs = budgets_from_config(config.budgets, world_pop if world_pop > 0 else None, config.base_year)
    missing = [b for b in config.boundaries if b not in specs]
    if missing:
        raise ConfigurationError(f"cannot resolve budgets for {missing} (biodiversity needs population)")
    rows, summary = [], []
    want_summary = all(a in config.approaches for a in SUMMARY_APPROACHES) and config.scope == "countries"
    for boundary in config.boundaries:
        for p in config.perspectives:
            if config.scope == "countries":
                rows.extend(_country_rows(ctx, boundary, specs[boundary], p))
            else:
                rows.extend(_sub_rows(ctx, boundary, specs[boundary], p))
            if want_summary:
                summary.extend(_summary(ctx, boundary, specs[boundary], p))
    result = {
        "budgets": {b: asdict(specs[b]) for b in sorted(specs)},
        "rows": rows,
        "summary": summary,
        "normalized": _normalized(ctx) if config.scope == "countries" else [],
        "local": _local(ctx) if config.local else {},
    }
    result["inequality"], result["lorenz"] = _inequality(ds)
    return result


# --- writing -----------------------------------------------------------------


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _row_sort_key(r):
    return (r.boundary, r.perspective, r.parent or "", r.entity, r.approach)


def _budget_table(config, rows):
    rate_cols = [f"reduction_rate_{y}" for y in config.target_years]
    header = [
        "entity", "parent", "boundary", "approach", "perspective", "unit", "budget", "actual",
        "over_under_ratio", "change_pct", "historical_rate", *rate_cols, "status",
    ]
    body = []
    for r in sorted(rows, key=_row_sort_key):
        dec = DISPLAY[r.boundary][1] if r.per_capita else None
        fmt = (lambda v: _round(v, dec)) if dec is not None else _g
        if r.actual is None:
            status = "budget only"
        elif r.over_under_ratio is None:
            status = "no budget"
        else:
            status = "overshoot" if r.over_under_ratio > 1 else "within"
        body.append(
            [
                r.entity, r.parent or "", r.boundary, r.approach, r.perspective, r.unit,
                fmt(r.budget), fmt(r.actual), _round(r.over_under_ratio, RATIO_DECIMALS[r.boundary]),
                "no baseline" if r.has_baseline and r.change_pct is None else _round(r.change_pct, PCT_DECIMALS),
                _round(r.historical_rate, PCT_DECIMALS),
                *[_round(r.reduction_rate.get(y), PCT_DECIMALS) for y in config.target_years],
                status,
            ]
        )
    return _csv_text(header, body)


def _summary_table(summary):
    header = ["entity", "boundary", "perspective", "unit", "AP", "EPC", "GF", "min", "max", "mean", "actual", "actual_over_mean"]
    body = []
    for s in sorted(summary, key=lambda s: (s["entity"], s["boundary"], s["perspective"])):
        dec = DISPLAY[s["boundary"]][1] if s["unit"].endswith("/capita") else None
        fmt = (lambda v: _round(v, dec)) if dec is not None else _g
        body.append(
            [s["entity"], s["boundary"], s["perspective"], s["unit"]]
            + [fmt(s[k]) for k in ("AP", "EPC", "GF", "min", "max", "mean")]
            + [fmt(s["actual"]) if s["actual"] is not None else "n.a.",
               _round(s["actual_over_mean"], RATIO_DECIMALS[s["boundary"]]) if s["actual_over_mean"] is not None else "n.a."]
        )
    return _csv_text(header, body)


def _local_table(rows):
    header = ["unit_id", "country", "approach", "A_SOS", "ACTUAL", "abs_transgression", "rel_transgression", "band"]
    body = [
        [
            r.unit_id, r.country, r.approach, _g(r.A_SOS), _g(r.ACTUAL), _g(r.abs_transgression),
            "no footprint" if r.no_footprint else _g(r.rel_transgression), r.band.value,
        ]
        for r in sorted(rows, key=lambda r: (r.unit_id, r.country, r.approach))
    ]
    return _csv_text(header, body)


def _plain(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "__dataclass_fields__"):
        return _plain(asdict(obj))
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def render(config: ScenarioConfig, result: dict, checksums: dict) -> dict[str, str]:
    files = {
        "budgets.csv": _budget_table(config, result["rows"]),
    }
    if result["summary"]:
        files["summary.csv"] = _summary_table(result["summary"])
    if result["normalized"]:
        header = ["entity", "extension", "perspective", "per_capita", "global", "country_mean"]
        if config.normalization_subset:
            header.append("subset_mean")
        body = [
            [r["entity"], r["extension"], r["perspective"]] + [_g(r[k]) for k in header[3:]]
            for r in sorted(result["normalized"], key=lambda r: (r["extension"], r["perspective"], r["entity"]))
        ]
        files["normalized.csv"] = _csv_text(header, body)
    for kind, rows in sorted(result["local"].items()):
        files[f"local_{kind}.csv"] = _local_table(rows)
    if result["inequality"]:
        keys = ["group", "n", "gini", "top10_share", "top20_share", "population_holding_50"]
        files["inequality.csv"] = _csv_text(keys, [[r["group"], r["n"]] + [_g(r[k]) for k in keys[2:]] for r in result["inequality"]])
        files["lorenz.csv"] = _csv_text(
            ["group", "population_share", "footprint_share"],
            [[c["group"], repr(c["population_share"]), repr(c["footprint_share"])] for c in result["lorenz"]],
        )
    payload = {
        "config": config.to_dict(),
        "dataset_checksums": checksums,
        "clip_bounds": CLIP_BOUNDS,
        "budgets": result["budgets"],
        "rows": sorted((_plain(r) for r in result["rows"]), key=lambda r: (r["boundary"], r["perspective"], r["parent"] or "", r["entity"], r["approach"])),
        "summary": _plain(result["summary"]),
        "normalized": _plain(result["normalized"]),
        "local": {k: [dict(_plain(r), no_footprint=r.no_footprint) for r in v] for k, v in sorted(result["local"].items())},
        "inequality": _plain(result["inequality"]),
    }
    files["report.json"] = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    return files


def run_scenario(config: ScenarioConfig) -> list[Path]:
    """Run a scenario and write its report files; returns the written paths.

    ``InputError`` means the dataset or configuration is invalid; any other
    ``PBAllocError`` comes from the computation. Either way nothing is left
    in the output directory.
    """
    ds = load_dataset(config)
    checksums = {
        str(ref.path.relative_to(ds.manifest.root)) if ref.path.is_relative_to(ds.manifest.root) else str(ref.path): dataio.sha256_of(ref.path)
        for ref in ds.manifest.all_refs()
    }
    result = compute(config, ds)
    files = render(config, result, dict(sorted(checksums.items())))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        for name, text in files.items():
            (staging / name).write_text(text, encoding="utf-8")
        written = []
        for name in sorted(files):
            target = out / name
            shutil.move(str(staging / name), target)
            written.append(target)
    except BaseException:
        for name in files:
            (out / name).unlink(missing_ok=True)
        raise
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    logger.info("wrote %d report files to %s", len(written), out)
    return written


__all__ = [
    "ScenarioConfig",
    "ReportRow",
    "load_dataset",
    "compute",
    "render",
    "run_scenario",
    "InputError",
]
