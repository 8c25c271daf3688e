"""Flat-file ingestion and serialization.

Formats (UTF-8 CSV):

* matrices (Z, Y): two header rows. Row 1 holds the column region,
  row 2 starts with ``region,sector`` and holds the column sector (for Y,
  the final-demand category; categories are summed per region). Each data
  row starts with its region and sector label.
* gross output: ``region,sector,x``
* extensions: ``region,sector,value``; sector ``households`` is household
  direct pressure for that region.
* entity statistics: ``entity_id,population,value_added,employment`` plus
  optional ``parent`` and any number of pressure columns (``<ext>_pba``...).
* local units: long format ``unit_id,field,value``.
* households: ``household_id,group,footprint[,weight]``.

A JSON manifest lists the files, extension units and optional sha256
checksums, which are verified on load.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import units
from .allocation import EntityStats
from .exceptions import (
    ChecksumMismatch,
    ConfigurationError,
    InputError,
    ParseError,
    StructuralError,
)
from .local import EcoregionRecord, WatershedRecord
from .mrio import ExtensionAccount, MrioTable

HOUSEHOLDS = "households"
DATA_DIR_ENV = "PB_DATA_DIR"
STATS_COLUMNS = ("entity_id", "population", "value_added", "employment", "parent")


@dataclass(frozen=True)
class FileRef:
    path: Path
    sha256: str | None = None


@dataclass(frozen=True)
class ExtensionRef(FileRef):
    unit: str = ""


@dataclass
class DatasetManifest:
    root: Path
    base_year: int = 2016
    mrio: dict = field(default_factory=dict)
    extensions: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    units: tuple = ()
    source: Path | None = None
    pressure_units: dict = field(default_factory=dict)

    def file(self, key) -> FileRef:
        if key not in self.files:
            raise ConfigurationError(f"manifest has no {key!r} file")
        return self.files[key]

    def has(self, key):
        return key in self.files

    @property
    def has_mrio(self):
        return bool(self.mrio)

    def all_refs(self):
        yield from self.mrio.values()
        yield from self.extensions.values()
        yield from self.files.values()


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def resolve_manifest_path(path) -> Path:
    """Relative manifest paths resolve against ``$PB_DATA_DIR`` when set."""
    p = Path(path)
    if not p.is_absolute() and not p.exists() and os.environ.get(DATA_DIR_ENV):
        p = Path(os.environ[DATA_DIR_ENV]) / p
    return p


def _ref(root, entry, key, cls=FileRef):
    if isinstance(entry, str):
        entry = {"path": entry}
    if not isinstance(entry, dict) or "path" not in entry:
        raise ConfigurationError(f"manifest entry {key!r} needs a 'path'")
    kwargs = {"path": (root / entry["path"]).resolve(), "sha256": entry.get("sha256")}
    if cls is ExtensionRef:
        if "unit" not in entry:
            raise ConfigurationError(f"extension {key!r} has no unit")
        kwargs["unit"] = entry["unit"]
    return cls(**kwargs)


def load_manifest(path, verify: bool = True) -> DatasetManifest:
    path = resolve_manifest_path(path)
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None
    root = Path(path).resolve().parent
    mrio = {k: _ref(root, v, k) for k, v in (raw.get("mrio") or {}).items()}
    if mrio and set(mrio) != {"Z", "Y", "x"}:
        raise ConfigurationError(f"mrio section needs exactly Z, Y and x, got {sorted(mrio)}")
    extensions = {k: _ref(root, v, k, ExtensionRef) for k, v in (raw.get("extensions") or {}).items()}
    files = {
        k: _ref(root, raw[k], k)
        for k in ("stats", "sub_stats", "watersheds", "ecoregions", "households")
        if raw.get(k)
    }
    registry = tuple(units.canonical(u) for u in raw.get("units", []))
    for name, ref in extensions.items():
        if units.canonical(ref.unit) not in registry:
            raise ConfigurationError(f"extension {name!r} unit {ref.unit!r} missing from the units registry")
    pressure_units = {k: units.canonical(v) for k, v in (raw.get("pressure_units") or {}).items()}
    pressure_units.update({k: units.canonical(ref.unit) for k, ref in extensions.items()})
    for name, unit in pressure_units.items():
        if registry and unit not in registry:
            raise ConfigurationError(f"pressure unit {unit!r} of {name!r} missing from the units registry")
    manifest = DatasetManifest(
        root, int(raw.get("base_year", 2016)), mrio, extensions, files, registry, Path(path), pressure_units
    )
    for ref in manifest.all_refs():
        if not ref.path.exists():
            raise ConfigurationError(f"referenced file does not exist: {ref.path}")
        if verify and ref.sha256 and sha256_of(ref.path) != ref.sha256:
            raise ChecksumMismatch(f"checksum mismatch for {ref.path}")
    return manifest


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if row and any(cell.strip() for cell in row):
                yield lineno, [cell.strip() for cell in row]


def _number(cell, path, line, col, label=None, allow_blank=False):
    if cell == "" and allow_blank:
        return math.nan
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"not a number: {cell!r}" + (f" ({label})" if label else ""), path, line, col) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {cell!r}" + (f" ({label})" if label else ""), path, line, col)
    return value


def _read_matrix(path):
    """Return (col_regions, col_second, row_labels, values)."""
    rows = list(_rows(path))
    if rows and rows[0][1] == ["region", "sector"]:
        # a matrix without columns has an all-blank first header row
        rows.insert(0, (rows[0][0] - 1, ["", ""]))
    if len(rows) < 2:
        raise ParseError("matrix needs two header rows", path, 1)
    (_, top), (l2, second) = rows[0], rows[1]
    if len(top) != len(second):
        raise ParseError("header rows differ in length", path, l2)
    if second[:2] != ["region", "sector"]:
        raise ParseError("second header row must start with 'region,sector'", path, l2, 1)
    col_regions, col_second = top[2:], second[2:]
    row_labels, values = [], []
    for lineno, row in rows[2:]:
        if len(row) != len(top):
            raise ParseError(f"expected {len(top)} cells, got {len(row)}", path, lineno)
        row_labels.append((row[0], row[1]))
        values.append(
            [
                _number(cell, path, lineno, j + 3, f"{col_regions[j]}/{col_second[j]}")
                for j, cell in enumerate(row[2:])
            ]
        )
    return col_regions, col_second, row_labels, np.array(values, dtype=float).reshape(len(row_labels), len(col_regions))


def _region_sector_product(labels, path):
    regions, sectors = [], []
    for r, s in labels:
        if r not in regions:
            regions.append(r)
        if s not in sectors:
            sectors.append(s)
    if not regions or not sectors:
        raise StructuralError(f"{path}: empty region or sector list")
    expected = [(r, s) for r in regions for s in sectors]
    if list(labels) != expected:
        raise StructuralError(f"{path}: labels are not a region-major region x sector product")
    return tuple(regions), tuple(sectors)


def load_mrio(manifest: DatasetManifest, balance_tol: float = 1e-6) -> MrioTable:
    if not manifest.has_mrio:
        raise ConfigurationError("manifest has no mrio section")
    zp, yp, xp = (manifest.mrio[k].path for k in ("Z", "Y", "x"))
    z_regions, z_sectors, z_rows, Z = _read_matrix(zp)
    col_labels = list(zip(z_regions, z_sectors))
    if not col_labels:
        raise StructuralError(f"{zp}: empty sector list")
    regions, sectors = _region_sector_product(col_labels, zp)
    if z_rows != col_labels:
        raise StructuralError(f"{zp}: row labels do not match column labels")

    y_regions, _, y_rows, Y_full = _read_matrix(yp)
    if y_rows != col_labels:
        raise StructuralError(f"{yp}: row labels do not match Z")
    unknown = sorted(set(y_regions) - set(regions))
    if unknown:
        raise StructuralError(f"{yp}: final demand for unknown regions {unknown}")
    Y = np.zeros((len(col_labels), len(regions)))
    for j, r in enumerate(y_regions):
        Y[:, regions.index(r)] += Y_full[:, j]

    x_labels, x = [], []
    for lineno, row in _rows(xp):
        if lineno == 1 or row[:2] == ["region", "sector"]:
            continue
        if len(row) != 3:
            raise ParseError(f"expected region,sector,x; got {len(row)} cells", xp, lineno)
        x_labels.append((row[0], row[1]))
        x.append(_number(row[2], xp, lineno, 3, "x"))
    if x_labels != col_labels:
        raise StructuralError(f"{xp}: labels do not match Z")
    try:
        return MrioTable(regions, sectors, Z, Y, np.array(x), balance_tol=balance_tol)
    except InputError as exc:
        raise type(exc)(f"{zp.parent}: {exc}") from None


def load_extension(manifest: DatasetManifest, name: str, table: MrioTable | None = None) -> ExtensionAccount:
    if name not in manifest.extensions:
        raise ConfigurationError(f"manifest has no extension {name!r}")
    ref = manifest.extensions[name]
    f_vals, hh_vals = {}, {}
    for lineno, row in _rows(ref.path):
        if row[:2] == ["region", "sector"]:
            continue
        if len(row) != 3:
            raise ParseError(f"expected region,sector,value; got {len(row)} cells", ref.path, lineno)
        value = _number(row[2], ref.path, lineno, 3, name)
        target = hh_vals if row[1] == HOUSEHOLDS else f_vals
        key = row[0] if row[1] == HOUSEHOLDS else (row[0], row[1])
        if key in target:
            raise ParseError(f"duplicate entry {key}", ref.path, lineno)
        target[key] = value
    if table is not None:
        labels = table.labels
        if set(f_vals) != set(labels):
            missing = sorted(set(labels) - set(f_vals))[:5]
            extra = sorted(set(f_vals) - set(labels))[:5]
            raise StructuralError(f"{ref.path}: wrong vector length/labels; missing {missing}, unknown {extra}")
        extra_hh = sorted(set(hh_vals) - set(table.regions))
        if extra_hh:
            raise StructuralError(f"{ref.path}: household rows for unknown regions {extra_hh}")
        f = np.array([f_vals[k] for k in labels])
        f_hh = np.array([hh_vals.get(r, 0.0) for r in table.regions])
    else:
        f = np.array(list(f_vals.values()))
        f_hh = np.array(list(hh_vals.values()))
    ext = ExtensionAccount(name, ref.unit, f, f_hh)
    if table is not None:
        ext.check_against(table)
    return ext


def load_stats(manifest: DatasetManifest, key: str = "stats") -> list[EntityStats]:
    path = manifest.file(key).path
    rows = list(_rows(path))
    if not rows:
        raise ParseError("empty statistics file", path, 1)
    header = rows[0][1]
    if header[0] != "entity_id":
        raise ParseError("first column must be entity_id", path, 1, 1)
    out, seen = [], set()
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", path, lineno)
        rec = dict(zip(header, row))
        eid = rec["entity_id"]
        if eid in seen:
            raise ParseError(f"duplicate entity {eid!r}", path, lineno, 1)
        seen.add(eid)
        pressure = {}
        for col, (name, cell) in enumerate(zip(header, row), start=1):
            if name in STATS_COLUMNS or cell == "":
                continue
            pressure[name] = _number(cell, path, lineno, col, name)

        def num(name, default=math.nan):
            if name not in rec:
                return default
            return _number(rec[name], path, lineno, header.index(name) + 1, name, allow_blank=True)

        population = num("population", 0.0)
        try:
            out.append(
                EntityStats(
                    eid,
                    0.0 if math.isnan(population) else population,
                    pressure,
                    num("value_added"),
                    num("employment"),
                    rec.get("parent") or None,
                )
            )
        except InputError as exc:
            raise ParseError(str(exc), path, lineno) from None
    return out


def load_local_units(manifest: DatasetManifest, kind: str) -> list:
    if kind not in ("watershed", "ecoregion"):
        raise ConfigurationError(f"unknown local unit kind {kind!r}")
    path = manifest.file(kind + "s").path
    units_: dict[str, dict] = {}
    first_line: dict[str, int] = {}
    for lineno, row in _rows(path):
        if row == ["unit_id", "field", "value"]:
            continue
        if len(row) != 3:
            raise ParseError(f"expected unit_id,field,value; got {len(row)} cells", path, lineno)
        uid, fld, cell = row
        first_line.setdefault(uid, lineno)
        fields = units_.setdefault(uid, {})
        if fld in fields:
            raise ParseError(f"duplicate field {fld!r} for unit {uid!r}", path, lineno, 2)
        fields[fld] = cell if fld == "status" else _number(cell, path, lineno, 3, fld)
    records = []
    for uid, fields in units_.items():
        try:
            records.append(_watershed(uid, fields) if kind == "watershed" else _ecoregion(uid, fields))
        except KeyError as exc:
            raise ParseError(f"unit {uid!r} lacks field {exc.args[0]!r}", path, first_line[uid]) from None
        except InputError as exc:
            raise ParseError(str(exc), path, first_line[uid]) from None
    return records


def _prefixed(fields, prefix):
    return {k[len(prefix):]: v for k, v in fields.items() if k.startswith(prefix)}


def _watershed(uid, fields):
    return WatershedRecord(uid, fields["MAF"], fields["HWC"], fields["EWR"], _prefixed(fields, "consumption:"))


def _ecoregion(uid, fields):
    return EcoregionRecord(
        uid, fields["protected_frac"], fields["habitat_frac"], _prefixed(fields, "loss:"), fields.get("status")
    )


def load_households(manifest: DatasetManifest) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-group (footprints, weights) for inequality statistics."""
    path = manifest.file("households").path
    rows = list(_rows(path))
    header = rows[0][1] if rows else []
    if header[:3] != ["household_id", "group", "footprint"]:
        raise ParseError("header must start with household_id,group,footprint", path, 1)
    groups: dict[str, tuple[list, list]] = {}
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", path, lineno)
        vals, wts = groups.setdefault(row[1], ([], []))
        vals.append(_number(row[2], path, lineno, 3, "footprint"))
        wts.append(_number(row[3], path, lineno, 4, "weight") if len(header) > 3 else 1.0)
    return {g: (np.array(v), np.array(w)) for g, (v, w) in groups.items()}


# --- writers ---------------------------------------------------------------


def _fmt(value):
    return repr(float(value))


def write_matrix_csv(path, col_regions, col_second, row_labels, values):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", ""] + list(col_regions))
        w.writerow(["region", "sector"] + list(col_second))
        for (r, s), row in zip(row_labels, np.asarray(values)):
            w.writerow([r, s] + [_fmt(v) for v in row])


def write_mrio(table: MrioTable, directory) -> dict:
    d = Path(directory)
    labels = table.labels
    write_matrix_csv(d / "Z.csv", [r for r, _ in labels], [s for _, s in labels], labels, table.Z)
    write_matrix_csv(d / "Y.csv", table.regions, ["final_demand"] * table.n_regions, labels, table.Y)
    with open(d / "x.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "sector", "x"])
        for (r, s), v in zip(labels, table.x):
            w.writerow([r, s, _fmt(v)])
    return {k: f"{k}.csv" for k in ("Z", "Y", "x")}


def write_extension(ext: ExtensionAccount, table: MrioTable, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "sector", "value"])
        for (r, s), v in zip(table.labels, ext.f):
            w.writerow([r, s, _fmt(v)])
        for r, v in zip(table.regions, ext.f_hh):
            w.writerow([r, HOUSEHOLDS, _fmt(v)])


def write_stats(stats, path):
    fields = sorted({k for s in stats for k in s.pressure})
    with_parent = any(s.parent for s in stats)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity_id", "population", "value_added", "employment"] + (["parent"] if with_parent else []) + fields)
        for s in stats:
            row = [s.entity_id, _fmt(s.population)]
            row += ["" if math.isnan(v) else _fmt(v) for v in (s.value_added, s.employment)]
            if with_parent:
                row.append(s.parent or "")
            row += [_fmt(s.pressure[f]) if f in s.pressure else "" for f in fields]
            w.writerow(row)


def write_local_units(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "field", "value"])
        for rec in records:
            if isinstance(rec, WatershedRecord):
                w.writerow([rec.watershed_id, "MAF", _fmt(rec.MAF)])
                w.writerow([rec.watershed_id, "HWC", _fmt(rec.HWC)])
                w.writerow([rec.watershed_id, "EWR", _fmt(rec.EWR)])
                for c, v in rec.country_consumption.items():
                    w.writerow([rec.watershed_id, f"consumption:{c}", _fmt(v)])
            else:
                w.writerow([rec.ecoregion_id, "protected_frac", _fmt(rec.protected_frac)])
                w.writerow([rec.ecoregion_id, "habitat_frac", _fmt(rec.habitat_frac)])
                w.writerow([rec.ecoregion_id, "status", rec.status.value])
                for c, v in rec.country_loss.items():
                    w.writerow([rec.ecoregion_id, f"loss:{c}", _fmt(v)])


def write_manifest(
    directory, base_year=2016, mrio=None, extensions=None, checksums=True, pressure_units=None, **files
) -> Path:
    """Write ``manifest.json`` for files already in ``directory``.

    ``extensions`` maps name -> (relative path, unit); other keyword
    arguments map manifest keys (stats, watersheds, ...) to relative paths.
    """
    d = Path(directory)

    def entry(rel, **extra):
        e = {"path": rel, **extra}
        if checksums:
            e["sha256"] = sha256_of(d / rel)
        return e

    raw = {"base_year": base_year}
    if mrio:
        raw["mrio"] = {k: entry(v) for k, v in sorted(mrio.items())}
    if extensions:
        raw["extensions"] = {k: entry(p, unit=u) for k, (p, u) in sorted(extensions.items())}
    if pressure_units:
        raw["pressure_units"] = {k: units.canonical(v) for k, v in sorted(pressure_units.items())}
    declared = {u for _, u in (extensions or {}).values()} | set((pressure_units or {}).values())
    if declared:
        raw["units"] = sorted({units.canonical(u) for u in declared})
    for key, rel in sorted(files.items()):
        if rel:
            raw[key] = entry(rel)
    path = d / "manifest.json"
    path.write_text(json.dumps(raw, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
