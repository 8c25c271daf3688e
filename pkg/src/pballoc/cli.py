"""``pb-alloc`` command line.

Exit codes: 0 success, 2 invalid input or configuration, 3 compute failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import dataio
from .exceptions import ComputeError, InputError, PBAllocError
from .fixtures import generate_fixture, load_fixture_spec, write_fixture
from .report import ScenarioConfig, run_scenario

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3


def _csv_list(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pb-alloc", description="Downscale planetary boundaries and evaluate footprints.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write report tables")
    run.add_argument("--scenario", required=True, type=Path)
    run.add_argument("--out", type=Path, help="output directory (overrides the scenario)")
    run.add_argument("--perspective", choices=("pba", "cba", "both"))
    run.add_argument("--approach", type=_csv_list, help="comma list of epc,gf,ap,va,ba")
    run.add_argument("--boundary", type=_csv_list, help="comma list of climate,water,biodiversity")
    run.add_argument("--dataset", type=Path, help="manifest path (overrides the scenario)")

    val = sub.add_parser("validate", help="check that a dataset manifest and its files load")
    val.add_argument("--manifest", required=True, type=Path)

    fix = sub.add_parser("fixture", help="generate a synthetic dataset")
    fix.add_argument("--spec", required=True, type=Path)
    fix.add_argument("--out", type=Path, default=Path("fixture"))
    return parser


def _run(args):
    overrides = {
        # command-line paths are relative to the working directory
        "output_dir": args.out.resolve() if args.out else None,
        "dataset": args.dataset.resolve() if args.dataset else None,
        "perspectives": [args.perspective] if args.perspective else None,
        "approaches": args.approach,
        "boundaries": args.boundary,
    }
    config = ScenarioConfig.from_json(args.scenario, **overrides)
    for path in run_scenario(config):
        print(path)


def _validate(args):
    manifest = dataio.load_manifest(args.manifest)
    counts = []
    if manifest.has_mrio:
        table = dataio.load_mrio(manifest)
        for name in sorted(manifest.extensions):
            dataio.load_extension(manifest, name, table)
        counts.append(f"{table.n_regions} regions x {table.n_sectors} sectors, {len(manifest.extensions)} extensions")
    for key in ("stats", "sub_stats"):
        if manifest.has(key):
            counts.append(f"{len(dataio.load_stats(manifest, key))} {key} rows")
    for key, kind in (("watersheds", "watershed"), ("ecoregions", "ecoregion")):
        if manifest.has(key):
            counts.append(f"{len(dataio.load_local_units(manifest, kind))} {key}")
    if manifest.has("households"):
        counts.append(f"{len(dataio.load_households(manifest))} household groups")
    print(f"ok: {manifest.source}: " + "; ".join(counts))


def _fixture(args):
    spec = load_fixture_spec(args.spec)
    print(write_fixture(generate_fixture(spec), args.out))


COMMANDS = {"run": _run, "validate": _validate, "fixture": _fixture}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    warnings.simplefilter("default")
    try:
        COMMANDS[args.command](args)
    except InputError as exc:
        print(f"pb-alloc {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ComputeError as exc:
        print(f"pb-alloc {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except PBAllocError as exc:
        print(f"pb-alloc {args.command}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
