"""Command-line pipeline: extract -> distances -> spacing / cpl / ranksize.

Stages communicate only through documented files (cities CSV, CDM1 matrix,
JSON reports), so any stage can be rerun or replaced in isolation. Every
command writes a manifest recording its full configuration, input digests
and output digests; `rerun` re-executes a manifest and verifies that the
outputs reproduce bit-exactly.

Exit codes: 0 success, 2 argument error, 3 data/format error,
4 degeneracy/connectivity error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .cities import extract_cities, load_cities_csv, save_cities_csv
from .errors import ArgumentError, CityHierError
from .geo import build_distance_matrix, snap_cities
from .ingest import (
    load_distance_matrix,
    load_population_grid,
    load_road_network,
    save_distance_matrix,
)
from .mctests import fit_hierarchy, hinterland_samples, spacing_grid, spatial_cpl_test
from .partition import build_spatial_hierarchy, save_hierarchy_json
from .stats import write_ranksize_csv

SCHEMA_VERSION = 1


def _parse_int_list(text: str) -> list[int]:
    """Accept '4', '2..6', '2..10..2', or '3,5,9'."""
    if ".." in text:
        parts = text.split("..")
        if len(parts) == 2:
            a, b = int(parts[0]), int(parts[1])
            step = 1
        elif len(parts) == 3:
            a, b, step = int(parts[0]), int(parts[1]), int(parts[2])
        else:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        if step < 1 or b < a:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        return list(range(a, b + 1, step))
    return [int(t) for t in text.split(",") if t]


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_manifest(path, command, config, inputs, outputs, started, finished) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "started_utc": started,
        "finished_utc": finished,
    }
    _dump_json(manifest, path)


def _run_extract(args) -> tuple[list, list]:
    grid = load_population_grid(args.grid, format=args.format)
    cities = extract_cities(
        grid,
        density_min=args.density_min,
        pop_min=args.pop_min,
        connectivity=args.connectivity,
    )
    save_cities_csv(cities, args.out)
    return [args.grid], [args.out]


def _run_distances(args) -> tuple[list, list]:
    cities = load_cities_csv(args.cities)
    inputs = [args.cities]
    outputs = [args.out]
    if args.mode == "road":
        if not args.network:
            raise ArgumentError("--mode road requires --network")
        network = load_road_network(args.network)
        net_dir = Path(args.network)
        if net_dir.is_dir():
            inputs += [net_dir / "nodes.csv", net_dir / "edges.csv"]
        records = snap_cities(cities, network, snap_radius_km=args.snap_radius_km)
        matrix = build_distance_matrix(cities, network, snap_radius_km=args.snap_radius_km)
        report = args.snap_report or str(Path(args.out).with_suffix(".snap.csv"))
        with open(report, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["city_id", "node_id", "snap_distance_m"])
            for r in records:
                writer.writerow([r.city_id, r.node_id, repr(r.snap_m)])
        outputs.append(report)
    else:
        matrix = build_distance_matrix(cities, None)
    save_distance_matrix(matrix, args.out)
    return inputs, outputs


def _run_spacing(args) -> tuple[list, list]:
    cities = load_cities_csv(args.cities)
    matrix = load_distance_matrix(args.matrix)
    results = spacing_grid(
        cities,
        matrix,
        args.K,
        args.L,
        M=args.M,
        seed=args.seed,
        method=args.method,
        threads=args.threads,
    )
    report = {
        "schema_version": SCHEMA_VERSION,
        "test": "spacing-out",
        "n_cities": len(cities),
        "M": args.M,
        "seed": args.seed,
        "method": args.method,
        "matrix_provider": matrix.provider,
        "results": [],
    }
    for r in results:
        entry = {
            "K": r.K,
            "L": r.L,
            "M": r.M,
            "p0": r.p0,
            "significance": r.significance,
            "color": r.color,
            "mean_count_voronoi": r.mean_count_voronoi,
        }
        if args.keep_samples:
            entry["mean_counts_random"] = r.mean_counts_random.tolist()
        report["results"].append(entry)
    _dump_json(report, args.out)
    summary = args.summary_csv or str(Path(args.out).with_suffix(".csv"))
    with open(summary, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["K", "L", "M", "mean_count_voronoi", "p0", "significance", "color"])
        for r in results:
            writer.writerow(
                [r.K, r.L, r.M, repr(r.mean_count_voronoi), repr(r.p0), r.significance, r.color]
            )
    return [args.cities, args.matrix], [args.out, summary]


def _run_cpl(args) -> tuple[list, list]:
    cities = load_cities_csv(args.cities)
    matrix = load_distance_matrix(args.matrix)
    results = [
        spatial_cpl_test(
            cities,
            matrix,
            L,
            N=args.N,
            min_subset_size=args.min_subset_size,
            seed=args.seed,
            threads=args.threads,
        )
        for L in args.L
    ]
    report = {
        "schema_version": SCHEMA_VERSION,
        "test": "spatial-cpl",
        "n_cities": len(cities),
        "N": args.N,
        "seed": args.seed,
        "min_subset_size": args.min_subset_size,
        "matrix_provider": matrix.provider,
        "results": [],
    }
    for r in results:
        entry = {
            "L": r.L,
            "p_L": r.p_L,
            "rmse_observed": r.rmse_observed,
            "theta_hat": r.theta_hat,
            "subsets_used": r.m,
            "n_obs": r.n_obs,
            "node_count": r.node_count,
            "hinterland_count": r.hinterland_count,
        }
        if args.keep_samples:
            entry["rmse_random"] = r.rmse_random.tolist()
        report["results"].append(entry)
    _dump_json(report, args.out)
    theta_csv = args.theta_csv or str(Path(args.out).with_suffix(".theta.csv"))
    with open(theta_csv, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["L", "theta_hat", "rmse_observed", "p_L", "subsets_used", "n_obs"])
        for r in results:
            writer.writerow(
                [r.L, repr(r.theta_hat), repr(r.rmse_observed), repr(r.p_L), r.m, r.n_obs]
            )
    return [args.cities, args.matrix], [args.out, theta_csv]


def _run_ranksize(args) -> tuple[list, list]:
    cities = load_cities_csv(args.cities)
    matrix = load_distance_matrix(args.matrix)
    hier = build_spatial_hierarchy(cities, args.L, matrix)
    populations = cities.populations
    samples = hinterland_samples(hier, populations)
    fit = fit_hierarchy(hier, populations, args.min_subset_size)
    write_ranksize_csv(samples, fit, args.out)
    outputs = [args.out]
    if args.hierarchy_json:
        save_hierarchy_json(hier, args.hierarchy_json)
        outputs.append(args.hierarchy_json)
    return [args.cities, args.matrix], outputs


def _run_rerun(args) -> tuple[list, list]:
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    command = manifest["command"]
    if command not in _RUNNERS:
        raise ArgumentError(f"manifest names unknown command {command!r}")
    for path, digest in manifest["inputs"].items():
        actual = _sha256(path)
        if actual != digest:
            raise ArgumentError(
                f"input {path} changed since the manifest was written "
                f"({actual[:12]} != {digest[:12]})"
            )
    config = dict(manifest["config"])
    if args.threads is not None and "threads" in config:
        config["threads"] = args.threads
    ns = argparse.Namespace(**config)
    inputs, outputs = _RUNNERS[command](ns)
    mismatched = [
        str(p) for p in outputs if manifest["outputs"].get(str(p)) != _sha256(p)
    ]
    if mismatched:
        raise CityHierError(f"rerun outputs differ from manifest: {mismatched}")
    return inputs, outputs


_RUNNERS = {
    "extract": _run_extract,
    "distances": _run_distances,
    "spacing": _run_spacing,
    "cpl": _run_cpl,
    "ranksize": _run_ranksize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cityhier",
        description="City hierarchies: extraction, distances, spacing-out and CPL tests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract cities from a population raster")
    p.add_argument("--grid", required=True)
    p.add_argument("--format", default="auto", choices=["auto", "esri-ascii", "packed-binary"])
    p.add_argument("--density-min", dest="density_min", type=float, default=1000.0)
    p.add_argument("--pop-min", dest="pop_min", type=float, default=10000.0)
    p.add_argument("--connectivity", type=int, default=4, choices=[4, 8])
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("distances", help="build the inter-city distance matrix")
    p.add_argument("--cities", required=True)
    p.add_argument("--network", default=None, help="directory with nodes.csv and edges.csv")
    p.add_argument("--mode", default="greatcircle", choices=["road", "greatcircle"])
    p.add_argument("--snap-radius-km", dest="snap_radius_km", type=float, default=20.0)
    p.add_argument("--snap-report", dest="snap_report", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("spacing", help="spacing-out test over a (K, L) grid")
    p.add_argument("--cities", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--K", type=_parse_int_list, required=True)
    p.add_argument("--L", type=_parse_int_list, required=True)
    p.add_argument("--M", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default="shortcut", choices=["shortcut", "shuffle"])
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--keep-samples", dest="keep_samples", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--summary-csv", dest="summary_csv", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("cpl", help="spatial common-power-law test over L values")
    p.add_argument("--cities", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--L", type=_parse_int_list, required=True)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--min-subset-size", dest="min_subset_size", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--keep-samples", dest="keep_samples", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--theta-csv", dest="theta_csv", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("ranksize", help="rank-size plot data per global hinterland")
    p.add_argument("--cities", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--min-subset-size", dest="min_subset_size", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--hierarchy-json", dest="hierarchy_json", default=None)
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("rerun", help="re-execute a manifest and verify outputs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--threads", type=int, default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0

    started = _utcnow()
    try:
        if args.command == "rerun":
            _run_rerun(args)
            return 0
        config = {
            k: v for k, v in vars(args).items() if k not in ("command", "manifest")
        }
        inputs, outputs = _RUNNERS[args.command](args)
        manifest_path = args.manifest or str(Path(args.out).parent / (Path(args.out).name + ".manifest.json"))
        _write_manifest(
            manifest_path, args.command, config, inputs, outputs, started, _utcnow()
        )
    except CityHierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
