"""
Command-line interface.

Subcommands:
    simulate         draw a truncated sample and write it to CSV
    estimate         fit a model to a dataset file
    benchmark        replicate experiment -> rows CSV + summary JSON
    kappa-benchmark  concentration-recovery variant of benchmark
    storms           fit mean direction of geolocated events in a border

Configuration comes from an optional JSON file (--config) whose keys
mirror ExperimentConfig; every flag given on the command line overrides
its config key. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import (
    AllReplicatesFailed,
    ConfigError,
    DataError,
    ExperimentConfig,
    build_boundary,
    ingest_events,
    run_benchmark,
    run_kappa_benchmark,
    run_storms,
    truth_params,
)
from .boundary import spherical_to_latlon
from .estimator import Dataset, estimate
from .geometry import to_spherical
from .sampling import SampleRequest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its keys")
    parser.add_argument("--seed", type=int, help="base seed (default 0)")
    parser.add_argument("--out-dir", help="artifact directory (default out)")
    parser.add_argument("--workers", type=int, help="parallel replicate workers (default 1)")
    parser.add_argument(
        "--g", choices=("haversine", "projected", "unit"), dest="g_kind",
        help="scaling function variant",
    )


def _boundary_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--a0", type=float, help="colatitude boundary angle (radians)")
    parser.add_argument("--side", choices=("greater", "less"),
                        help="which side of a0 is observed (default greater)")
    parser.add_argument("--boundary-csv", help="polyline boundary CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmsm",
        description="Truncated score matching on the unit sphere: "
                    "samplers, estimators, and benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a truncated sample to CSV")
    _common_flags(p)
    _boundary_flags(p)
    p.add_argument("--model", choices=("vmf", "kent"), default="vmf")
    p.add_argument("--mu-a", type=float, help="truth polar angle (default pi/2)")
    p.add_argument("--mu-b", type=float, help="truth azimuth (default pi)")
    p.add_argument("--kappa", type=float, help="truth concentration")
    p.add_argument("--alpha", type=float, help="truth ovalness (kent)")
    p.add_argument("--n", type=int, default=1000, help="observed sample size")
    p.add_argument("--max-draw-factor", type=int, help="raw-draw cap multiplier")
    p.add_argument("--out", help="output CSV (default <out-dir>/samples.csv)")

    p = sub.add_parser("estimate", help="fit a model to a dataset file")
    _common_flags(p)
    _boundary_flags(p)
    p.add_argument("--data", required=True, help="dataset CSV (a_rad,b_rad)")
    p.add_argument("--degrees", action="store_true",
                   help="ingest --data as latitude/longitude degree columns")
    p.add_argument("--model-kind", default="vmf_mu_kappa",
                   choices=("vmf_mu_only", "vmf_mu_kappa", "kent_frame"))
    p.add_argument("--fixed-kappa", type=float, help="known concentration")
    p.add_argument("--fixed-alpha", type=float, help="known ovalness (kent)")
    p.add_argument("--drop-axis", type=int, choices=(1, 2, 3),
                   help="coordinate number (x1..x3) zeroed by --g projected")

    p = sub.add_parser("benchmark", help="replicate experiment -> CSV/JSON")
    _common_flags(p)
    p.add_argument("--experiment",
                   choices=("vmf_known_kappa", "vmf_unknown_kappa", "kent_known_shape"))
    p.add_argument("--replicates", type=int)
    p.add_argument("--n-grid", help="comma-separated sample sizes")
    p.add_argument("--methods", help="comma-separated method names")
    p.add_argument("--timings", action="store_true",
                   help="record wall times (breaks byte-identical reruns)")

    p = sub.add_parser("kappa-benchmark",
                       help="concentration-recovery benchmark (unknown-kappa only)")
    _common_flags(p)
    p.add_argument("--replicates", type=int)
    p.add_argument("--n-grid", help="comma-separated sample sizes")
    p.add_argument("--methods", help="comma-separated method names")
    p.add_argument("--timings", action="store_true")

    p = sub.add_parser("storms", help="fit mean direction of events in a border")
    _common_flags(p)
    p.add_argument("--events", required=True, help="events CSV with lat/lon columns")
    p.add_argument("--boundary-csv", required=True, help="border polyline CSV")
    p.add_argument("--drop-axis", type=int, choices=(1, 2, 3))

    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def _merge(raw: dict, args: argparse.Namespace, keys: dict) -> dict:
    """Overlay non-None flag values onto config-file keys."""
    merged = dict(raw)
    for attr, key in keys.items():
        value = getattr(args, attr, None)
        if value is not None and value is not False:
            merged[key] = value
    return merged


def _experiment_config(args: argparse.Namespace, experiment_default: str | None = None) -> ExperimentConfig:
    raw = _load_config(args.config)
    merged = _merge(raw, args, {
        "experiment": "experiment",
        "seed": "seed",
        "replicates": "replicates",
        "out_dir": "out_dir",
        "workers": "workers",
        "g_kind": "g_kind",
        "timings": "timings",
    })
    if getattr(args, "n_grid", None):
        merged["n_grid"] = [int(v) for v in str(args.n_grid).split(",") if v]
    if getattr(args, "methods", None):
        merged["methods"] = [m.strip() for m in str(args.methods).split(",") if m.strip()]
    if experiment_default and "experiment" not in merged:
        merged["experiment"] = experiment_default
    try:
        return ExperimentConfig.from_dict(merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _boundary_spec(args: argparse.Namespace, raw: dict) -> dict:
    if getattr(args, "boundary_csv", None):
        return {"type": "polyline_csv", "path": args.boundary_csv}
    if getattr(args, "a0", None) is not None:
        return {
            "type": "colatitude",
            "a0": args.a0,
            "side": getattr(args, "side", None) or "greater",
        }
    if "boundary" in raw:
        return raw["boundary"]
    return {"type": "colatitude", "a0": 0.5 * np.pi, "side": "greater"}


def cmd_simulate(args: argparse.Namespace) -> int:
    raw = _load_config(args.config)
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    out_dir = Path(args.out_dir or raw.get("out_dir", "out"))
    truth_raw = dict(raw.get("truth", {}))
    if args.model:
        truth_raw.setdefault("model", args.model)
    for attr, key in (("mu_a", "mu_a"), ("mu_b", "mu_b"),
                      ("kappa", "kappa"), ("alpha", "alpha")):
        value = getattr(args, attr)
        if value is not None:
            truth_raw[key] = value
    truth_raw.setdefault("model", "vmf")
    truth_raw.setdefault("mu_a", 0.5 * np.pi)
    truth_raw.setdefault("mu_b", np.pi)
    truth_raw.setdefault("kappa", 6.0)
    if truth_raw["model"] == "kent":
        truth_raw.setdefault("alpha", 3.0)
        truth_raw.setdefault("gamma1", [0.0, 0.0, 1.0])
    config_shim = ExperimentConfig(
        experiment="kent_known_shape" if truth_raw["model"] == "kent" else "vmf_known_kappa",
        truth=truth_raw,
        boundary=_boundary_spec(args, raw),
        seed=int(seed),
    )
    params = truth_params(config_shim)
    boundary = build_boundary(config_shim.boundary)
    request = SampleRequest(
        params, args.n, boundary, int(seed),
        max_draw_factor=args.max_draw_factor or raw.get("max_draw_factor", 1000),
    )
    sample = request.draw()
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = Path(args.out) if args.out else out_dir / "samples.csv"
    Dataset(sample.x).to_csv(out_path)
    print(f"wrote {sample.x.shape[0]} samples to {out_path} "
          f"(acceptance rate {sample.acceptance_rate:.4f})")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    raw = _load_config(args.config)
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    out_dir = Path(args.out_dir or raw.get("out_dir", "out"))
    g_kind = args.g_kind or raw.get("g_kind", "haversine")
    try:
        if args.degrees:
            data, _, _ = ingest_events(args.data)
        else:
            data = Dataset.from_csv(args.data)
    except DataError:
        raise
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read dataset {args.data}: {exc}") from exc
    boundary = None
    if g_kind != "unit":
        boundary = build_boundary(_boundary_spec(args, raw))
    fixed = {}
    if args.fixed_kappa is not None:
        fixed["kappa"] = args.fixed_kappa
    if args.fixed_alpha is not None:
        fixed["alpha"] = args.fixed_alpha
    try:
        result = estimate(
            data, boundary, g_kind=g_kind, model_kind=args.model_kind,
            fixed=fixed or None, seed=int(seed), drop_axis=args.drop_axis,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    a, b = to_spherical(result.params.mu)
    lat, lon = spherical_to_latlon(float(a), float(b))
    report = {
        "model_kind": args.model_kind,
        "g_kind": g_kind,
        "n": data.n,
        "mu_a_rad": float(a),
        "mu_b_rad": float(b),
        "mu_lat_deg": float(lat),
        "mu_lon_deg": float(lon),
        "mu_x": [float(v) for v in result.params.mu],
        "kappa": float(result.params.kappa),
        "objective": result.objective,
        "converged": result.converged,
        "iterations": result.iterations,
        "restarts_used": result.restarts_used,
    }
    if args.model_kind == "kent_frame":
        report["gamma1"] = [float(v) for v in result.params.gamma1]
        report["gamma2"] = [float(v) for v in result.params.gamma2]
        report["alpha"] = float(result.params.alpha)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "estimate.json"
    with open(out_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    result = run_benchmark(config)
    print(f"wrote {len(result.rows)} rows to {result.csv_path}")
    print(f"summary: {result.json_path}")
    return EXIT_OK


def cmd_kappa_benchmark(args: argparse.Namespace) -> int:
    config = _experiment_config(args, experiment_default="vmf_unknown_kappa")
    result = run_kappa_benchmark(config)
    print(f"wrote {len(result.rows)} rows to {result.csv_path}")
    print(f"summary: {result.json_path}")
    return EXIT_OK


def cmd_storms(args: argparse.Namespace) -> int:
    raw = _load_config(args.config)
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    out_dir = args.out_dir or raw.get("out_dir", "out")
    report = run_storms(
        args.events, args.boundary_csv, out_dir=out_dir,
        seed=int(seed), drop_axis=args.drop_axis,
    )
    print(json.dumps(report["fits"], indent=2, sort_keys=True))
    print(f"report: {Path(out_dir) / 'storms_report.json'}")
    return EXIT_OK


_DISPATCH = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "benchmark": cmd_benchmark,
    "kappa-benchmark": cmd_kappa_benchmark,
    "storms": cmd_storms,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AllReplicatesFailed, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
