"""Command-line front end: simulate -> grid -> precompute -> locate/evaluate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import gridding, logio, simulate, storage
from .evaluate import evaluate as run_benchmark
from .evaluate import parse_config, write_cpa, write_report
from .features import RandomizedLassoConfig
from .model import MISSING_VALUE_DBM, ReferenceRecord
from .positioning import KdeConfig, locate, precompute

DEFAULT_WALK_SPACING = 0.26
DEFAULT_TEST_COUNT = 500


def _load_scene(path: str | None, seed: int | None):
    """Scene config plus generation parameters from a TOML file."""
    data = {}
    if path is not None:
        with open(path, "rb") as fp:
            data = tomllib.load(fp)
    walk_spacing = data.pop("walk_spacing", DEFAULT_WALK_SPACING)
    test_count = data.pop("test_count", DEFAULT_TEST_COUNT)
    if "roi_polygon" in data:
        data["roi_polygon"] = tuple(tuple(v) for v in data["roi_polygon"])
    if seed is not None:
        data["seed"] = seed
    try:
        cfg = simulate.SceneConfig(**data)
    except TypeError as exc:
        raise ValueError(f"bad scene config: {exc}") from None
    return cfg, walk_spacing, test_count


def _cmd_simulate(args) -> int:
    cfg, walk_spacing, test_count = _load_scene(args.config, args.seed)
    raw = simulate.generate_survey(cfg, walk_spacing)
    logio.write_records(args.out, raw.records)
    if args.test is not None:
        pairs = simulate.generate_testset(cfg, test_count)
        logio.write_records(args.test, [ReferenceRecord(fp, xy) for fp, xy in pairs])
    if args.mask_out is not None:
        lines = [f"{x!r} {y!r}" for x, y in cfg.roi_polygon]
        Path(args.mask_out).write_text("\n".join(lines) + "\n")
    return 0


def _cmd_grid(args) -> int:
    raw = gridding.ingest(args.input)
    spec = gridding.GridSpec(args.cell, args.spacing)
    mask = gridding.read_polygon(args.mask) if args.mask else None
    rfm = gridding.grid_interpolate(raw, spec, mask)
    storage.save_rfm(args.out, rfm)
    print(
        f"gridded {len(raw.records)} survey records into "
        f"{rfm.n_sub_regions} sub-regions x {rfm.points_per_region} points, "
        f"{len(rfm.roi_key_union)} observable features"
    )
    return 0


def _cmd_precompute(args) -> int:
    rfm = storage.load_rfm(args.rfm)
    lasso_cfg = RandomizedLassoConfig(
        sampling_ratio=args.epsilon,
        randomizations=args.T,
        relevance_threshold=args.threshold,
        seed=args.seed,
    )
    kde_cfg = KdeConfig(
        pooling_radius=args.pooling_radius, bandwidth_floor=args.bandwidth_floor
    )
    cache = precompute(
        rfm,
        lasso_cfg,
        kde_cfg,
        missing_value=args.missing,
        full_cache=args.full_cache,
        cv_folds=args.cv_folds,
    )
    storage.save_cache(args.out, cache)
    profile_sizes = [len(b.profile) for b in cache.regions]
    print(
        f"cached {cache.n_sub_regions} sub-regions "
        f"({'full' if cache.full else 'profile-only'} density tables), "
        f"profile sizes {min(profile_sizes)}..{max(profile_sizes)}"
    )
    return 0


def _parse_h(text: str) -> int | None:
    return None if text == "all" else int(text)


def _cmd_locate(args) -> int:
    cache = storage.load_cache(args.cache)
    records = logio.read_records(args.fingerprint)
    if not records:
        raise ValueError("fingerprint log is empty")
    for record in records:
        est = locate(cache, record.fingerprint, k=args.k, h=_parse_h(args.h))
        print(
            json.dumps(
                {
                    "x": est.coordinates[0],
                    "y": est.coordinates[1],
                    "log_posterior": est.log_posterior,
                    "subregion": est.subregion_index,
                    "used_feature_keys": [int(k) for k in est.used_feature_keys],
                    "candidates_scored": est.candidates_scored,
                }
            )
        )
    return 0


def _cmd_evaluate(args) -> int:
    cache = storage.load_cache(args.cache)
    testset = logio.to_testset(logio.read_records(args.test))
    configs = [parse_config(c) for c in args.configs.split(",") if c]
    if not configs:
        raise ValueError("no configurations given")
    reports = run_benchmark(cache, testset, configs, repeats=args.repeats)
    write_report(args.out, reports)
    if args.cpa_out is not None:
        write_cpa(args.cpa_out, reports)
    for r in reports:
        print(
            f"{r.config.name}: mse {r.mse:.3f} m^2, median {r.median:.2f} m, "
            f"p90 {r.p90:.2f} m, {r.time_mean * 1e3:.2f} ms/query"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fploc",
        description="Fingerprinting-based indoor positioning pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic survey and test set")
    p.add_argument("--config", help="scene description (TOML)")
    p.add_argument("--out", required=True, help="survey fingerprint log")
    p.add_argument("--test", help="test-set fingerprint log")
    p.add_argument("--mask-out", help="write the RoI polygon for `grid --mask`")
    p.add_argument("--seed", type=int, help="override the scene seed")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("grid", help="grid a survey log into a reference map")
    p.add_argument("--in", dest="input", required=True, help="survey fingerprint log")
    p.add_argument("--cell", type=float, default=2.0, help="sub-region edge (m)")
    p.add_argument("--spacing", type=float, default=0.2, help="lattice pitch (m)")
    p.add_argument("--mask", help="RoI polygon file (one vertex per line)")
    p.add_argument("--out", required=True, help="gridded RFM container")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("precompute", help="build the online positioning cache")
    p.add_argument("--rfm", required=True, help="gridded RFM container")
    p.add_argument("--T", type=int, default=200, help="LASSO randomizations")
    p.add_argument("--epsilon", type=float, default=0.75, help="subsample ratio")
    p.add_argument("--threshold", type=float, default=1e-4, help="coefficient cut")
    p.add_argument("--seed", type=int, default=0, help="feature-selection seed")
    p.add_argument("--missing", type=float, default=MISSING_VALUE_DBM)
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--pooling-radius", type=float, help="default: cell/2")
    p.add_argument("--bandwidth-floor", type=float, default=1.0)
    p.add_argument(
        "--full-cache",
        action="store_true",
        help="density tables for every key (enables all-features positioning)",
    )
    p.add_argument("--out", required=True, help="cache container")
    p.set_defaults(func=_cmd_precompute)

    p = sub.add_parser("locate", help="estimate positions for fingerprints")
    p.add_argument("--cache", required=True)
    p.add_argument("--fingerprint", required=True, help="fingerprint log")
    p.add_argument("--k", type=int, default=10, help="candidate sub-regions")
    p.add_argument("--h", default="10", help="features per region, or 'all'")
    p.set_defaults(func=_cmd_locate)

    p = sub.add_parser("evaluate", help="benchmark configurations on a test set")
    p.add_argument("--cache", required=True)
    p.add_argument("--test", required=True, help="test-set fingerprint log")
    p.add_argument(
        "--configs",
        default="full,k10h10,k10h6",
        help="comma-separated: full | k<int>h<int|all>",
    )
    p.add_argument("--repeats", type=int, default=1, help="timing passes")
    p.add_argument("--out", required=True, help="report CSV")
    p.add_argument("--cpa-out", help="CPA curves CSV")
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
