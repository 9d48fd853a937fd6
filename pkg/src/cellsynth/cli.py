"""Command-line interface.

Every stage of the pipeline runs standalone on serialized intermediates, so
failures can be debugged step by step:

    extract-blobs -> gen-blobs -> fit-prior / fit-spacing -> place
    pipeline  (all of the above end to end, plus tiles and the manifest)
    stats / compare-placement  (reports: JSON + CSV + figures)

Progress goes to stderr (verbosity via CELLSYNTH_LOG); artifacts land under
--out. Errors named by the library exit nonzero with a JSON object on
stderr.
"""
from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset_io as dio
from .blobs import extract_blobs, interpolate_blobs
from .errors import CellSynthError, InsufficientInputError
from .pipeline import (
    GenConfig,
    compare_placement,
    run_pipeline,
    run_stats,
    substream,
)
from .placement import greedy_placement
from .priors import fit_prior, fit_spacing, perlin2d, validate_prior

log = logging.getLogger("cellsynth")


def _expand_paths(specs: list[str]) -> list[Path]:
    """Expand directories and glob patterns into a sorted list of files."""
    out: list[Path] = []
    for spec in specs:
        p = Path(spec)
        if p.is_dir():
            out.extend(sorted(p.glob("*.png")))
        elif any(ch in spec for ch in "*?["):
            out.extend(sorted(Path(m) for m in glob.glob(spec)))
        else:
            out.append(p)
    if not out:
        raise InsufficientInputError(f"no files matched: {specs}")
    return out


def _load_masks(specs: list[str]) -> list[np.ndarray]:
    return [dio.load_mask_png(p) for p in _expand_paths(specs)]


def _load_pairs(image_specs: list[str], mask_specs: list[str]):
    images = _expand_paths(image_specs)
    masks = _expand_paths(mask_specs)
    if len(images) != len(masks):
        raise InsufficientInputError(
            f"{len(images)} images but {len(masks)} masks; pairs are matched by sorted order"
        )
    return [dio.load_annotated_pair(i, m) for i, m in zip(images, masks)]


def _load_prior_map(spec: str, height: int, width: int, seed: int) -> np.ndarray:
    """A concrete prior map from a params JSON or a grayscale PNG."""
    path = Path(spec)
    if path.suffix.lower() == ".json":
        params = dio.load_perlin_params(path)
        if params.seed == 0 and seed != 0:
            params = params.with_seed(seed)
        return perlin2d(height, width, params)
    return validate_prior(dio.load_prior_png(path))


def _cmd_extract_blobs(args) -> int:
    masks = _load_masks(args.real_masks)
    pool = []
    for mask in masks:
        pool.extend(extract_blobs(mask, min_blob_area=args.min_blob_area))
    dio.save_blob_pool(args.out, pool)
    log.info("extracted %d blobs from %d masks", len(pool), len(masks))
    print(json.dumps({"blobs": len(pool), "out": str(args.out)}))
    return 0


def _cmd_gen_blobs(args) -> int:
    pool = dio.load_blob_pool(args.pool)
    rng = substream(args.seed, "blobgen")
    generated = interpolate_blobs(
        pool, args.l, args.e, rng, min_blob_area=args.min_blob_area
    )
    dio.save_blob_pool(args.out, generated)
    log.info("generated %d blobs from a pool of %d", len(generated), len(pool))
    print(json.dumps({"blobs": len(generated), "out": str(args.out)}))
    return 0


def _cmd_fit_prior(args) -> int:
    masks = _load_masks(args.real_masks)
    params = fit_prior(masks, blur_sigma=args.blur_sigma)
    dio.save_perlin_params(args.out, params)
    print(json.dumps(params.to_dict()))
    return 0


def _cmd_fit_spacing(args) -> int:
    masks = _load_masks(args.real_masks)
    spacing = fit_spacing(masks)
    dio.save_spacing(args.out, spacing)
    print(
        json.dumps(
            {"samples": len(spacing), "median": float(np.median(spacing.samples))}
        )
    )
    return 0


def _cmd_place(args) -> int:
    pool = dio.load_blob_pool(args.pool)
    prior = _load_prior_map(args.prior, args.height, args.width, args.seed)
    spacing = dio.load_spacing(args.spacing)
    rng = substream(args.seed, "placement", 0)
    mask, placement_log = greedy_placement(prior, pool, spacing, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dio.save_mask_png(out / "mask.png", mask)
    dio.save_placement_log(out / "placement.jsonl", placement_log)
    log.info("placed %d blobs", len(placement_log))
    print(json.dumps({"placed": len(placement_log), "out": str(out)}))
    return 0


def _cmd_pipeline(args) -> int:
    overrides = {
        "n_images": args.n,
        "l_blobs": args.l,
        "e_points": args.e,
        "seed": args.seed,
        "tile_size": args.tile_size,
        "min_blob_area": args.min_blob_area,
        "blur_sigma": args.blur_sigma,
        "height": args.height,
        "width": args.width,
        "prior": args.prior,
        "spacing": args.spacing,
        "jobs": args.jobs,
    }
    if args.config:
        base = GenConfig.load(args.config).to_dict()
    else:
        base = GenConfig().to_dict()
    base.update({k: v for k, v in overrides.items() if v is not None})
    config = GenConfig.from_dict(base)

    pairs = _load_pairs(args.real_images, args.real_masks)
    manifest = run_pipeline(config, pairs, args.out)
    print(
        json.dumps(
            {
                "entries": len(manifest.entries),
                "real_blobs": manifest.real_blobs,
                "generated_blobs": manifest.generated_blobs,
                "out": str(args.out),
            }
        )
    )
    return 0


def _cmd_stats(args) -> int:
    from .report import write_stats_report

    masks = _load_masks(args.real_masks)
    report = run_stats(masks, args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = write_stats_report(out, report)
    log.info("wrote %d report files under %s", len(written), out)
    print(report.table())
    return 0


def _cmd_compare_placement(args) -> int:
    from .report import write_comparison_report

    pool = dio.load_blob_pool(args.pool)
    prior = _load_prior_map(args.prior, args.height, args.width, args.seed)
    spacing = dio.load_spacing(args.spacing)
    comparison = compare_placement(
        prior, pool, spacing, args.seeds, master_seed=args.seed, attempts=args.attempts
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_comparison_report(out, comparison)
    print(
        json.dumps(
            {
                "greedy_mean_adherence": comparison.greedy_mean,
                "random_mean_adherence": comparison.random_mean,
                "sign_test_p": comparison.p_value,
            }
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellsynth",
        description="Synthetic annotated dataset generation for cell instance segmentation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_masks(p):
        p.add_argument("--real-masks", nargs="+", required=True,
                       help="mask PNGs: files, directories, or glob patterns")

    p = sub.add_parser("extract-blobs", help="cut a blob pool out of labeled masks")
    add_masks(p)
    p.add_argument("--out", required=True)
    p.add_argument("--min-blob-area", type=int, default=16)
    p.set_defaults(func=_cmd_extract_blobs)

    p = sub.add_parser("gen-blobs", help="interpolate new blobs from a pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("-l", type=int, default=100, help="number of blobs to generate")
    p.add_argument("-e", type=int, default=96, help="contour points per blob")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-blob-area", type=int, default=16)
    p.set_defaults(func=_cmd_gen_blobs)

    p = sub.add_parser("fit-prior", help="fit Perlin prior parameters to real masks")
    add_masks(p)
    p.add_argument("--out", required=True)
    p.add_argument("--blur-sigma", type=float, default=8.0)
    p.set_defaults(func=_cmd_fit_prior)

    p = sub.add_parser("fit-spacing", help="estimate the inter-blob spacing distribution")
    add_masks(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit_spacing)

    p = sub.add_parser("place", help="run one greedy placement")
    p.add_argument("--prior", required=True, help="prior params .json or grayscale .png")
    p.add_argument("--pool", required=True)
    p.add_argument("--spacing", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    p.set_defaults(func=_cmd_place)

    p = sub.add_parser("pipeline", help="full generation pipeline")
    p.add_argument("--real-images", nargs="+", required=True)
    p.add_argument("--real-masks", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config; flags override its keys")
    p.add_argument("-n", type=int, help="number of generated images")
    p.add_argument("-l", type=int, help="number of generated blobs")
    p.add_argument("-e", type=int, help="contour points per blob")
    p.add_argument("--seed", type=int)
    p.add_argument("--tile-size", type=int)
    p.add_argument("--min-blob-area", type=int)
    p.add_argument("--blur-sigma", type=float)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--prior", help='"fitted", params .json, or grayscale .png')
    p.add_argument("--spacing", help='"fitted" or samples .json')
    p.add_argument("--jobs", type=int, help="parallel workers for per-image generation")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("stats", help="real vs generated distribution report")
    add_masks(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("compare-placement", help="greedy vs random placement report")
    p.add_argument("--prior", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--spacing", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attempts", type=int)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    p.set_defaults(func=_cmd_compare_placement)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=os.environ.get("CELLSYNTH_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CellSynthError, ValueError, OSError) as exc:
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
