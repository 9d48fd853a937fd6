"""End-to-end dataset generation: extract -> interpolate -> fit priors ->
place -> flatten -> select tiles -> manifest.

A master seed fans out to named substreams (blob generation, per-entry
prior and placement), so adding stages or changing the worker count never
perturbs earlier streams and reruns are byte-identical.
"""
from __future__ import annotations

import concurrent.futures
import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import blobs as blobs_mod
from . import dataset_io as dio
from . import priors as priors_mod
from .blobs import Blob, extract_blobs, interpolate_blobs
from .dataset_io import BlobStats, DatasetManifest, ManifestEntry, blob_stats
from .errors import FileFormatError, InsufficientInputError
from .placement import (
    count_instances,
    greedy_placement,
    prior_adherence,
    random_weighted_placement,
)
from .priors import PerlinParams, SpacingDist, fit_prior, fit_spacing, perlin2d

log = logging.getLogger("cellsynth")


def stream_seed(master: int, name: str, index: int | None = None) -> np.random.SeedSequence:
    """Named substream of the master seed; stable across runs and platforms."""
    key = [zlib.crc32(name.encode("utf-8"))]
    if index is not None:
        key.append(int(index))
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(key))


def substream(master: int, name: str, index: int | None = None) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master, name, index))


def stream_entropy(master: int, name: str, index: int | None = None) -> int:
    """A single 64-bit integer drawn from a named substream (for storage)."""
    return int(stream_seed(master, name, index).generate_state(1, np.uint64)[0])


@dataclass
class GenConfig:
    """Tunables of one generation run; everything the seed does not fix."""

    n_images: int = 500
    l_blobs: int = 500
    e_points: int = 96
    height: int = 256
    width: int = 256
    seed: int = 0
    min_blob_area: int = blobs_mod.DEFAULT_MIN_BLOB_AREA
    blur_sigma: float = priors_mod.DEFAULT_BLUR_SIGMA
    tile_size: int = 128
    prior: str | dict = "fitted"  # "fitted" | path to .json/.png | inline params
    spacing: str = "fitted"  # "fitted" | path to .json
    jobs: int = 1

    def __post_init__(self):
        if self.n_images < 1:
            raise ValueError("n_images must be at least 1")
        if self.l_blobs < 1:
            raise ValueError("l_blobs must be at least 1")
        if self.e_points < 8:
            raise ValueError("e_points must be at least 8")
        if self.height < self.tile_size or self.width < self.tile_size:
            raise ValueError("image dims must be at least tile_size")

    def to_dict(self):
        return {
            "n_images": self.n_images,
            "l_blobs": self.l_blobs,
            "e_points": self.e_points,
            "height": self.height,
            "width": self.width,
            "seed": self.seed,
            "min_blob_area": self.min_blob_area,
            "blur_sigma": self.blur_sigma,
            "tile_size": self.tile_size,
            "prior": self.prior,
            "spacing": self.spacing,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "GenConfig":
        path = Path(path)
        if not path.exists():
            raise FileFormatError(f"config file not found: {path}")
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"cannot parse config {path}: {exc}") from exc


def resolve_prior(spec: str | dict, real_masks: list[np.ndarray], blur_sigma: float):
    """Resolve the prior source to ("perlin", params) or ("map", array)."""
    if isinstance(spec, dict):
        return "perlin", PerlinParams.from_dict(spec)
    if spec == "fitted":
        params = fit_prior(real_masks, blur_sigma=blur_sigma)
        log.info("fitted prior: %s", params.to_dict())
        return "perlin", params
    path = Path(spec)
    if path.suffix.lower() == ".json":
        return "perlin", dio.load_perlin_params(path)
    return "map", priors_mod.validate_prior(dio.load_prior_png(path))


def resolve_spacing(spec: str, real_masks: list[np.ndarray]) -> SpacingDist:
    if spec == "fitted":
        spacing = fit_spacing(real_masks)
        log.info("fitted spacing: %d samples, median %.2f px",
                 len(spacing), float(np.median(spacing.samples)))
        return spacing
    return dio.load_spacing(spec)


def _save_tile(path: Path, tile: np.ndarray) -> None:
    Image.fromarray(np.asarray(tile, dtype=np.uint8)).save(path, format="PNG")


# Worker-side state shared by all entries of one run (set once per process).
_WORKER: dict = {}


def _init_worker(state: dict) -> None:
    _WORKER.update(state)


def _build_entry(task: tuple[int, int]) -> dict:
    """Generate one (mask, content, reference tile) triple. Fully determined
    by the entry seed, so results do not depend on scheduling."""
    n, entry_seed = task
    w = _WORKER
    out_dir = Path(w["out_dir"])

    if w["prior_mode"] == "perlin":
        prior_seed = int(
            np.random.SeedSequence(entropy=entry_seed, spawn_key=(zlib.crc32(b"prior"),))
            .generate_state(1, np.uint64)[0]
        )
        params = w["prior_params"].with_seed(prior_seed)
        prior = perlin2d(w["height"], w["width"], params)
        prior_info = {"type": "perlin", **params.to_dict()}
    else:
        prior = w["prior_map"]
        prior_info = {"type": "file", "path": w["prior_path"]}

    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=entry_seed, spawn_key=(zlib.crc32(b"placement"),))
    )
    spacing = SpacingDist(w["spacing_samples"])
    mask, placement_log = greedy_placement(prior, w["pool"], spacing, rng)

    content = dio.flatten(mask)
    tile_idx = dio.select_reference_index(w["tile_counts"], count_instances(mask))

    mask_rel = f"masks/mask_{n:04d}.png"
    content_rel = f"content/content_{n:04d}.png"
    log_rel = f"logs/placement_{n:04d}.jsonl"
    dio.save_mask_png(out_dir / mask_rel, mask)
    dio.save_gray_png(out_dir / content_rel, content)
    dio.save_placement_log(out_dir / log_rel, placement_log)

    return {
        "n": n,
        "entry": ManifestEntry(
            generated_mask_path=mask_rel,
            content_image_path=content_rel,
            reference_tile_path=f"tiles/tile_{tile_idx:04d}.png",
            seed=entry_seed,
            prior_params=prior_info,
            blob_provenance_path=log_rel,
        ),
        "placed": len(placement_log),
    }


def run_pipeline(
    config: GenConfig,
    real_pairs: list[tuple[np.ndarray, np.ndarray]],
    out_dir,
) -> DatasetManifest:
    """Run the full generation pipeline and write the dataset under out_dir."""
    if not real_pairs:
        raise InsufficientInputError("the pipeline needs at least one real (image, mask) pair")
    out_dir = Path(out_dir)
    for sub in ("masks", "content", "tiles", "logs"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    real_masks = [mask for _, mask in real_pairs]

    real_pool = []
    for _, mask in real_pairs:
        real_pool.extend(extract_blobs(mask, min_blob_area=config.min_blob_area))
    if len(real_pool) < 2:
        raise InsufficientInputError(
            f"found {len(real_pool)} usable real blobs; interpolation samples random "
            "pairs, so at least 2 are required"
        )
    log.info("extracted %d real blobs from %d masks", len(real_pool), len(real_pairs))

    gen_pool = interpolate_blobs(
        real_pool,
        config.l_blobs,
        config.e_points,
        substream(config.seed, "blobgen"),
        min_blob_area=config.min_blob_area,
    )
    log.info("generated %d blobs", len(gen_pool))

    prior_mode, prior_value = resolve_prior(config.prior, real_masks, config.blur_sigma)
    spacing = resolve_spacing(config.spacing, real_masks)

    height, width = config.height, config.width
    state: dict = {
        "out_dir": str(out_dir),
        "pool": gen_pool,
        "spacing_samples": spacing.samples,
        "height": height,
        "width": width,
        "prior_mode": prior_mode,
    }
    if prior_mode == "perlin":
        state["prior_params"] = prior_value
        dio.save_perlin_params(out_dir / "prior.json", prior_value)
    else:
        prior_rel = "prior_map.png"
        dio.save_gray_png(out_dir / prior_rel, np.rint(prior_value * 255))
        state["prior_map"] = prior_value
        state["prior_path"] = prior_rel
        height, width = prior_value.shape  # prior dimensions define mask dimensions
        state["height"], state["width"] = height, width
    dio.save_spacing(out_dir / "spacing.json", spacing)

    tile_counts: list[int] = []
    tile_idx = 0
    for image, mask in real_pairs:
        for tile, count in dio.tiles_with_counts(image, mask, config.tile_size):
            _save_tile(out_dir / "tiles" / f"tile_{tile_idx:04d}.png", tile)
            tile_counts.append(count)
            tile_idx += 1
    state["tile_counts"] = tile_counts
    log.info("pooled %d reference tiles", len(tile_counts))

    dio.save_blob_pool(out_dir / "blobs" / "real", real_pool)
    dio.save_blob_pool(out_dir / "blobs" / "generated", gen_pool)

    tasks = [
        (n, stream_entropy(config.seed, "entry", n)) for n in range(config.n_images)
    ]
    if config.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=config.jobs, initializer=_init_worker, initargs=(state,)
        ) as pool:
            results = list(pool.map(_build_entry, tasks))
    else:
        _init_worker(state)
        try:
            results = [_build_entry(t) for t in tasks]
        finally:
            _WORKER.clear()

    results.sort(key=lambda r: r["n"])
    for r in results:
        log.info("entry %04d: %d blobs placed", r["n"], r["placed"])

    manifest = DatasetManifest(
        entries=[r["entry"] for r in results],
        real_images=len(real_pairs),
        generated_images=config.n_images,
        real_blobs=len(real_pool),
        generated_blobs=len(gen_pool),
        master_seed=config.seed,
        blob_pool_dir="blobs",
    )
    dio.write_manifest(out_dir / "manifest.json", manifest)
    log.info("wrote manifest with %d entries to %s", len(manifest.entries), out_dir)
    return manifest


def _prior_for_entry(entry: ManifestEntry, shape: tuple[int, int], base: Path) -> np.ndarray:
    info = entry.prior_params
    if info.get("type") == "perlin":
        params = PerlinParams.from_dict({k: v for k, v in info.items() if k != "type"})
        return perlin2d(shape[0], shape[1], params)
    if info.get("type") == "file":
        return dio.load_prior_png(base / info["path"])
    raise FileFormatError(f"unknown prior_params type in manifest: {info.get('type')}")


@dataclass
class StatsReport:
    """Side-by-side distribution statistics of real vs generated datasets."""

    real: BlobStats
    generated: BlobStats
    adherence: list[float]
    real_areas: np.ndarray
    generated_areas: np.ndarray
    real_ratios: np.ndarray
    generated_ratios: np.ndarray
    counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "real": self.real.to_dict(),
            "generated": self.generated.to_dict(),
            "prior_adherence": {
                "per_entry": self.adherence,
                "mean": float(np.mean(self.adherence)) if self.adherence else None,
            },
            "counts": self.counts,
        }

    def table(self) -> str:
        rows = [
            ("median area [px]", self.real.median_area, self.generated.median_area),
            ("IQR area [px]", self.real.iqr_area, self.generated.iqr_area),
            ("median aspect ratio", self.real.median_aspect_ratio, self.generated.median_aspect_ratio),
            ("IQR aspect ratio", self.real.iqr_aspect_ratio, self.generated.iqr_aspect_ratio),
        ]
        lines = [f"{'metric':<22}{'real':>12}{'generated':>12}"]
        for name, a, b in rows:
            lines.append(f"{name:<22}{a:>12.2f}{b:>12.2f}")
        if self.adherence:
            lines.append(
                f"{'mean prior adherence':<22}{'':>12}{float(np.mean(self.adherence)):>12.3f}"
            )
        return "\n".join(lines)


def _pool_measurements(masks: list[np.ndarray]) -> tuple[list[Blob], np.ndarray, np.ndarray]:
    pool: list[Blob] = []
    for mask in masks:
        pool.extend(extract_blobs(mask, min_blob_area=1))
    if not pool:
        raise InsufficientInputError("no instances found to measure")
    areas = np.array([b.area for b in pool], dtype=np.float64)
    ratios = np.array([dio.aspect_ratio(b.footprint) for b in pool])
    return pool, areas, ratios


def run_stats(real_masks: list[np.ndarray], manifest_path) -> StatsReport:
    """Distribution statistics of real vs generated masks plus adherence."""
    if not real_masks:
        raise InsufficientInputError("stats need at least one real mask")
    manifest_path = Path(manifest_path)
    manifest = dio.read_manifest(manifest_path)
    if not manifest.entries:
        raise InsufficientInputError("the manifest has no entries")
    base = manifest_path.parent

    real_pool, real_areas, real_ratios = _pool_measurements(real_masks)

    gen_masks = [dio.load_mask_png(base / e.generated_mask_path) for e in manifest.entries]
    gen_pool, gen_areas, gen_ratios = _pool_measurements(gen_masks)

    adherence = [
        prior_adherence(mask, _prior_for_entry(entry, mask.shape, base))
        for entry, mask in zip(manifest.entries, gen_masks)
    ]

    return StatsReport(
        real=blob_stats(real_pool),
        generated=blob_stats(gen_pool),
        adherence=adherence,
        real_areas=real_areas,
        generated_areas=gen_areas,
        real_ratios=real_ratios,
        generated_ratios=gen_ratios,
        counts={
            "real_instances": int(real_areas.size),
            "generated_instances": int(gen_areas.size),
            "entries": len(manifest.entries),
        },
    )


def sign_test_pvalue(wins: int, n_effective: int) -> float:
    """One-sided paired sign test: P[Binomial(n, 1/2) >= wins]."""
    if n_effective == 0:
        return 1.0
    from scipy.stats import binomtest

    return float(binomtest(wins, n_effective, 0.5, alternative="greater").pvalue)


@dataclass
class PlacementComparison:
    rows: list[dict]

    @property
    def greedy_mean(self) -> float:
        return float(np.mean([r["greedy_adherence"] for r in self.rows]))

    @property
    def random_mean(self) -> float:
        return float(np.mean([r["random_adherence"] for r in self.rows]))

    @property
    def p_value(self) -> float:
        diffs = [r["greedy_adherence"] - r["random_adherence"] for r in self.rows]
        wins = sum(1 for d in diffs if d > 0)
        n_eff = sum(1 for d in diffs if d != 0)
        return sign_test_pvalue(wins, n_eff)

    def to_dict(self):
        return {
            "rows": self.rows,
            "greedy_mean_adherence": self.greedy_mean,
            "random_mean_adherence": self.random_mean,
            "sign_test_p": self.p_value,
        }


def compare_placement(
    prior: np.ndarray,
    pool: list[Blob],
    spacing: SpacingDist,
    n_seeds: int,
    master_seed: int = 0,
    attempts: int | None = None,
) -> PlacementComparison:
    """Head-to-head greedy vs prior-weighted random placement over seeds.

    By default the random baseline gets one location proposal per pool blob
    (the naive "sample a spot for each blob, skip it on collision" policy);
    pass ``attempts`` to give it a different budget.
    """
    rows = []
    for s in range(n_seeds):
        greedy_mask, greedy_log = greedy_placement(
            prior, pool, spacing, substream(master_seed, "compare-greedy", s)
        )
        budget = attempts if attempts is not None else len(pool)
        random_mask, random_log = random_weighted_placement(
            prior, pool, spacing, substream(master_seed, "compare-random", s), budget
        )
        rows.append(
            {
                "seed": s,
                "greedy_adherence": prior_adherence(greedy_mask, prior),
                "random_adherence": prior_adherence(random_mask, prior),
                "greedy_placed": count_instances(greedy_mask),
                "random_placed": count_instances(random_mask),
                "draws": budget,
            }
        )
    return PlacementComparison(rows)
