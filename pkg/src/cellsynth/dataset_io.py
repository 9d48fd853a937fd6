"""File formats and dataset bookkeeping.

Masks travel as 16-bit single-channel PNGs holding instance labels, content
images as 8-bit grayscale PNGs, blob pools as footprint PNGs plus a JSON
index, placement logs as JSON lines, and the dataset as a versioned
manifest whose paths are relative to the manifest file.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .blobs import Blob, BlobProvenance
from .errors import DimensionMismatchError, FileFormatError
from .placement import PlacementLog, PlacementRecord
from .priors import PerlinParams, SpacingDist

SCHEMA_VERSION = 1

_INTEGER_MODES = {"L", "I", "I;16", "I;16B", "P", "1"}


@dataclass(frozen=True)
class BlobStats:
    """Median and inter-quartile range of blob area and aspect ratio."""

    median_area: float
    iqr_area: float
    median_aspect_ratio: float
    iqr_aspect_ratio: float

    def to_dict(self):
        return {
            "median_area": self.median_area,
            "iqr_area": self.iqr_area,
            "median_aspect_ratio": self.median_aspect_ratio,
            "iqr_aspect_ratio": self.iqr_aspect_ratio,
        }


@dataclass
class ManifestEntry:
    generated_mask_path: str
    content_image_path: str
    reference_tile_path: str
    seed: int
    prior_params: dict
    blob_provenance_path: str
    image_path: str | None = None  # filled in by the downstream renderer

    def to_dict(self):
        d = {
            "generated_mask_path": self.generated_mask_path,
            "content_image_path": self.content_image_path,
            "reference_tile_path": self.reference_tile_path,
            "seed": int(self.seed),
            "prior_params": self.prior_params,
            "blob_provenance_path": self.blob_provenance_path,
        }
        if self.image_path is not None:
            d["image_path"] = self.image_path
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            generated_mask_path=d["generated_mask_path"],
            content_image_path=d["content_image_path"],
            reference_tile_path=d["reference_tile_path"],
            seed=int(d["seed"]),
            prior_params=d["prior_params"],
            blob_provenance_path=d["blob_provenance_path"],
            image_path=d.get("image_path"),
        )


@dataclass
class DatasetManifest:
    """Pairing of generated masks, content images, and reference style tiles."""

    entries: list[ManifestEntry] = field(default_factory=list)
    real_images: int = 0  # J
    generated_images: int = 0  # N
    real_blobs: int = 0  # K
    generated_blobs: int = 0  # L
    master_seed: int = 0
    blob_pool_dir: str = "blobs"
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "counts": {
                "real_images": self.real_images,
                "generated_images": self.generated_images,
                "real_blobs": self.real_blobs,
                "generated_blobs": self.generated_blobs,
            },
            "master_seed": int(self.master_seed),
            "blob_pool_dir": self.blob_pool_dir,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d):
        counts = d.get("counts", {})
        return cls(
            entries=[ManifestEntry.from_dict(e) for e in d.get("entries", [])],
            real_images=int(counts.get("real_images", 0)),
            generated_images=int(counts.get("generated_images", 0)),
            real_blobs=int(counts.get("real_blobs", 0)),
            generated_blobs=int(counts.get("generated_blobs", 0)),
            master_seed=int(d.get("master_seed", 0)),
            blob_pool_dir=d.get("blob_pool_dir", "blobs"),
            schema_version=int(d.get("schema_version", SCHEMA_VERSION)),
        )


def save_mask_png(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.max(initial=0) > 65535:
        raise FileFormatError("more than 65535 instances cannot be stored as 16-bit PNG")
    if (labels < 0).any():
        raise FileFormatError("mask labels must be nonnegative")
    Image.fromarray(labels.astype(np.uint16)).save(path, format="PNG")


def load_mask_png(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"mask file not found: {path}")
    with Image.open(path) as im:
        if im.mode not in _INTEGER_MODES:
            raise FileFormatError(
                f"mask {path} has mode {im.mode}; expected a single-channel integer image"
            )
        arr = np.asarray(im)
    return arr.astype(np.int32)


def save_gray_png(path, values: np.ndarray) -> None:
    Image.fromarray(np.asarray(values, dtype=np.uint8)).save(path, format="PNG")


def load_image(path) -> np.ndarray:
    """Load an 8-bit grayscale or RGB image as a numpy array."""
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"image file not found: {path}")
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
            return np.asarray(im)
    except FileFormatError:
        raise
    except Exception as exc:
        raise FileFormatError(f"cannot decode image {path}: {exc}") from exc


def load_annotated_pair(image_path, mask_path) -> tuple[np.ndarray, np.ndarray]:
    """Load a real (image, mask) pair, checking dimensions and label integrity."""
    image = load_image(image_path)
    mask = load_mask_png(mask_path)
    if image.shape[:2] != mask.shape:
        raise DimensionMismatchError(
            f"image {image_path} is {image.shape[:2]} but mask {mask_path} is {mask.shape}"
        )
    return image, mask


def load_prior_png(path) -> np.ndarray:
    """Load an expert-supplied grayscale prior, rescaled to [0, 1] by bit depth."""
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"prior file not found: {path}")
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        if im.mode in ("I", "I;16", "I;16B"):
            return np.asarray(im, dtype=np.float64) / 65535.0
        raise FileFormatError(
            f"prior {path} has mode {im.mode}; expected 8- or 16-bit grayscale"
        )


def flatten(mask: np.ndarray) -> np.ndarray:
    """Binary content image of a mask: foreground 255, background 0."""
    return np.where(np.asarray(mask) > 0, 255, 0).astype(np.uint8)


def tile_image(image: np.ndarray, tile_size: int) -> list[np.ndarray]:
    """Non-overlapping grid tiles in row-major order; partial border tiles dropped."""
    image = np.asarray(image)
    h, w = image.shape[:2]
    if tile_size < 1 or tile_size > min(h, w):
        raise ValueError(f"tile_size must be in [1, {min(h, w)}] for a {h}x{w} image")
    return [
        image[r : r + tile_size, c : c + tile_size]
        for r in range(0, h - tile_size + 1, tile_size)
        for c in range(0, w - tile_size + 1, tile_size)
    ]


def _tile_index_of(coord: float, tile_size: int) -> int:
    # A centroid exactly on a tile border belongs to the lower-index tile.
    return max(int(math.ceil(coord / tile_size)) - 1, 0)


def tiles_with_counts(
    image: np.ndarray, mask: np.ndarray, tile_size: int
) -> list[tuple[np.ndarray, int]]:
    """Grid tiles of the image paired with the mask's per-tile blob count.

    A blob counts for the tile its centroid falls in (row-major, border
    centroids go to the lower-index tile); centroids over discarded partial
    border tiles count for no tile.
    """
    image = np.asarray(image)
    mask = np.asarray(mask)
    if image.shape[:2] != mask.shape:
        raise DimensionMismatchError("image and mask dimensions must match for tiling")
    tiles = tile_image(image, tile_size)
    h, w = mask.shape
    n_rows = h // tile_size
    n_cols = w // tile_size
    counts = [0] * (n_rows * n_cols)
    labels = np.unique(mask)
    labels = labels[labels != 0]
    for lab in labels:
        rr, cc = np.nonzero(mask == lab)
        tr = _tile_index_of(float(rr.mean()), tile_size)
        tc = _tile_index_of(float(cc.mean()), tile_size)
        if tr < n_rows and tc < n_cols:
            counts[tr * n_cols + tc] += 1
    return list(zip(tiles, counts))


def select_reference_index(counts: list[int], n_instances: int) -> int:
    """Index of the count closest to n_instances; ties go to the lower index."""
    if not counts:
        raise ValueError("cannot select a reference tile from an empty list")
    best = 0
    for i, c in enumerate(counts):
        if abs(c - n_instances) < abs(counts[best] - n_instances):
            best = i
    return best


def select_reference(
    tiles_with_count: list[tuple[np.ndarray, int]], mask: np.ndarray
) -> np.ndarray:
    """The tile whose blob count is closest to the mask's instance count."""
    labels = np.unique(np.asarray(mask))
    n = int((labels != 0).sum())
    idx = select_reference_index([c for _, c in tiles_with_count], n)
    return tiles_with_count[idx][0]


def aspect_ratio(footprint: np.ndarray) -> float:
    """Major/minor axis ratio of the footprint's second-moment ellipse.

    Pixels are treated as unit squares (each contributes 1/12 variance), so
    a single pixel has ratio exactly 1 and thin shapes stay finite.
    """
    rr, cc = np.nonzero(np.asarray(footprint, dtype=bool))
    if rr.size == 0:
        raise ValueError("empty footprint")
    r = rr - rr.mean()
    c = cc - cc.mean()
    mrr = float((r * r).mean()) + 1.0 / 12.0
    mcc = float((c * c).mean()) + 1.0 / 12.0
    mrc = float((r * c).mean())
    half_trace = 0.5 * (mrr + mcc)
    det_root = math.sqrt(max(0.25 * (mrr - mcc) ** 2 + mrc * mrc, 0.0))
    lam_max = half_trace + det_root
    lam_min = max(half_trace - det_root, 1e-12)
    return math.sqrt(lam_max / lam_min)


def blob_stats(blobs: list[Blob]) -> BlobStats:
    """Median and IQR of area and aspect ratio over a pool of blobs."""
    if not blobs:
        raise ValueError("blob_stats needs at least one blob")
    areas = np.array([b.area for b in blobs], dtype=np.float64)
    ratios = np.array([aspect_ratio(b.footprint) for b in blobs])
    q1a, med_a, q3a = np.percentile(areas, [25, 50, 75])
    q1r, med_r, q3r = np.percentile(ratios, [25, 50, 75])
    return BlobStats(
        median_area=float(med_a),
        iqr_area=float(q3a - q1a),
        median_aspect_ratio=float(med_r),
        iqr_aspect_ratio=float(q3r - q1r),
    )


def save_blob_pool(directory, blobs: list[Blob]) -> None:
    """Serialize a pool as single-channel footprint PNGs plus a JSON index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = []
    for i, blob in enumerate(blobs):
        name = f"blob_{i:05d}.png"
        save_gray_png(directory / name, blob.footprint.astype(np.uint8) * 255)
        entry = {
            "id": i,
            "path": name,
            "offset": [int(blob.offset[0]), int(blob.offset[1])],
            "area": blob.area,
        }
        if blob.provenance is not None:
            entry["provenance"] = blob.provenance.to_dict()
        index.append(entry)
    (directory / "index.json").write_text(
        json.dumps({"schema_version": SCHEMA_VERSION, "blobs": index}, indent=2)
    )


def load_blob_pool(directory) -> list[Blob]:
    directory = Path(directory)
    index_path = directory / "index.json"
    if not index_path.exists():
        raise FileFormatError(f"blob pool index not found: {index_path}")
    index = json.loads(index_path.read_text())
    blobs = []
    for entry in sorted(index["blobs"], key=lambda e: e["id"]):
        with Image.open(directory / entry["path"]) as im:
            fp = np.asarray(im) > 0
        prov = entry.get("provenance")
        blobs.append(
            Blob(
                fp,
                offset=tuple(entry["offset"]),
                provenance=BlobProvenance.from_dict(prov) if prov else None,
            )
        )
    return blobs


def save_perlin_params(path, params: PerlinParams) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2))


def load_perlin_params(path) -> PerlinParams:
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"prior parameter file not found: {path}")
    try:
        return PerlinParams.from_dict(json.loads(path.read_text()))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"cannot parse prior parameters from {path}: {exc}") from exc


def save_spacing(path, spacing: SpacingDist) -> None:
    Path(path).write_text(
        json.dumps({"samples": [float(v) for v in spacing.samples]}, indent=2)
    )


def load_spacing(path) -> SpacingDist:
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"spacing file not found: {path}")
    try:
        return SpacingDist(np.array(json.loads(path.read_text())["samples"]))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"cannot parse spacing samples from {path}: {exc}") from exc


def save_placement_log(path, log: PlacementLog) -> None:
    with open(path, "w") as fh:
        for record in log.records:
            fh.write(json.dumps(record.to_dict()) + "\n")


def load_placement_log(path) -> PlacementLog:
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"placement log not found: {path}")
    records = [
        PlacementRecord.from_dict(json.loads(line))
        for line in path.read_text().splitlines()
        if line.strip()
    ]
    return PlacementLog(records)


def write_manifest(path, manifest: DatasetManifest) -> None:
    """Write the manifest; every referenced path must already exist."""
    path = Path(path)
    base = path.parent
    for entry in manifest.entries:
        for rel in (
            entry.generated_mask_path,
            entry.content_image_path,
            entry.reference_tile_path,
            entry.blob_provenance_path,
        ):
            if not (base / rel).exists():
                raise FileFormatError(f"manifest references missing file: {rel}")
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True))


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"cannot parse manifest {path}: {exc}") from exc
    if int(data.get("schema_version", -1)) != SCHEMA_VERSION:
        raise FileFormatError(
            f"unsupported manifest schema_version {data.get('schema_version')}"
        )
    return DatasetManifest.from_dict(data)
