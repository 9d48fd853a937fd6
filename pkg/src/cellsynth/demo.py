"""Procedural demo shapes and tiny synthetic "real" datasets.

The shapes are defined by analytic membership tests (no contour machinery),
so they double as independent inputs for tests and let the CLI be exercised
without any annotated corpus: ``python -m cellsynth.demo OUTDIR`` writes a
small set of image/mask pairs.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from scipy import ndimage

from .blobs import Blob
from .dataset_io import save_gray_png, save_mask_png


def _crop_membership(member: np.ndarray) -> Blob:
    rows = np.flatnonzero(member.any(axis=1))
    cols = np.flatnonzero(member.any(axis=0))
    return Blob(member[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1])


def disk_blob(radius: float) -> Blob:
    n = 2 * int(np.ceil(radius)) + 3
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    return _crop_membership((yy - c) ** 2 + (xx - c) ** 2 <= radius**2)


def ellipse_blob(a: float, b: float, angle: float = 0.0) -> Blob:
    n = 2 * int(np.ceil(max(a, b))) + 3
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    dx = xx - c
    dy = yy - c
    u = dx * np.cos(angle) + dy * np.sin(angle)
    v = -dx * np.sin(angle) + dy * np.cos(angle)
    return _crop_membership((u / a) ** 2 + (v / b) ** 2 <= 1.0)


def star_blob(r_outer: float, ratio: float = 0.6, spikes: int = 6, phase: float = 0.0) -> Blob:
    """Star-shaped blob whose radius varies linearly between spike and valley."""
    n = 2 * int(np.ceil(r_outer)) + 3
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    dx = xx - c
    dy = yy - c
    theta = np.arctan2(dy, dx) - phase
    sector = 2.0 * np.pi / spikes
    t = np.mod(theta, sector) / sector
    r_inner = ratio * r_outer
    limit = r_inner + (r_outer - r_inner) * np.abs(2.0 * t - 1.0)
    return _crop_membership(np.hypot(dx, dy) <= limit)


def make_shape_pool(
    n: int,
    rng: np.random.Generator,
    radius_range: tuple[float, float] = (10.0, 18.0),
) -> list[Blob]:
    """Deterministic mixed pool of disks, ellipses, and stars."""
    lo, hi = radius_range
    pool = []
    for _ in range(n):
        kind = rng.integers(3)
        r = float(rng.uniform(lo, hi))
        if kind == 0:
            pool.append(disk_blob(r))
        elif kind == 1:
            squash = float(rng.uniform(0.6, 0.95))
            pool.append(ellipse_blob(r, squash * r, angle=float(rng.uniform(0, np.pi))))
        else:
            pool.append(
                star_blob(
                    r,
                    ratio=float(rng.uniform(0.55, 0.8)),
                    spikes=int(rng.integers(5, 9)),
                    phase=float(rng.uniform(0, np.pi)),
                )
            )
    return pool


def make_demo_pair(
    h: int,
    w: int,
    rng: np.random.Generator,
    cell_spacing: int = 38,
    fill_prob: float = 0.9,
    n_clusters: int = 4,
) -> tuple[np.ndarray, np.ndarray]:
    """A synthetic annotated (image, mask) pair with clustered, jittered cells.

    Cells follow a few round cluster regions (mimicking tissue structure)
    instead of covering the canvas uniformly, so fitted priors have real
    dark areas.
    """
    centers = rng.uniform(0.15, 0.85, size=(n_clusters, 2)) * np.array([h, w])
    radii = rng.uniform(0.16, 0.30, size=n_clusters) * min(h, w)

    def in_cluster(y, x):
        d2 = (centers[:, 0] - y) ** 2 + (centers[:, 1] - x) ** 2
        return bool((d2 <= radii**2).any())

    mask = np.zeros((h, w), dtype=np.int32)
    label = 0
    for gy in range(cell_spacing // 2, h - cell_spacing // 2, cell_spacing):
        for gx in range(cell_spacing // 2, w - cell_spacing // 2, cell_spacing):
            if not in_cluster(gy, gx) or rng.uniform() > fill_prob:
                continue
            blob = make_shape_pool(1, rng, radius_range=(9.0, 15.0))[0]
            bh, bw = blob.footprint.shape
            jitter = cell_spacing // 2 - max(bh, bw) // 2 - 2
            jy = int(rng.integers(-jitter, jitter + 1)) if jitter > 0 else 0
            jx = int(rng.integers(-jitter, jitter + 1)) if jitter > 0 else 0
            top = gy + jy - bh // 2
            left = gx + jx - bw // 2
            if top < 0 or left < 0 or top + bh > h or left + bw > w:
                continue
            window = mask[top : top + bh, left : left + bw]
            if (window[blob.footprint] != 0).any():
                continue
            label += 1
            window[blob.footprint] = label

    image = np.full((h, w), 35.0)
    for lab in range(1, label + 1):
        image[mask == lab] = rng.uniform(120.0, 220.0)
    image += rng.normal(0.0, 6.0, size=(h, w))
    image = ndimage.gaussian_filter(image, sigma=1.0)
    return np.clip(image, 0, 255).astype(np.uint8), mask


def write_demo_dataset(out_dir, n_pairs: int = 2, size: int = 256, seed: int = 7) -> None:
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for j in range(n_pairs):
        image, mask = make_demo_pair(size, size, rng)
        save_gray_png(out_dir / "images" / f"demo_{j:02d}.png", image)
        save_mask_png(out_dir / "masks" / f"demo_{j:02d}.png", mask)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        print("usage: python -m cellsynth.demo OUTDIR [N_PAIRS] [SIZE] [SEED]", file=sys.stderr)
        return 2
    out = argv[0]
    n_pairs = int(argv[1]) if len(argv) > 1 else 2
    size = int(argv[2]) if len(argv) > 2 else 256
    seed = int(argv[3]) if len(argv) > 3 else 7
    write_demo_dataset(out, n_pairs=n_pairs, size=size, seed=seed)
    print(f"wrote {n_pairs} demo pairs under {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
