import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def make_content(rng, size=96, n=6):
    """Binary content image: bright disks on black, like a flattened mask."""
    mask = np.zeros((size, size), np.uint8)
    for _ in range(n):
        r = int(rng.integers(6, 14))
        cy, cx = (int(v) for v in rng.integers(r, size - r, 2))
        yy, xx = np.mgrid[0:size, 0:size]
        mask[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = 255
    return mask


def make_style(rng, size=96, n=6, brightness=180):
    """Noisy texture tile with bright round cells on a dark background."""
    img = rng.normal(40.0, 8.0, (size, size))
    for _ in range(n):
        r = int(rng.integers(6, 14))
        cy, cx = (int(v) for v in rng.integers(r, size - r, 2))
        yy, xx = np.mgrid[0:size, 0:size]
        img[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = brightness + rng.normal(0, 10)
    kernel = np.array([1.0, 2.0, 1.0])

    def blur1d(a, axis):
        padded = np.pad(a, [(1, 1) if ax == axis else (0, 0) for ax in range(2)], mode="edge")
        return np.apply_along_axis(lambda v: np.convolve(v, kernel / 4.0, mode="valid"), axis, padded)

    img = blur1d(blur1d(img, 0), 1)
    return np.clip(img, 0, 255).astype(np.uint8)


@pytest.fixture(scope="session")
def train_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("traindata")
    rng = np.random.default_rng(0)
    (root / "content").mkdir()
    (root / "style").mkdir()
    for i in range(6):
        Image.fromarray(make_content(rng)).save(root / "content" / f"c{i}.png")
        bright = int(rng.uniform(120, 230))
        Image.fromarray(make_style(rng, brightness=bright)).save(root / "style" / f"s{i}.png")
    return root / "content", root / "style"


@pytest.fixture(scope="session")
def trained_checkpoint(tmp_path_factory, train_dirs):
    """A decoder trained long enough for the foreground-overlap floor."""
    from cellstyle import TrainConfig, train_style_model

    content, style = train_dirs
    path = tmp_path_factory.mktemp("ckpt") / "model.pt"
    train_style_model(
        content, style, 800, path,
        config=TrainConfig(crop_size=64, batch_size=4, seed=1, style_weight=3.0),
    )
    return path


def write_manifest_tree(root: Path, n_entries=3, size=64, rng=None):
    """Fabricate a generator-style dataset tree per the manifest schema."""
    rng = rng or np.random.default_rng(9)
    for sub in ("content", "tiles", "masks", "logs"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n_entries):
        content = make_content(rng, size=size)
        Image.fromarray(content).save(root / "content" / f"content_{i:04d}.png")
        Image.fromarray((content > 0).astype(np.uint16)).save(root / "masks" / f"mask_{i:04d}.png")
        Image.fromarray(make_style(rng, size=size)).save(root / "tiles" / f"tile_{i:04d}.png")
        (root / "logs" / f"placement_{i:04d}.jsonl").write_text("")
        entries.append(
            {
                "generated_mask_path": f"masks/mask_{i:04d}.png",
                "content_image_path": f"content/content_{i:04d}.png",
                "reference_tile_path": f"tiles/tile_{i:04d}.png",
                "seed": i,
                "prior_params": {"type": "perlin", "base_frequency": 3.0, "octaves": 1,
                                 "persistence": 0.5, "threshold_shift": 0.0, "seed": i},
                "blob_provenance_path": f"logs/placement_{i:04d}.jsonl",
            }
        )
    manifest = {
        "schema_version": 1,
        "counts": {"real_images": 1, "generated_images": n_entries,
                   "real_blobs": 10, "generated_blobs": 20},
        "master_seed": 0,
        "blob_pool_dir": "blobs",
        "entries": entries,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return root / "manifest.json"
