"""Inference: render content images in the style of reference tiles.

Single jobs preserve the content's spatial dimensions exactly (inputs not
divisible by the network's downsampling factor are reflection-padded and
cropped back). The manifest driver stylizes every entry, skips outputs
that already exist unless forced, keeps going past per-entry failures, and
records new image paths back into the manifest.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .manifest import read_manifest, write_manifest
from .model import DOWNSAMPLE_FACTOR, StyleTransferModel

log = logging.getLogger("cellstyle")


@dataclass
class StyleJob:
    """One stylization task; paths plus optional declared content dims and
    the identifier of the checkpoint meant to render it (provenance only)."""

    content_path: str
    style_path: str
    output_path: str
    expected_size: tuple[int, int] | None = None  # (height, width)
    checkpoint: str | None = None


@dataclass
class BatchResult:
    outputs: list[str] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)  # (entry, reason)
    skipped: list[str] = field(default_factory=list)


def _load_rgb(path) -> torch.Tensor:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image not found: {path}")
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


def stylize_tensor(
    model: StyleTransferModel, content: torch.Tensor, style: torch.Tensor
) -> torch.Tensor:
    """Stylize a (3, h, w) content tensor; output keeps (h, w) exactly."""
    _, h, w = content.shape
    pad_h = (-h) % DOWNSAMPLE_FACTOR
    pad_w = (-w) % DOWNSAMPLE_FACTOR
    batch = content.unsqueeze(0)
    if pad_h or pad_w:
        batch = F.pad(batch, (0, pad_w, 0, pad_h), mode="reflect")
    with torch.no_grad():
        out = model(batch, style.unsqueeze(0))
    return out[0, :, :h, :w].clamp(0.0, 1.0)


def stylize(model: StyleTransferModel, job: StyleJob) -> np.ndarray:
    """Run one job and write its output PNG; returns the image array."""
    content = _load_rgb(job.content_path)
    if job.expected_size is not None and tuple(content.shape[1:]) != tuple(job.expected_size):
        raise ValueError(
            f"content {job.content_path} is {tuple(content.shape[1:])}, "
            f"expected {tuple(job.expected_size)}"
        )
    style = _load_rgb(job.style_path)
    out = stylize_tensor(model, content, style)
    image = (out.permute(1, 2, 0).numpy() * 255.0).round().astype(np.uint8)
    out_path = Path(job.output_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(out_path, format="PNG")
    return image


def run_manifest(
    manifest_path,
    model: StyleTransferModel,
    force: bool = False,
    checkpoint: str | None = None,
) -> BatchResult:
    """Stylize every manifest entry into images/ beside the manifest.

    Existing outputs are skipped unless ``force``. Per-entry failures are
    recorded and the batch continues; successful entries get their
    ``image_path`` written back into the manifest.
    """
    manifest_path = Path(manifest_path)
    data = read_manifest(manifest_path)
    base = manifest_path.parent
    (base / "images").mkdir(exist_ok=True)

    result = BatchResult()
    for i, entry in enumerate(data["entries"]):
        rel_out = f"images/image_{i:04d}.png"
        out_path = base / rel_out
        if out_path.exists() and not force:
            entry["image_path"] = rel_out
            result.skipped.append(rel_out)
            continue
        job = StyleJob(
            content_path=str(base / entry["content_image_path"]),
            style_path=str(base / entry["reference_tile_path"]),
            output_path=str(out_path),
            checkpoint=checkpoint,
        )
        try:
            stylize(model, job)
        except (FileNotFoundError, ValueError, OSError) as exc:
            log.warning("entry %d failed: %s", i, exc)
            result.failures.append((entry["content_image_path"], str(exc)))
            continue
        entry["image_path"] = rel_out
        result.outputs.append(rel_out)

    write_manifest(manifest_path, data)
    log.info(
        "stylized %d entries (%d skipped, %d failed)",
        len(result.outputs), len(result.skipped), len(result.failures),
    )
    return result
