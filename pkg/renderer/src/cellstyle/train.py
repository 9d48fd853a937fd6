"""Decoder training on content/style image directories.

The encoder stays frozen; the decoder minimizes the AdaIN content loss
plus a weighted style-statistics loss. Flips and affine warps augment both
branches, photometric jitter the style branch only. Checkpoints carry the
iteration counter and all hyperparameters, and training resumes from them.
"""
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .augment import content_pipeline, style_pipeline
from .model import StyleTransferModel

log = logging.getLogger("cellstyle")


@dataclass
class TrainConfig:
    iterations: int = 2000  # the full-scale recipe uses 30000
    batch_size: int = 4
    crop_size: int = 96
    learning_rate: float = 1e-3
    style_weight: float = 3.0
    seed: int = 0
    encoder_seed: int = 0


def _load_image_dir(directory) -> list[torch.Tensor]:
    directory = Path(directory)
    paths = sorted(p for p in directory.glob("*.png"))
    images = []
    for p in paths:
        with Image.open(p) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
        images.append(torch.from_numpy(arr).permute(2, 0, 1))
    if not images:
        raise FileNotFoundError(f"no PNG images under {directory}")
    return images


def _random_crop(image: torch.Tensor, size: int, gen: torch.Generator) -> torch.Tensor:
    _, h, w = image.shape
    if h < size or w < size:
        reps = (1, -(-size // h) + 1, -(-size // w) + 1)
        image = image.repeat(*reps)  # tile small images instead of upscaling
        _, h, w = image.shape
    top = int(torch.randint(0, h - size + 1, (), generator=gen))
    left = int(torch.randint(0, w - size + 1, (), generator=gen))
    return image[:, top : top + size, left : left + size]


def _make_batch(images, pipeline, size, batch, gen):
    out = []
    for _ in range(batch):
        idx = int(torch.randint(0, len(images), (), generator=gen))
        out.append(pipeline(_random_crop(images[idx], size, gen), gen))
    return torch.stack(out)


def save_checkpoint(path, model: StyleTransferModel, config: TrainConfig,
                    iteration: int) -> None:
    torch.save(
        {
            "iteration": iteration,
            "decoder_state": model.decoder.state_dict(),
            "encoder_seed": model.encoder_seed,
            "config": asdict(config),
        },
        path,
    )


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = TrainConfig(**payload["config"])
    model = StyleTransferModel(encoder_seed=payload["encoder_seed"])
    model.decoder.load_state_dict(payload["decoder_state"])
    model.eval()
    return model, config, int(payload["iteration"])


def train_style_model(
    content_dir,
    style_dir,
    iterations: int,
    out_path,
    config: TrainConfig | None = None,
    resume: str | None = None,
) -> Path:
    """Train the decoder and write a checkpoint; returns its path.

    With ``resume`` the iteration counter continues from the loaded
    checkpoint and ``iterations`` more steps run on top of it.
    """
    config = config or TrainConfig()
    content_images = _load_image_dir(content_dir)
    style_images = _load_image_dir(style_dir)

    start_iteration = 0
    if resume:
        model, config, start_iteration = load_checkpoint(resume)
    else:
        model = StyleTransferModel(encoder_seed=config.encoder_seed)
    model.train()

    torch.manual_seed(config.seed)
    optimizer = torch.optim.Adam(model.decoder.parameters(), lr=config.learning_rate)
    content_aug = content_pipeline()
    style_aug = style_pipeline()

    end_iteration = start_iteration + iterations
    for it in range(start_iteration, end_iteration):
        gen = torch.Generator().manual_seed(config.seed * 1_000_003 + it)
        content = _make_batch(
            content_images, content_aug, config.crop_size, config.batch_size, gen
        )
        style = _make_batch(
            style_images, style_aug, config.crop_size, config.batch_size, gen
        )
        _, content_loss, style_loss = model.losses(content, style)
        loss = content_loss + config.style_weight * style_loss
        if not torch.isfinite(loss):
            raise RuntimeError(f"non-finite loss at iteration {it}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        if it % 50 == 0 or it == end_iteration - 1:
            log.info(
                "iter %d: loss %.4f (content %.4f, style %.4f)",
                it, loss.item(), content_loss.item(), style_loss.item(),
            )

    model.eval()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_path, model, config, end_iteration)
    log.info("saved checkpoint at iteration %d to %s", end_iteration, out_path)
    return out_path
