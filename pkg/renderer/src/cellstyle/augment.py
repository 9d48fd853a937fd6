"""Training-time augmentations with introspectable branch pipelines.

The content branch gets geometric transforms only; the style branch gets
the same geometry plus photometric jitter. Each transform carries an
``is_photometric`` flag so tests (and curious users) can inspect what is
attached where.
"""
import math

import torch
import torch.nn.functional as F


class RandomFlips:
    """Horizontal/vertical flips, each with probability 1/2."""

    name = "random_flips"
    is_photometric = False

    def __call__(self, image: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
        if torch.rand((), generator=gen) < 0.5:
            image = torch.flip(image, dims=[-1])
        if torch.rand((), generator=gen) < 0.5:
            image = torch.flip(image, dims=[-2])
        return image


class RandomAffine:
    """Small rotation, translation, and scale via grid resampling."""

    name = "random_affine"
    is_photometric = False

    def __init__(self, max_degrees=15.0, max_translate=0.05, scale_range=(0.9, 1.1)):
        self.max_degrees = max_degrees
        self.max_translate = max_translate
        self.scale_range = scale_range

    def __call__(self, image: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
        def u(lo, hi):
            return float(torch.empty(()).uniform_(lo, hi, generator=gen))

        angle = math.radians(u(-self.max_degrees, self.max_degrees))
        scale = u(*self.scale_range)
        tx = u(-self.max_translate, self.max_translate)
        ty = u(-self.max_translate, self.max_translate)
        cos, sin = math.cos(angle) / scale, math.sin(angle) / scale
        theta = torch.tensor([[cos, -sin, tx], [sin, cos, ty]], dtype=image.dtype)
        batch = image.unsqueeze(0)
        grid = F.affine_grid(theta.unsqueeze(0), batch.shape, align_corners=False)
        out = F.grid_sample(
            batch, grid, mode="bilinear", padding_mode="reflection", align_corners=False
        )
        return out.squeeze(0)


class PhotometricJitter:
    """Brightness, contrast, and gamma jitter; pixel values stay in [0, 1]."""

    name = "photometric_jitter"
    is_photometric = True

    def __init__(self, brightness=0.15, contrast=0.25, gamma=(0.8, 1.25)):
        self.brightness = brightness
        self.contrast = contrast
        self.gamma = gamma

    def __call__(self, image: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
        def u(lo, hi):
            return float(torch.empty(()).uniform_(lo, hi, generator=gen))

        image = image.clamp(0.0, 1.0) ** u(*self.gamma)
        mean = image.mean()
        image = (image - mean) * u(1 - self.contrast, 1 + self.contrast) + mean
        image = image + u(-self.brightness, self.brightness)
        return image.clamp(0.0, 1.0)


class AugmentationPipeline:
    """Ordered list of transforms applied with a shared torch.Generator."""

    def __init__(self, transforms):
        self.transforms = list(transforms)

    def __call__(self, image: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
        for transform in self.transforms:
            image = transform(image, gen)
        return image

    @property
    def has_photometric(self) -> bool:
        return any(t.is_photometric for t in self.transforms)


def content_pipeline() -> AugmentationPipeline:
    """Flips and affine only: content geometry may move, never recolor."""
    return AugmentationPipeline([RandomFlips(), RandomAffine()])


def style_pipeline() -> AugmentationPipeline:
    """Flips, affine, and photometric jitter for the style branch."""
    return AugmentationPipeline([RandomFlips(), RandomAffine(), PhotometricJitter()])
