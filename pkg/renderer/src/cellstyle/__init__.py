"""cellstyle: style-transfer rendering of generated cell masks.

Consumes the generator's dataset manifest (content images + reference
tiles), trains an adaptive-instance-normalization decoder, and writes one
realistic image per entry while preserving the mask's blob support.
"""

from .augment import (
    AugmentationPipeline,
    PhotometricJitter,
    RandomAffine,
    RandomFlips,
    content_pipeline,
    style_pipeline,
)
from .manifest import ManifestError, read_manifest, write_manifest
from .metrics import foreground_overlap, otsu_threshold
from .model import StyleTransferModel, adain, channel_stats
from .stylize import BatchResult, StyleJob, run_manifest, stylize, stylize_tensor
from .train import TrainConfig, load_checkpoint, save_checkpoint, train_style_model

__version__ = "0.1.0"
