"""Adaptive-instance-normalization style transfer network.

A compact convolutional encoder (frozen, deterministic init) maps images to
features at three scales; the AdaIN layer re-normalizes the content
bottleneck to the style bottleneck's channel statistics; a trainable
decoder inverts back to an image. Total downsampling factor is 4.
"""
import torch
import torch.nn as nn

DOWNSAMPLE_FACTOR = 4


def _conv(in_ch, out_ch, stride=1):
    return nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=stride, padding=1,
                     padding_mode="reflect")


def _seeded_orthogonal(shape, gen: torch.Generator, gain: float) -> torch.Tensor:
    rows = shape[0]
    cols = 1
    for s in shape[1:]:
        cols *= s
    flat = torch.randn(max(rows, cols), min(rows, cols), generator=gen)
    q, r = torch.linalg.qr(flat)
    q = q * torch.sign(torch.diagonal(r)).unsqueeze(0)  # fix the sign convention
    if rows < cols:
        q = q.T
    return (gain * q[:rows, :cols]).reshape(shape).contiguous()


class Encoder(nn.Module):
    """Frozen feature extractor; exposes activations at three scales."""

    def __init__(self, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.stage1 = nn.Sequential(_conv(3, 32), nn.ReLU(inplace=True))
        self.stage2 = nn.Sequential(_conv(32, 64, stride=2), nn.ReLU(inplace=True))
        self.stage3 = nn.Sequential(_conv(64, 128, stride=2), nn.ReLU(inplace=True))
        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                # orthogonal filters give informative frozen features
                with torch.no_grad():
                    module.weight.copy_(
                        _seeded_orthogonal(module.weight.shape, gen, gain=1.4)
                    )
                    module.bias.zero_()
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x):
        f1 = self.stage1(x)
        f2 = self.stage2(f1)
        f3 = self.stage3(f2)
        return f1, f2, f3


class Decoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.net = nn.Sequential(
            _conv(128, 64), nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            _conv(64, 64), nn.ReLU(inplace=True),
            _conv(64, 32), nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            _conv(32, 32), nn.ReLU(inplace=True),
            _conv(32, 3),
        )

    def forward(self, x):
        return self.net(x)


def channel_stats(features: torch.Tensor, eps: float = 1e-5):
    """Per-sample, per-channel spatial mean and std."""
    mean = features.mean(dim=(2, 3), keepdim=True)
    std = torch.sqrt(features.var(dim=(2, 3), keepdim=True, unbiased=False) + eps)
    return mean, std


def adain(content_feat: torch.Tensor, style_feat: torch.Tensor) -> torch.Tensor:
    """Re-normalize content features to the style features' statistics."""
    c_mean, c_std = channel_stats(content_feat)
    s_mean, s_std = channel_stats(style_feat)
    return (content_feat - c_mean) / c_std * s_std + s_mean


class StyleTransferModel(nn.Module):
    """Encoder + AdaIN + decoder, with the losses of the AdaIN framework."""

    def __init__(self, encoder_seed: int = 0):
        super().__init__()
        self.encoder = Encoder(seed=encoder_seed)
        self.decoder = Decoder()
        self.encoder_seed = encoder_seed

    def forward(self, content: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        _, _, c3 = self.encoder(content)
        _, _, s3 = self.encoder(style)
        target = adain(c3, s3)
        return self.decoder(target)

    def losses(self, content: torch.Tensor, style: torch.Tensor):
        """Content loss at the bottleneck against the AdaIN target; style
        loss matches channel statistics at every encoder stage."""
        _, _, c3 = self.encoder(content)
        style_feats = self.encoder(style)
        target = adain(c3, style_feats[2])
        output = self.decoder(target)

        out_feats = self.encoder(output)
        content_loss = nn.functional.mse_loss(out_feats[2], target)
        style_loss = output.new_zeros(())
        for out_f, sty_f in zip(out_feats, style_feats):
            om, os = channel_stats(out_f)
            sm, ss = channel_stats(sty_f)
            style_loss = style_loss + nn.functional.mse_loss(om, sm)
            style_loss = style_loss + nn.functional.mse_loss(os, ss)
        return output, content_loss, style_loss
