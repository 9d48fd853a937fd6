"""Density priors and spacing statistics for blob placement.

The placement prior P is an h x w map in [0, 1] read as the relative
likelihood of a blob covering each location. It is realized as fractal
gradient (Perlin) noise, either with expert-chosen parameters or fitted to
blurred real masks. The spacing distribution S is the empirical set of
boundary-to-boundary nearest-neighbor gaps between instances in real masks.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError, InsufficientInputError

DEFAULT_BLUR_SIGMA = 8.0
HISTOGRAM_BINS = 32

# 8 lattice gradient directions; hashed permutation picks one per corner.
_GRADIENTS = np.array(
    [(1, 1), (-1, 1), (1, -1), (-1, -1), (1, 0), (-1, 0), (0, 1), (0, -1)],
    dtype=np.float64,
)


@dataclass(frozen=True)
class PerlinParams:
    """Parameters of a fractal gradient-noise prior realization."""

    base_frequency: float
    octaves: int
    persistence: float
    threshold_shift: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.base_frequency <= 0:
            raise ValueError("base_frequency must be positive")
        if self.octaves < 1:
            raise ValueError("octaves must be at least 1")
        if not 0.0 < self.persistence <= 1.0:
            raise ValueError("persistence must be in (0, 1]")

    def to_dict(self):
        return {
            "base_frequency": float(self.base_frequency),
            "octaves": int(self.octaves),
            "persistence": float(self.persistence),
            "threshold_shift": float(self.threshold_shift),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            base_frequency=d["base_frequency"],
            octaves=d["octaves"],
            persistence=d["persistence"],
            threshold_shift=d.get("threshold_shift", 0.0),
            seed=d.get("seed", 0),
        )

    def with_seed(self, seed: int) -> "PerlinParams":
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class SpacingDist:
    """Empirical distribution of inter-blob gaps, stored as sorted samples."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=np.float64).ravel())
        if s.size == 0:
            raise ValueError("spacing distribution needs at least one sample")
        if (s < 0).any() or not np.isfinite(s).all():
            raise ValueError("spacing samples must be finite and nonnegative")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return int(self.samples.size)


def permutation_table(seed: int) -> np.ndarray:
    """Doubled 256-entry permutation table derived from the seed."""
    perm = np.random.default_rng(seed).permutation(256)
    return np.concatenate([perm, perm]).astype(np.int64)


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def gradient_noise(x: np.ndarray, y: np.ndarray, table: np.ndarray) -> np.ndarray:
    """One layer of 2D lattice gradient noise; exactly 0 at integer coords."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xi = np.floor(x).astype(np.int64)
    yi = np.floor(y).astype(np.int64)
    xf = x - xi
    yf = y - yi
    xi &= 255
    yi &= 255

    def corner_dot(ix, iy, dx, dy):
        h = table[table[ix] + iy] & 7
        g = _GRADIENTS[h]
        return g[..., 0] * dx + g[..., 1] * dy

    n00 = corner_dot(xi, yi, xf, yf)
    n10 = corner_dot(xi + 1, yi, xf - 1.0, yf)
    n01 = corner_dot(xi, yi + 1, xf, yf - 1.0)
    n11 = corner_dot(xi + 1, yi + 1, xf - 1.0, yf - 1.0)

    u = _fade(xf)
    v = _fade(yf)
    n0 = n00 + u * (n10 - n00)
    n1 = n01 + u * (n11 - n01)
    return n0 + v * (n1 - n0)


def perlin2d(h: int, w: int, params: PerlinParams) -> np.ndarray:
    """Fractal gradient-noise prior map of shape (h, w) with values in [0, 1].

    Octave o contributes amplitude persistence**o at frequency
    base_frequency * 2**o cycles per image side; the normalized sum is
    mapped through ``0.5 + v + threshold_shift`` and clamped, so negative
    shifts carve genuine zero-density regions. Deterministic for a fixed
    seed.
    """
    if h < 1 or w < 1:
        raise ValueError("prior dimensions must be at least 1x1")
    table = permutation_table(params.seed)
    rows = np.arange(h, dtype=np.float64)[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]
    acc = np.zeros((h, w), dtype=np.float64)
    amp_total = 0.0
    for o in range(params.octaves):
        freq = params.base_frequency * (2.0**o)
        amp = params.persistence**o
        acc += amp * gradient_noise(cols * (freq / w), rows * (freq / h), table)
        amp_total += amp
    values = 0.5 + acc / amp_total + params.threshold_shift
    return np.clip(values, 0.0, 1.0)


def validate_prior(prior: np.ndarray) -> np.ndarray:
    """Check a prior map is 2D, finite, and within [0, 1]; returns it as float64."""
    p = np.asarray(prior, dtype=np.float64)
    if p.ndim != 2 or p.size == 0:
        raise ValueError("prior map must be a non-empty 2D array")
    if not np.isfinite(p).all() or p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("prior map values must lie in [0, 1]")
    return p


def blurred_foreground(mask: np.ndarray, blur_sigma: float = DEFAULT_BLUR_SIGMA) -> np.ndarray:
    """Gaussian-blurred binary foreground of a labeled mask, in [0, 1]."""
    fg = np.asarray(mask) > 0
    return ndimage.gaussian_filter(fg.astype(np.float64), sigma=blur_sigma)


def _value_histogram(values: np.ndarray) -> np.ndarray:
    hist, _ = np.histogram(values, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return hist / values.size


def default_candidate_grid(seed: int = 0) -> list[PerlinParams]:
    """Small deterministic parameter grid used when fitting the prior."""
    grid = []
    for base_frequency in (2.0, 3.0, 4.0, 6.0, 8.0):
        for octaves in (1, 2, 3):
            for shift in (-0.3, -0.15, 0.0, 0.15):
                grid.append(
                    PerlinParams(
                        base_frequency=base_frequency,
                        octaves=octaves,
                        persistence=0.5,
                        threshold_shift=shift,
                        seed=seed,
                    )
                )
    return grid


def score_candidate(
    candidate: PerlinParams,
    blurred_masks: list[np.ndarray],
    maps_cache: dict | None = None,
) -> float:
    """Dissimilarity between a candidate realization and blurred real masks.

    Per mask: absolute difference of mean coverage plus one minus the
    intersection of the 32-bin value histograms; summed over masks.
    """
    total = 0.0
    for blur in blurred_masks:
        key = (candidate, blur.shape)
        if maps_cache is not None and key in maps_cache:
            cand_map = maps_cache[key]
        else:
            cand_map = perlin2d(blur.shape[0], blur.shape[1], candidate)
            if maps_cache is not None:
                maps_cache[key] = cand_map
        coverage = abs(float(blur.mean()) - float(cand_map.mean()))
        hist_overlap = float(
            np.minimum(_value_histogram(blur), _value_histogram(cand_map)).sum()
        )
        total += coverage + (1.0 - hist_overlap)
    return total


def fit_prior(
    real_masks: list[np.ndarray],
    candidate_grid: list[PerlinParams] | None = None,
    blur_sigma: float = DEFAULT_BLUR_SIGMA,
) -> PerlinParams:
    """Pick the candidate whose realization best matches the blurred masks.

    Ties in score break toward lower octaves, then lower base frequency,
    then grid order. Raises EmptyMaskError if any mask has no foreground.
    """
    if not real_masks:
        raise InsufficientInputError("fit_prior needs at least one real mask")
    if candidate_grid is None:
        candidate_grid = default_candidate_grid()
    if not candidate_grid:
        raise InsufficientInputError("fit_prior needs a nonempty candidate grid")

    blurred = []
    for i, mask in enumerate(real_masks):
        if not (np.asarray(mask) > 0).any():
            raise EmptyMaskError(f"mask {i} has no foreground to fit a prior against")
        blurred.append(blurred_foreground(mask, blur_sigma))

    cache: dict = {}
    scored = [
        (score_candidate(cand, blurred, cache), cand.octaves, cand.base_frequency, i)
        for i, cand in enumerate(candidate_grid)
    ]
    best = min(scored)
    return candidate_grid[best[3]]


def fit_spacing(real_masks: list[np.ndarray]) -> SpacingDist:
    """Empirical spacing from real masks.

    For every instance: the minimum boundary-to-boundary gap to any other
    instance in the same mask (touching instances contribute 0). Masks with
    fewer than two instances are skipped; at least one mask must have two.
    """
    samples = []
    for mask in real_masks:
        mask = np.asarray(mask)
        labels = np.unique(mask)
        labels = labels[labels != 0]
        if labels.size < 2:
            continue
        foreground = mask != 0
        for lab in labels:
            dist = ndimage.distance_transform_edt(mask != lab)
            others = foreground & (mask != lab)
            gap = float(dist[others].min()) - 1.0
            samples.append(max(gap, 0.0))
    if not samples:
        raise InsufficientInputError(
            "spacing estimation needs at least one mask with two or more instances"
        )
    return SpacingDist(np.array(samples))


def sample_spacing(s: SpacingDist, rng: np.random.Generator) -> float:
    """Draw one spacing offset by inverse-CDF with linear interpolation."""
    x = s.samples
    if x.size == 1:
        return float(x[0])
    u = float(rng.uniform())
    return float(np.interp(u, np.linspace(0.0, 1.0, x.size), x))
