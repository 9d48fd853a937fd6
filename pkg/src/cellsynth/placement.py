"""Greedy constrained placement of blobs into a labeled mask.

Locations are drawn from the prior restricted to still-available pixels;
each placed blob claims its footprint plus an exclusion disk whose radius is
drawn from the spacing distribution. Placement stops at the first sampled
location where no pool blob fits, when available mass vanishes, or when the
pool empties.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .blobs import Blob
from .priors import DEFAULT_BLUR_SIGMA, SpacingDist, sample_spacing

MASS_EPSILON = 1e-12


@dataclass(frozen=True)
class PlacementRecord:
    """One placed blob: where it was sampled and which pool entry it used."""

    label: int
    y: int
    x: int
    z: float
    blob_id: int  # index into the pool as passed by the caller
    pool_index: int  # position in this run's scan order when found

    def to_dict(self):
        return {
            "label": self.label,
            "y": self.y,
            "x": self.x,
            "z": self.z,
            "blob_id": self.blob_id,
            "pool_index": self.pool_index,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            label=int(d["label"]),
            y=int(d["y"]),
            x=int(d["x"]),
            z=float(d["z"]),
            blob_id=int(d["blob_id"]),
            pool_index=int(d["pool_index"]),
        )


@dataclass
class PlacementLog:
    records: list[PlacementRecord] = field(default_factory=list)
    draws: int = 0  # locations sampled, including ones that hosted nothing

    def __len__(self) -> int:
        return len(self.records)


def _anchor(blob: Blob, y: int, x: int) -> tuple[int, int]:
    """Top-left corner of the footprint when its box center sits at (y, x)."""
    bh, bw = blob.footprint.shape
    return y - bh // 2, x - bw // 2


def can_host(available: np.ndarray, blob: Blob, y: int, x: int) -> bool:
    """True iff the blob, centered at (y, x), is in bounds and unobstructed."""
    h, w = available.shape
    bh, bw = blob.footprint.shape
    top, left = _anchor(blob, y, x)
    if top < 0 or left < 0 or top + bh > h or left + bw > w:
        return False
    window = available[top : top + bh, left : left + bw]
    return bool(window[blob.footprint].all())


def update_available(
    available: np.ndarray, blob: Blob, y: int, x: int, z: float
) -> np.ndarray:
    """Availability after stamping a blob at (y, x) with exclusion radius z.

    Zeroes the footprint pixels and every pixel within Euclidean distance z
    of (y, x) (disk clipped at the borders); all other bits are unchanged.
    """
    out = available.copy()
    h, w = out.shape
    bh, bw = blob.footprint.shape
    top, left = _anchor(blob, y, x)
    out[top : top + bh, left : left + bw][blob.footprint] = False

    r = int(np.ceil(z))
    r0, r1 = max(0, y - r), min(h - 1, y + r)
    c0, c1 = max(0, x - r), min(w - 1, x + r)
    yy = np.arange(r0, r1 + 1)[:, None] - y
    xx = np.arange(c0, c1 + 1)[None, :] - x
    out[r0 : r1 + 1, c0 : c1 + 1][yy * yy + xx * xx <= z * z] = False
    return out


def _stamp(labels: np.ndarray, blob: Blob, y: int, x: int, label: int) -> None:
    bh, bw = blob.footprint.shape
    top, left = _anchor(blob, y, x)
    labels[top : top + bh, left : left + bw][blob.footprint] = label


def sample_location(rng: np.random.Generator, weights: np.ndarray) -> tuple[int, int]:
    """Draw a pixel (y, x) with probability proportional to its weight.

    The returned cell always has strictly positive weight.
    """
    flat = weights.ravel()
    cum = np.cumsum(flat)
    total = cum[-1]
    if total <= 0:
        raise ValueError("cannot sample from all-zero weights")
    u = rng.random() * total
    idx = int(np.searchsorted(cum, u, side="right"))
    idx = min(idx, flat.size - 1)
    while flat[idx] == 0.0:  # guards float round-off at span edges
        idx -= 1
    return idx // weights.shape[1], idx % weights.shape[1]


def greedy_placement(
    prior: np.ndarray,
    pool: list[Blob],
    spacing: SpacingDist,
    rng: np.random.Generator,
    max_consecutive_failures: int = 100,
) -> tuple[np.ndarray, PlacementLog]:
    """Greedily fill a fresh mask with pool blobs under the prior.

    The pool is shuffled once, then each round samples a location from the
    normalized product of prior and availability, draws an exclusion offset,
    and scans the remaining pool in order for the first blob that fits
    there. The round's blob is stamped with a fresh label and removed from
    the pool. A location hosting no blob is retired (marked unavailable) so
    packing continues until the available mass is exhausted, the pool is
    empty, or ``max_consecutive_failures`` locations failed in a row.
    Deterministic given the rng.
    """
    prior = np.asarray(prior, dtype=np.float64)
    h, w = prior.shape
    labels = np.zeros((h, w), dtype=np.int32)
    available = np.ones((h, w), dtype=bool)
    log = PlacementLog()

    remaining = [int(i) for i in rng.permutation(len(pool))] if pool else []
    label = 0
    failures = 0
    while remaining and failures < max_consecutive_failures:
        gain = prior * available
        if gain.sum() < MASS_EPSILON:
            break
        y, x = sample_location(rng, gain)
        z = sample_spacing(spacing, rng)
        log.draws += 1
        found = None
        for scan_pos, pool_id in enumerate(remaining):
            if can_host(available, pool[pool_id], y, x):
                found = (scan_pos, pool_id)
                break
        if found is None:
            available[y, x] = False  # nothing fits here now; never resample it
            failures += 1
            continue
        failures = 0
        scan_pos, pool_id = found
        remaining.pop(scan_pos)
        label += 1
        _stamp(labels, pool[pool_id], y, x, label)
        available = update_available(available, pool[pool_id], y, x, z)
        log.records.append(
            PlacementRecord(
                label=label, y=y, x=x, z=z, blob_id=pool_id, pool_index=scan_pos
            )
        )
    return labels, log


def random_weighted_placement(
    prior: np.ndarray,
    pool: list[Blob],
    spacing: SpacingDist,
    rng: np.random.Generator,
    attempts: int,
) -> tuple[np.ndarray, PlacementLog]:
    """Baseline: sample locations from the prior alone and reject collisions.

    The proposal distribution ignores availability (it never renormalizes),
    so crowded high-density regions waste attempts instead of redirecting
    mass. Bookkeeping (footprint + exclusion disk) matches greedy placement
    so the two are directly comparable. Used only by evaluation harnesses.
    """
    prior = np.asarray(prior, dtype=np.float64)
    h, w = prior.shape
    labels = np.zeros((h, w), dtype=np.int32)
    available = np.ones((h, w), dtype=bool)
    log = PlacementLog()
    if prior.sum() < MASS_EPSILON:
        return labels, log

    remaining = [int(i) for i in rng.permutation(len(pool))] if pool else []
    label = 0
    for _ in range(attempts):
        if not remaining:
            break
        y, x = sample_location(rng, prior)
        z = sample_spacing(spacing, rng)
        log.draws += 1
        found = None
        for scan_pos, pool_id in enumerate(remaining):
            if can_host(available, pool[pool_id], y, x):
                found = (scan_pos, pool_id)
                break
        if found is None:
            continue  # rejected; try another location
        scan_pos, pool_id = found
        remaining.pop(scan_pos)
        label += 1
        _stamp(labels, pool[pool_id], y, x, label)
        available = update_available(available, pool[pool_id], y, x, z)
        log.records.append(
            PlacementRecord(
                label=label, y=y, x=x, z=z, blob_id=pool_id, pool_index=scan_pos
            )
        )
    return labels, log


def prior_adherence(
    mask: np.ndarray, prior: np.ndarray, blur_sigma: float = DEFAULT_BLUR_SIGMA
) -> float:
    """Pearson correlation of the blurred mask foreground with the prior.

    Returns 0.0 when either side has zero variance.
    """
    mask = np.asarray(mask)
    prior = np.asarray(prior, dtype=np.float64)
    if mask.shape != prior.shape:
        raise ValueError("mask and prior dimensions must match")
    blurred = ndimage.gaussian_filter((mask > 0).astype(np.float64), sigma=blur_sigma)
    a = blurred.ravel()
    b = prior.ravel()
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


def count_instances(mask: np.ndarray) -> int:
    """Number of distinct nonzero labels in a mask."""
    labels = np.unique(np.asarray(mask))
    return int((labels != 0).sum())
