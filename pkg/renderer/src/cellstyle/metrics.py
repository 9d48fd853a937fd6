"""Sanity metrics for stylized outputs."""
import numpy as np


def _gaussian_smooth(gray: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return gray
    radius = max(1, int(round(3 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(gray.astype(np.float64), radius, mode="reflect")
    rows = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, padded)
    return np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="valid"), 0, rows)


def otsu_threshold(gray: np.ndarray, bins: int = 64) -> float:
    """Threshold maximizing between-class variance."""
    hist, edges = np.histogram(gray, bins=bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    total = gray.size
    best_var, best_t = -1.0, float(centers[0])
    for k in range(1, bins):
        w0 = hist[:k].sum() / total
        w1 = 1.0 - w0
        if w0 == 0.0 or w1 == 0.0:
            continue
        m0 = (hist[:k] * centers[:k]).sum() / hist[:k].sum()
        m1 = (hist[k:] * centers[k:]).sum() / hist[k:].sum()
        var = w0 * w1 * (m0 - m1) ** 2
        if var > best_var:
            best_var, best_t = var, float(centers[k])
    return best_t


def foreground_overlap(image: np.ndarray, mask: np.ndarray, smooth_sigma: float = 1.0) -> float:
    """IoU between the Otsu-thresholded output foreground and a binary mask.

    A weak proxy for "the mask is still a valid pixel-wise annotation":
    bright rendered cells should sit where the mask says they are.
    """
    gray = image.mean(axis=2) if image.ndim == 3 else image.astype(np.float64)
    gray = _gaussian_smooth(gray, smooth_sigma)
    pred = gray > otsu_threshold(gray)
    truth = np.asarray(mask) > 0
    union = np.logical_or(pred, truth).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, truth).sum() / union)
