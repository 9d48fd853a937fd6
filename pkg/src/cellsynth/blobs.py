"""Blob extraction and synthesis by contour interpolation.

A blob is a single cell footprint cut out of a labeled mask. New blobs are
made by resampling two real contours to the same number of points, rigidly
aligning them with ICP, blending the paired points, and rasterizing the
blended contour back into a filled footprint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    BlobGenerationError,
    DegenerateBlobError,
    InsufficientInputError,
    RasterizationRejectedError,
)

FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

DEFAULT_MIN_BLOB_AREA = 16
DEFAULT_ICP_MAX_ITERS = 50
DEFAULT_ICP_TOL = 1e-6
DEFAULT_ICP_SEED_ROTATIONS = 8
RETRY_FACTOR = 10


@dataclass(frozen=True)
class BlobProvenance:
    """Where a blob came from: a mask label, or an interpolated pair."""

    source_label: int | None = None
    pair: tuple[int, int] | None = None
    alpha: float | None = None

    def to_dict(self):
        d = {}
        if self.source_label is not None:
            d["source_label"] = int(self.source_label)
        if self.pair is not None:
            d["pair"] = [int(self.pair[0]), int(self.pair[1])]
        if self.alpha is not None:
            d["alpha"] = float(self.alpha)
        return d

    @classmethod
    def from_dict(cls, d):
        pair = d.get("pair")
        return cls(
            source_label=d.get("source_label"),
            pair=tuple(pair) if pair is not None else None,
            alpha=d.get("alpha"),
        )


@dataclass(frozen=True, eq=False)
class Blob:
    """A single-instance binary footprint, tightly cropped to its bounding box.

    ``offset`` is the (row, col) of the bounding-box origin in the frame the
    blob was cut from. The footprint always touches all four box edges and
    holds exactly one 4-connected component.
    """

    footprint: np.ndarray
    offset: tuple[int, int] = (0, 0)
    provenance: BlobProvenance | None = None

    def __post_init__(self):
        fp = np.asarray(self.footprint, dtype=bool)
        object.__setattr__(self, "footprint", fp)
        if fp.ndim != 2 or fp.size == 0:
            raise ValueError("footprint must be a non-empty 2D array")
        if not fp.any():
            raise ValueError("footprint has no foreground pixels")
        rows = fp.any(axis=1)
        cols = fp.any(axis=0)
        if not (rows[0] and rows[-1] and cols[0] and cols[-1]):
            raise ValueError("footprint is not tightly cropped")
        _, n = ndimage.label(fp, structure=FOUR_CONN)
        if n != 1:
            raise ValueError(f"footprint must be one 4-connected component, got {n}")

    @property
    def area(self) -> int:
        return int(self.footprint.sum())

    @property
    def centroid(self) -> tuple[float, float]:
        """(row, col) centroid of the footprint, in footprint coordinates."""
        r, c = np.nonzero(self.footprint)
        return float(r.mean()), float(c.mean())


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed polygon of (x, y) points; the edge from the last point back to
    the first is implicit. Points produced by :func:`get_contour_points` are
    equally spaced in arc length along the traced boundary."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be an (E, 2) array")
        if pts.shape[0] < 8:
            raise ValueError("a contour needs at least 8 points")
        if not np.isfinite(pts).all():
            raise ValueError("contour points must be finite")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def perimeter(self) -> float:
        closed = np.vstack([self.points, self.points[:1]])
        return float(np.linalg.norm(np.diff(closed, axis=0), axis=1).sum())

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (radians, about the origin) followed by a translation."""

    rotation: float
    translation: tuple[float, float]

    def __post_init__(self):
        rot = float(self.rotation)
        rot = math.remainder(rot, 2.0 * math.pi)
        if rot <= -math.pi:  # remainder returns (-pi, pi]; guard fp edge
            rot += 2.0 * math.pi
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(
            self, "translation", (float(self.translation[0]), float(self.translation[1]))
        )

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.matrix.T + np.asarray(self.translation)


def extract_blobs(mask: np.ndarray, min_blob_area: int = DEFAULT_MIN_BLOB_AREA) -> list[Blob]:
    """Cut one Blob per label out of an integer-labeled mask.

    Labels whose largest 4-connected component is smaller than
    ``min_blob_area`` are dropped; labels split into several components keep
    only the largest one. An all-background mask yields an empty list.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be 2D")
    if not np.issubdtype(mask.dtype, np.integer):
        if np.issubdtype(mask.dtype, np.bool_):
            mask = mask.astype(np.int32)
        else:
            raise ValueError("mask labels must be integers")
    if (mask < 0).any():
        raise ValueError("mask labels must be nonnegative")

    blobs = []
    boxes = ndimage.find_objects(mask)
    for label in np.unique(mask):
        if label == 0:
            continue
        box = boxes[label - 1]
        if box is None:
            continue
        window = mask[box] == label
        comp, n = ndimage.label(window, structure=FOUR_CONN)
        if n == 0:
            continue
        sizes = np.bincount(comp.ravel())[1:]
        best = int(np.argmax(sizes)) + 1  # ties: lowest component id
        if sizes[best - 1] < min_blob_area:
            continue
        fp = comp == best
        rows = np.flatnonzero(fp.any(axis=1))
        cols = np.flatnonzero(fp.any(axis=0))
        crop = fp[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
        blobs.append(
            Blob(
                crop,
                offset=(box[0].start + int(rows[0]), box[1].start + int(cols[0])),
                provenance=BlobProvenance(source_label=int(label)),
            )
        )
    return blobs


# Moore neighborhood in clockwise order, starting north: (row, col) offsets.
_MOORE = np.array(
    [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)], dtype=int
)
_MOORE_INDEX = {(int(r), int(c)): i for i, (r, c) in enumerate(_MOORE)}


def trace_boundary(footprint: np.ndarray) -> np.ndarray:
    """Moore boundary trace of a footprint's outer boundary.

    Returns an (m, 2) float array of (x, y) positions at the centers of the
    boundary pixels, in traversal order. Pixels on one-pixel-wide parts
    appear more than once (the trace walks around them).
    """
    fp = np.asarray(footprint, dtype=bool)
    h, w = fp.shape

    def fg(r, c):
        return 0 <= r < h and 0 <= c < w and fp[r, c]

    first = np.argwhere(fp)
    if first.size == 0:
        raise DegenerateBlobError("empty footprint")
    sr, sc = (int(v) for v in first[0])  # topmost, then leftmost

    start_back = (sr, sc - 1)  # entered from the west
    path = [(sr, sc)]
    p, back = (sr, sc), start_back
    max_steps = 8 * int(fp.sum()) + 16
    for _ in range(max_steps):
        bi = _MOORE_INDEX[(back[0] - p[0], back[1] - p[1])]
        nxt = None
        for k in range(1, 9):
            idx = (bi + k) % 8
            q = (p[0] + int(_MOORE[idx, 0]), p[1] + int(_MOORE[idx, 1]))
            if fg(*q):
                prev = (bi + k - 1) % 8
                nxt = (q, (p[0] + int(_MOORE[prev, 0]), p[1] + int(_MOORE[prev, 1])))
                break
        if nxt is None:
            break  # isolated pixel
        q, nb = nxt
        if q == (sr, sc) and nb == start_back:
            break  # Jacob's stopping criterion: start re-entered the same way
        path.append(q)
        p, back = q, nb
    pts = np.array(path, dtype=np.float64)
    return pts[:, ::-1].copy()  # (row, col) -> (x, y)


def _signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def get_contour_points(blob: Blob, e_points: int) -> Contour:
    """Resample a blob's outer boundary at ``e_points`` equal arc-length steps.

    Orientation is normalized to positive signed area in (x, y), and the
    first point is the traced boundary point at the smallest angle from the
    footprint centroid, so the result is deterministic.
    """
    if e_points < 8:
        raise ValueError("e_points must be at least 8")
    verts = trace_boundary(blob.footprint)
    if verts.shape[0] < 3 or abs(_signed_area(verts)) < 1.0:
        raise DegenerateBlobError(
            "blob boundary encloses no area (thin or single-pixel footprint)"
        )
    if _signed_area(verts) < 0:
        verts = verts[::-1]

    rr, cc = np.nonzero(blob.footprint)
    cx, cy = float(cc.mean()), float(rr.mean())
    angles = np.arctan2(verts[:, 1] - cy, verts[:, 0] - cx)
    order = np.lexsort((verts[:, 0], verts[:, 1], angles))
    verts = np.roll(verts, -int(order[0]), axis=0)

    closed = np.vstack([verts, verts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    perimeter = arc[-1]
    targets = np.arange(e_points) * (perimeter / e_points)
    xs = np.interp(targets, arc, closed[:, 0])
    ys = np.interp(targets, arc, closed[:, 1])
    return Contour(np.column_stack([xs, ys]))


def _kabsch2d(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rigid transform mapping src onto dst (paired rows)."""
    sc = src - src.mean(axis=0)
    dc = dst - dst.mean(axis=0)
    dot = float(np.sum(sc * dc))
    cross = float(np.sum(sc[:, 0] * dc[:, 1] - sc[:, 1] * dc[:, 0]))
    theta = math.atan2(cross, dot)
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    t = dst.mean(axis=0) - rot @ src.mean(axis=0)
    return rot, t


def _nn_cost(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    d2 = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    idx = np.argmin(d2, axis=1)
    cost = float(np.maximum(d2[np.arange(len(a)), idx], 0.0).sum())
    return idx, cost


def best_index_pairing(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Bijection between two equally sized closed point sequences.

    Searches all cyclic shifts, forward and reversed, and returns the index
    array ``perm`` minimizing ``sum ||a[perm[i]] - b[i]||^2`` together with
    that cost. Forward wins ties, lower shifts win within an orientation.
    """
    e = len(a)
    base = np.arange(e)
    shift_idx = (base[None, :] + base[:, None]) % e  # row s = indices rolled by -s
    const = float(np.sum(a * a) + np.sum(b * b))
    best_perm, best_cost = None, np.inf
    for rev in (False, True):
        perm_base = base[::-1] if rev else base
        aa = a[::-1] if rev else a
        # cost(s) = |a|^2 + |b|^2 - 2 sum_i aa[(i+s) % e] . b[i]
        cross = np.einsum("sid,id->s", aa[shift_idx], b)
        costs = const - 2.0 * cross
        s = int(np.argmin(costs))
        if costs[s] < best_cost - 1e-12:
            best_perm = perm_base[shift_idx[s]]
            best_cost = float(costs[s])
    return best_perm, max(best_cost, 0.0)


def _procrustes_over_pairings(a: np.ndarray, b: np.ndarray):
    """Jointly optimal rigid transform and cyclic pairing of a onto b.

    For every cyclic shift and both orientations the best rigid fit is
    closed-form Procrustes with cost ``A + B - 2*hypot(dot, cross)``, so one
    correlation pass finds the global optimum over all 2E hypotheses.
    """
    e = len(a)
    base = np.arange(e)
    shift_idx = (base[None, :] + base[:, None]) % e
    am, bm = a.mean(axis=0), b.mean(axis=0)
    ac, bc = a - am, b - bm
    spread = float(np.sum(ac * ac) + np.sum(bc * bc))
    best = None
    for rev in (False, True):
        perm_base = base[::-1] if rev else base
        gathered = (ac[::-1] if rev else ac)[shift_idx]  # (e, e, 2)
        dot = np.einsum("sid,id->s", gathered, bc)
        cross = np.einsum("si,i->s", gathered[..., 0], bc[:, 1]) - np.einsum(
            "si,i->s", gathered[..., 1], bc[:, 0]
        )
        mag = np.hypot(dot, cross)
        s = int(np.argmax(mag))
        cost = spread - 2.0 * float(mag[s])
        if best is None or cost < best[0] - 1e-12:
            best = (cost, perm_base[shift_idx[s]], math.atan2(cross[s], dot[s]))
    cost, perm, theta = best
    c, si = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -si], [si, c]])
    t = bm - rot @ am
    return perm, rot, t, max(cost, 0.0)


def register(
    p1: Contour,
    p2: Contour,
    max_iters: int = DEFAULT_ICP_MAX_ITERS,
    tol: float = DEFAULT_ICP_TOL,
    seed_rotations: int = DEFAULT_ICP_SEED_ROTATIONS,
) -> tuple[Contour, RigidTransform]:
    """Rigidly align p1 to p2 with ICP and pair their points index-wise.

    ICP (rotation + translation, no scale) runs from centroid alignment plus
    ``seed_rotations`` evenly spaced initial rotations; each run iterates
    correspondence / least-squares steps until the relative cost improvement
    drops below ``tol`` or ``max_iters`` is hit. Among the converged
    candidates (plus plain centroid alignment) the one with the lowest
    index-paired cost wins, and the returned contour is the transformed p1
    reordered so its i-th point pairs with p2's i-th point.
    """
    a, b = p1.points, p2.points
    if len(a) != len(b):
        raise ValueError("contours must have the same number of points")

    ca, cb = a.mean(axis=0), b.mean(axis=0)
    candidates = [(np.eye(2), cb - ca)]
    for k in range(seed_rotations):
        theta = 2.0 * math.pi * k / seed_rotations
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        t = cb - rot @ ca
        prev_cost = math.inf
        for _ in range(max_iters):
            cur = a @ rot.T + t
            idx, cost = _nn_cost(cur, b)
            rot, t = _kabsch2d(a, b[idx])
            if cost < 1e-12 or (
                math.isfinite(prev_cost) and (prev_cost - cost) <= tol * prev_cost
            ):
                break
            prev_cost = cost
        candidates.append((rot, t))

    best = None
    for rot, t in candidates:
        moved = a @ rot.T + t
        perm, cost = best_index_pairing(moved, b)
        if best is None or cost < best[0] - 1e-12:
            best = (cost, perm, rot, t)

    # Final solve on exact correspondences: NN-based iterations settle into
    # fixed points one sample step off the true alignment, so refit the
    # rigid transform per cyclic-pairing hypothesis (closed form) and keep
    # the global best. This can only lower the index-paired cost.
    perm, rot, t, cost = _procrustes_over_pairings(a, b)
    if best[0] < cost - 1e-12:  # keep the ICP winner if it somehow beat it
        cost, perm, rot, t = best

    transform = RigidTransform(math.atan2(rot[1, 0], rot[0, 0]), (float(t[0]), float(t[1])))
    return Contour((a @ rot.T + t)[perm]), transform


def interpolate(p1: Contour, p2: Contour, alpha: float) -> Contour:
    """Pointwise blend ``alpha * p1 + (1 - alpha) * p2`` of two paired contours."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if len(p1) != len(p2):
        raise ValueError("contours must have the same number of points")
    return Contour(alpha * p1.points + (1.0 - alpha) * p2.points)


def _scanline_fill(points: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Even-odd scanline fill at integer pixel centers, spans inclusive."""
    h, w = shape
    grid = np.zeros(shape, dtype=bool)
    p = points
    q = np.roll(points, -1, axis=0)
    keep = p[:, 1] != q[:, 1]  # horizontal edges never cross a scanline
    x1, y1 = p[keep, 0], p[keep, 1]
    x2, y2 = q[keep, 0], q[keep, 1]
    if x1.size == 0:
        return grid
    r_lo = max(0, int(math.ceil(points[:, 1].min())))
    r_hi = min(h - 1, int(math.floor(points[:, 1].max())))
    for r in range(r_lo, r_hi + 1):
        crossing = ((y1 <= r) & (r < y2)) | ((y2 <= r) & (r < y1))
        if not crossing.any():
            continue
        xs = x1[crossing] + (r - y1[crossing]) * (x2[crossing] - x1[crossing]) / (
            y2[crossing] - y1[crossing]
        )
        xs.sort()
        for lo, hi in zip(xs[0::2], xs[1::2]):
            c0 = max(0, int(math.ceil(lo - 1e-9)))
            c1 = min(w - 1, int(math.floor(hi + 1e-9)))
            if c0 <= c1:
                grid[r, c0 : c1 + 1] = True
    return grid


def _draw_outline(grid: np.ndarray, points: np.ndarray) -> None:
    """Mark every pixel the closed polyline passes through (~2 samples/px)."""
    h, w = grid.shape
    p = points
    q = np.roll(points, -1, axis=0)
    for (x0, y0), (x1, y1) in zip(p, q):
        n = max(2, int(math.ceil(2.0 * math.hypot(x1 - x0, y1 - y0))) + 1)
        xs = np.rint(np.linspace(x0, x1, n)).astype(int)
        ys = np.rint(np.linspace(y0, y1, n)).astype(int)
        ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
        grid[ys[ok], xs[ok]] = True


def rasterize_and_close(contour: Contour, min_blob_area: int = DEFAULT_MIN_BLOB_AREA) -> Blob:
    """Fill a closed contour into a Blob.

    Even-odd scanline fill of the polygon union its drawn outline, then a
    3x3 morphological closing, then the largest 4-connected component. A
    result smaller than ``min_blob_area`` raises RasterizationRejectedError
    so the caller can resample a new pair.
    """
    pts = contour.points
    x0 = int(math.floor(pts[:, 0].min())) - 2
    y0 = int(math.floor(pts[:, 1].min())) - 2
    x1 = int(math.ceil(pts[:, 0].max())) + 2
    y1 = int(math.ceil(pts[:, 1].max())) + 2
    local = pts - np.array([x0, y0], dtype=np.float64)
    shape = (y1 - y0 + 1, x1 - x0 + 1)

    grid = _scanline_fill(local, shape)
    _draw_outline(grid, local)
    grid = ndimage.binary_closing(grid, structure=np.ones((3, 3), dtype=bool))

    comp, n = ndimage.label(grid, structure=FOUR_CONN)
    if n == 0:
        raise RasterizationRejectedError("contour rasterized to nothing")
    sizes = np.bincount(comp.ravel())[1:]
    best = int(np.argmax(sizes)) + 1
    if sizes[best - 1] < min_blob_area:
        raise RasterizationRejectedError(
            f"largest filled component has {int(sizes[best - 1])} px "
            f"(minimum {min_blob_area})"
        )
    fp = comp == best
    rows = np.flatnonzero(fp.any(axis=1))
    cols = np.flatnonzero(fp.any(axis=0))
    crop = fp[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
    return Blob(crop, offset=(y0 + int(rows[0]), x0 + int(cols[0])))


def interpolate_blobs(
    pool: list[Blob],
    l_blobs: int,
    e_points: int,
    rng: np.random.Generator,
    min_blob_area: int = DEFAULT_MIN_BLOB_AREA,
    max_attempts: int | None = None,
) -> list[Blob]:
    """Generate ``l_blobs`` new blobs by interpolating random pool pairs.

    Each output samples a distinct pair uniformly at random and a blend
    factor alpha uniform on [0, 1], then runs resample -> register ->
    interpolate -> rasterize. Rejected rasterizations retry with a fresh
    pair and alpha. Every output index draws from its own child stream of
    ``rng``, so a parallel implementation over indices would produce the
    identical blob set. The total attempt budget is ``10 * l_blobs`` unless
    overridden; exhausting it raises BlobGenerationError carrying the blobs
    produced so far.
    """
    k = len(pool)
    if k < 2:
        raise InsufficientInputError(
            f"blob interpolation needs at least 2 pool blobs, got {k}"
        )
    if max_attempts is None:
        max_attempts = RETRY_FACTOR * l_blobs

    contours: dict[int, Contour | None] = {}

    def contour_of(i: int) -> Contour | None:
        if i not in contours:
            try:
                contours[i] = get_contour_points(pool[i], e_points)
            except DegenerateBlobError:
                contours[i] = None
        return contours[i]

    out: list[Blob] = []
    attempts = 0
    streams = rng.spawn(l_blobs)
    for child in streams:
        made = None
        while made is None:
            if attempts >= max_attempts:
                raise BlobGenerationError(
                    f"retry budget of {max_attempts} attempts exhausted after "
                    f"producing {len(out)} of {l_blobs} blobs",
                    produced=out,
                )
            attempts += 1
            i, j = (int(v) for v in child.choice(k, size=2, replace=False))
            alpha = float(child.uniform())
            c1, c2 = contour_of(i), contour_of(j)
            if c1 is None or c2 is None:
                continue
            registered, _ = register(c1, c2)
            blended = interpolate(registered, c2, alpha)
            try:
                blob = rasterize_and_close(blended, min_blob_area=min_blob_area)
            except RasterizationRejectedError:
                continue
            made = Blob(
                blob.footprint,
                offset=blob.offset,
                provenance=BlobProvenance(pair=(i, j), alpha=alpha),
            )
        out.append(made)
    return out
