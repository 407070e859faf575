"""Binary instance masks and their run-length / polygon codecs.

Masks are H×W boolean numpy arrays. The run-length record is the
uncompressed COCO convention: ``{"size": [height, width], "counts": [...]}``
with counts in column-major (Fortran) order and the first run counting
background pixels, so an all-foreground mask starts with a 0 count.

Polygon records are COCO segmentation polygons: a flat ``[x0, y0, x1, y1,
...]`` list or a list of such rings. Rasterization is even-odd scanline
fill sampled at pixel centers, i.e. pixel (row, col) is foreground iff the
point (col + 0.5, row + 0.5) lies inside the polygon.
"""

from __future__ import annotations

import numpy as np

from .errors import CodecError


def decode_rle(counts: list[int], width: int, height: int) -> np.ndarray:
    """Expand column-major run-length counts into an H×W bool mask."""
    counts = list(counts)
    if any(c < 0 for c in counts):
        raise CodecError(f"negative run-length count in {counts}")
    total = sum(counts)
    if total != width * height:
        raise CodecError(
            f"run-length counts sum to {total}, expected {width}x{height}={width * height}"
        )
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return flat.reshape((height, width), order="F")


def encode_rle(mask: np.ndarray) -> dict:
    """Encode an H×W binary mask as an uncompressed run-length record."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise CodecError(f"mask must be 2-D, got shape {mask.shape}")
    h, w = mask.shape
    flat = mask.ravel(order="F")
    if flat.size == 0:
        return {"size": [h, w], "counts": [0]}
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    counts = np.diff(edges).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return {"size": [h, w], "counts": counts}


def _fill_ring(mask: np.ndarray, ring: np.ndarray) -> None:
    """Toggle `mask` with one polygon ring, even-odd at pixel centers."""
    h, w = mask.shape
    xs, ys = ring[:, 0], ring[:, 1]
    xe, ye = np.roll(xs, -1), np.roll(ys, -1)
    row_lo = max(0, int(np.floor(ys.min() - 0.5)))
    row_hi = min(h, int(np.ceil(ys.max() + 0.5)))
    for row in range(row_lo, row_hi):
        cy = row + 0.5
        # Half-open vertical span so a vertex shared by two edges counts once.
        hit = (np.minimum(ys, ye) <= cy) & (cy < np.maximum(ys, ye))
        if not hit.any():
            continue
        t = (cy - ys[hit]) / (ye[hit] - ys[hit])
        crossings = np.sort(xs[hit] + t * (xe[hit] - xs[hit]))
        for left, right in zip(crossings[0::2], crossings[1::2]):
            c0 = max(0, int(np.ceil(left - 0.5)))
            c1 = min(w, int(np.ceil(right - 0.5)))
            if c1 > c0:
                mask[row, c0:c1] ^= True


def rasterize_polygons(polygons: list, width: int, height: int) -> np.ndarray:
    """Fill one or more polygon rings into an H×W bool mask (union of rings)."""
    if polygons and isinstance(polygons[0], (int, float)):
        polygons = [polygons]
    out = np.zeros((height, width), dtype=bool)
    for flat in polygons:
        coords = np.asarray(flat, dtype=np.float64)
        if coords.size < 6 or coords.size % 2 != 0:
            raise CodecError(f"degenerate polygon with {coords.size} coordinates")
        ring = coords.reshape(-1, 2)
        ring_mask = np.zeros_like(out)
        _fill_ring(ring_mask, ring)
        out |= ring_mask
    return out


def decode_mask(encoding, width: int, height: int) -> np.ndarray:
    """Decode a run-length dict or polygon record into an H×W bool mask."""
    if isinstance(encoding, dict):
        size = encoding.get("size")
        if size is not None and (int(size[0]) != height or int(size[1]) != width):
            raise CodecError(f"record size {size} does not match {height}x{width}")
        return decode_rle(encoding["counts"], width, height)
    if isinstance(encoding, (list, tuple)):
        return rasterize_polygons(list(encoding), width, height)
    raise CodecError(f"unsupported mask encoding of type {type(encoding).__name__}")


def encode_mask(mask: np.ndarray) -> dict:
    """Encode a binary mask; decode_mask(encode_mask(m)) == m exactly."""
    return encode_rle(mask)
