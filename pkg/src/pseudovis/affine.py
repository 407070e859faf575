"""2-D affine transforms and raster warping.

Transforms are 3×3 float64 matrices acting on homogeneous (x, y, 1) points
in continuous pixel coordinates: pixel (row, col) covers the unit square
[col, col+1) × [row, row+1) and has center (col + 0.5, row + 0.5). The
canvas center of an H×W raster is therefore (W/2, H/2).

Warping is inverse mapping: each destination pixel center is pulled back
through the inverse transform. Masks use nearest-neighbor (the source cell
containing the point), images use bilinear sampling. Everything falling
outside the source canvas is filled with black / background.
"""

from __future__ import annotations

import numpy as np

from .errors import GeometryError

IDENTITY = np.eye(3, dtype=np.float64)


def translation(dx: float, dy: float) -> np.ndarray:
    m = np.eye(3)
    m[0, 2] = dx
    m[1, 2] = dy
    return m


def scaling(sx: float, sy: float | None = None) -> np.ndarray:
    if sy is None:
        sy = sx
    return np.diag([float(sx), float(sy), 1.0])


def rotation_deg(angle_deg: float) -> np.ndarray:
    """Rotation about the origin; positive angles rotate +x toward +y."""
    theta = np.deg2rad(angle_deg)
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def hflip() -> np.ndarray:
    """Mirror across the y axis (x -> -x)."""
    return np.diag([-1.0, 1.0, 1.0])


def shear_x(factor: float) -> np.ndarray:
    m = np.eye(3)
    m[0, 1] = factor
    return m


def shear_y(factor: float) -> np.ndarray:
    m = np.eye(3)
    m[1, 0] = factor
    return m


def about(center_xy: tuple[float, float], transform: np.ndarray) -> np.ndarray:
    """Conjugate `transform` so it acts about `center_xy` instead of the origin."""
    cx, cy = center_xy
    return translation(cx, cy) @ transform @ translation(-cx, -cy)


def compose(transforms: list[np.ndarray]) -> np.ndarray:
    """Compose transforms in application order (first applied first)."""
    out = IDENTITY
    for t in transforms:
        out = t @ out
    return out


def canvas_center(height: int, width: int) -> tuple[float, float]:
    return (width / 2.0, height / 2.0)


def mask_centroid(mask: np.ndarray) -> tuple[float, float]:
    """Centroid of foreground pixel centers as an (x, y) point."""
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise GeometryError("centroid of an empty mask is undefined")
    return (cols.mean() + 0.5, rows.mean() + 0.5)


def invert(transform: np.ndarray) -> np.ndarray:
    det = np.linalg.det(transform[:2, :2])
    if abs(det) < 1e-12:
        raise GeometryError("affine transform is singular")
    return np.linalg.inv(transform)


_inverse = invert


def _source_points(
    transform: np.ndarray, out_height: int, out_width: int, origin: tuple[int, int]
):
    """Pull destination pixel centers back through the inverse transform.

    `origin` is the (row, col) of the output window inside the destination
    plane; coordinates are computed in absolute destination space, so a
    windowed warp is bit-identical to the matching slice of a full warp.
    """
    inv = _inverse(transform)
    row0, col0 = origin
    x = np.arange(col0, col0 + out_width, dtype=np.float64) + 0.5
    y = np.arange(row0, row0 + out_height, dtype=np.float64) + 0.5
    sx = inv[0, 0] * x[None, :] + inv[0, 1] * y[:, None] + inv[0, 2]
    sy = inv[1, 0] * x[None, :] + inv[1, 1] * y[:, None] + inv[1, 2]
    return sx, sy


def warp_mask(
    mask: np.ndarray,
    transform: np.ndarray,
    out_shape: tuple[int, int] | None = None,
    origin: tuple[int, int] = (0, 0),
) -> np.ndarray:
    """Nearest-neighbor warp of a bool mask; out-of-canvas is background."""
    h, w = mask.shape
    out_h, out_w = out_shape if out_shape is not None else (h, w)
    sx, sy = _source_points(transform, out_h, out_w, origin)
    col = np.floor(sx).astype(np.intp)
    row = np.floor(sy).astype(np.intp)
    inside = (row >= 0) & (row < h) & (col >= 0) & (col < w)
    index = np.where(inside, row * w + col, 0)
    return np.ascontiguousarray(mask).reshape(-1)[index] & inside


def warp_image(
    image: np.ndarray,
    transform: np.ndarray,
    out_shape: tuple[int, int] | None = None,
    origin: tuple[int, int] = (0, 0),
) -> np.ndarray:
    """Bilinear warp of an H×W×C uint8 raster; out-of-canvas is black.

    Sample positions are computed in float64 (so pixel picks are stable);
    value blending runs in float32, which is exact for uint8 inputs at the
    weights involved.
    """
    h, w = image.shape[:2]
    out_h, out_w = out_shape if out_shape is not None else (h, w)
    sx, sy = _source_points(transform, out_h, out_w, origin)
    # Shift to index space where sample i sits at coordinate i + 0.5.
    px = (sx - 0.5).ravel()
    py = (sy - 0.5).ravel()
    x0 = np.floor(px).astype(np.intp)
    y0 = np.floor(py).astype(np.intp)
    fx = (px - x0).astype(np.float32)
    fy = (py - y0).astype(np.float32)

    one = np.float32(1.0)
    taps = (
        (0, 0, (one - fy) * (one - fx)),
        (0, 1, (one - fy) * fx),
        (1, 0, fy * (one - fx)),
        (1, 1, fy * fx),
    )
    flat = np.ascontiguousarray(image).reshape(h * w, -1).astype(np.float32)
    acc = np.zeros((out_h * out_w, flat.shape[1]), dtype=np.float32)
    for dy, dx, weight in taps:
        yy = y0 + dy
        xx = x0 + dx
        ok = yy >= 0
        ok &= yy < h
        ok &= xx >= 0
        ok &= xx < w
        np.clip(yy, 0, h - 1, out=yy)
        np.clip(xx, 0, w - 1, out=xx)
        yy *= w
        yy += xx
        contribution = flat.take(yy, axis=0)
        weight *= ok  # zero the taps that fell off the canvas
        contribution *= weight[:, None]
        acc += contribution
    out = np.clip(np.rint(acc), 0, 255).astype(np.uint8)
    return out.reshape((out_h, out_w) + image.shape[2:])


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    """Inclusive (r0, r1, c0, c1) bounds of the foreground, None if empty."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1])


def dest_window(
    transform: np.ndarray,
    bbox: tuple[int, int, int, int],
    out_shape: tuple[int, int],
    margin: int = 2,
) -> tuple[int, int, int, int] | None:
    """Destination window that covers the warp of a source bbox.

    Forward-maps the bbox corners, takes their axis-aligned hull plus a
    margin, clamped to the canvas; None when the hull misses the canvas.
    """
    r0, r1, c0, c1 = bbox
    corners_x = np.array([c0, c1 + 1, c0, c1 + 1], dtype=np.float64)
    corners_y = np.array([r0, r0, r1 + 1, r1 + 1], dtype=np.float64)
    dest_x = transform[0, 0] * corners_x + transform[0, 1] * corners_y + transform[0, 2]
    dest_y = transform[1, 0] * corners_x + transform[1, 1] * corners_y + transform[1, 2]
    out_h, out_w = out_shape
    row_lo = max(0, int(np.floor(dest_y.min())) - margin)
    row_hi = min(out_h, int(np.ceil(dest_y.max())) + margin)
    col_lo = max(0, int(np.floor(dest_x.min())) - margin)
    col_hi = min(out_w, int(np.ceil(dest_x.max())) + margin)
    if row_lo >= row_hi or col_lo >= col_hi:
        return None
    return row_lo, row_hi, col_lo, col_hi


def warp_mask_windowed(
    mask: np.ndarray, transform: np.ndarray, out_shape: tuple[int, int]
) -> np.ndarray:
    """Full-canvas nearest warp computed only inside the covering window.

    Bit-identical to ``warp_mask(mask, transform, out_shape)``; the window
    merely skips destination regions the warped foreground cannot reach.
    """
    out = np.zeros(out_shape, dtype=bool)
    bbox = mask_bbox(mask)
    if bbox is None:
        return out
    window = dest_window(transform, bbox, out_shape)
    if window is None:
        return out
    row_lo, row_hi, col_lo, col_hi = window
    out[row_lo:row_hi, col_lo:col_hi] = warp_mask(
        mask, transform, out_shape=(row_hi - row_lo, col_hi - col_lo), origin=(row_lo, col_lo)
    )
    return out
