"""Augmentation op pool and consistent-blend sampling.

One blend = up to k ops with magnitudes frozen at sampling time, applied
with identical parameters to every frame of a clip, which is what keeps
the clip temporally coherent. Photometric ops never touch masks; spatial
ops are folded into a single composed affine that co-warps all masks once
(nearest-neighbor), while frames go through the ops in sequence.

Op semantics, with v the uint8 channel value and m the sampled magnitude:

  brightness   v + m, clipped                              m in [-64, 64]
  contrast     (v - 127.5) * (1 + m) + 127.5               m in [-0.5, 0.5]
  saturation   luma + (v - luma) * (1 + m), BT.601 luma    m in [-0.5, 0.5]
  hue          HSV hue rotated by m degrees                m in [-18, 18]
  sharpness    v + m * (v - box3(v)), edge-replicated box  m in [0, 2]
  posterize    keep the top 8 - round(m) bits              m in [0, 4]
  solarize     invert v where v >= m                       m in [128, 255]
  equalize     per-channel histogram equalization          m ignored
  translate_x  shift by m * width pixels                   m in [-0.125, 0.125]
  translate_y  shift by m * height pixels                  m in [-0.125, 0.125]
  shear_x      x += m * (y - cy) about canvas center       m in [-0.3, 0.3]
  shear_y      y += m * (x - cx) about canvas center       m in [-0.3, 0.3]
  scale        scale by factor m about canvas center       m in [0.8, 1.2]
  rotate       rotate by m degrees about canvas center     m bounded by config
  hflip        mirror about the vertical canvas axis       m ignored

The pool is config-overridable; the table above is only the default.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib.colors
import numpy as np

from . import affine
from .errors import ConfigError
from .vmosp import PseudoVideo, Track, _drop_invisible_tracks, _normalized

PHOTOMETRIC_KINDS = frozenset(
    {"brightness", "contrast", "saturation", "hue", "sharpness", "posterize", "solarize", "equalize"}
)
SPATIAL_KINDS = frozenset(
    {"translate_x", "translate_y", "shear_x", "shear_y", "scale", "rotate", "hflip"}
)


@dataclass(frozen=True)
class AugOpSpec:
    kind: str
    magnitude_range: tuple[float, float]

    def __post_init__(self):
        if self.kind not in PHOTOMETRIC_KINDS | SPATIAL_KINDS:
            raise ConfigError(f"unknown augmentation kind {self.kind!r}")
        lo, hi = self.magnitude_range
        if not lo <= hi:
            raise ConfigError(f"{self.kind}: empty magnitude range [{lo}, {hi}]")


@dataclass(frozen=True)
class CostBlend:
    """An ordered list of (kind, magnitude) pairs, frozen for a whole clip."""

    ops: tuple[tuple[str, float], ...]


def default_pool(rotation_deg: float = 15.0) -> list[AugOpSpec]:
    return [
        AugOpSpec("brightness", (-64.0, 64.0)),
        AugOpSpec("contrast", (-0.5, 0.5)),
        AugOpSpec("saturation", (-0.5, 0.5)),
        AugOpSpec("hue", (-18.0, 18.0)),
        AugOpSpec("sharpness", (0.0, 2.0)),
        AugOpSpec("posterize", (0.0, 4.0)),
        AugOpSpec("solarize", (128.0, 255.0)),
        AugOpSpec("equalize", (0.0, 1.0)),
        AugOpSpec("translate_x", (-0.125, 0.125)),
        AugOpSpec("translate_y", (-0.125, 0.125)),
        AugOpSpec("shear_x", (-0.3, 0.3)),
        AugOpSpec("shear_y", (-0.3, 0.3)),
        AugOpSpec("scale", (0.8, 1.2)),
        AugOpSpec("rotate", (-rotation_deg, rotation_deg)),
        AugOpSpec("hflip", (0.0, 1.0)),
    ]


def sample_cost_blend(
    rng: np.random.Generator, pool: list[AugOpSpec], k: int
) -> CostBlend:
    """Sample one blend: length uniform in {0..k}, ops without replacement.

    Draw order is fixed: blend length, then op indices into the pool, then
    one magnitude per chosen op, so a seed fully determines the blend.
    """
    if k < 0:
        raise ConfigError(f"k must be >= 0, got {k}")
    if not pool:
        raise ConfigError("augmentation pool is empty")
    if k > len(pool):
        raise ConfigError(f"k={k} exceeds pool size {len(pool)}")
    length = int(rng.integers(0, k + 1))
    indices = rng.choice(len(pool), size=length, replace=False)
    ops = []
    for idx in indices:
        spec = pool[int(idx)]
        lo, hi = spec.magnitude_range
        ops.append((spec.kind, float(rng.uniform(lo, hi))))
    return CostBlend(ops=tuple(ops))


def _luma(frame_f: np.ndarray) -> np.ndarray:
    return frame_f @ np.array([0.299, 0.587, 0.114])


def _box3(frame_f: np.ndarray) -> np.ndarray:
    padded = np.pad(frame_f, ((1, 1), (1, 1), (0, 0)), mode="edge")
    h, w = frame_f.shape[:2]
    acc = np.zeros_like(frame_f)
    for dy in range(3):
        for dx in range(3):
            acc += padded[dy : dy + h, dx : dx + w]
    return acc / 9.0


def _to_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def _apply_photometric(frame: np.ndarray, kind: str, m: float) -> np.ndarray:
    f = frame.astype(np.float64)
    if kind == "brightness":
        return _to_u8(f + m)
    if kind == "contrast":
        return _to_u8((f - 127.5) * (1.0 + m) + 127.5)
    if kind == "saturation":
        luma = _luma(f)[..., None]
        return _to_u8(luma + (f - luma) * (1.0 + m))
    if kind == "hue":
        hsv = matplotlib.colors.rgb_to_hsv(f / 255.0)
        hsv[..., 0] = (hsv[..., 0] + m / 360.0) % 1.0
        return _to_u8(matplotlib.colors.hsv_to_rgb(hsv) * 255.0)
    if kind == "sharpness":
        return _to_u8(f + m * (f - _box3(f)))
    if kind == "posterize":
        drop = int(round(m))
        return frame & np.uint8((0xFF << drop) & 0xFF)
    if kind == "solarize":
        return np.where(frame >= m, 255 - frame, frame).astype(np.uint8)
    if kind == "equalize":
        out = np.empty_like(frame)
        npix = frame.shape[0] * frame.shape[1]
        for ch in range(3):
            hist = np.bincount(frame[..., ch].ravel(), minlength=256)
            cdf = np.cumsum(hist)
            nonzero = hist.nonzero()[0]
            cdf_min = cdf[nonzero[0]]
            if npix == cdf_min:  # single-valued channel stays put
                out[..., ch] = frame[..., ch]
                continue
            lut = ((cdf - cdf_min) * 255 // (npix - cdf_min)).astype(np.uint8)
            out[..., ch] = lut[frame[..., ch]]
        return out
    raise ConfigError(f"unknown photometric op {kind!r}")


def _spatial_affine(shape: tuple[int, ...], kind: str, m: float) -> np.ndarray:
    h, w = shape[:2]
    center = affine.canvas_center(h, w)
    if kind == "translate_x":
        return affine.translation(m * w, 0.0)
    if kind == "translate_y":
        return affine.translation(0.0, m * h)
    if kind == "shear_x":
        return affine.about(center, affine.shear_x(m))
    if kind == "shear_y":
        return affine.about(center, affine.shear_y(m))
    if kind == "scale":
        return affine.about(center, affine.scaling(m))
    if kind == "rotate":
        return affine.about(center, affine.rotation_deg(m))
    if kind == "hflip":
        return affine.about(center, affine.hflip())
    raise ConfigError(f"unknown spatial op {kind!r}")


def apply_op(
    frame: np.ndarray, op: tuple[str, float]
) -> tuple[np.ndarray, np.ndarray | None]:
    """Apply one op to a frame.

    Returns the transformed frame and, for spatial ops, the 3×3 affine that
    was applied so the caller can co-warp masks; photometric ops return
    None there.
    """
    kind, magnitude = op
    if kind in PHOTOMETRIC_KINDS:
        return _apply_photometric(frame, kind, magnitude), None
    transform = _spatial_affine(frame.shape, kind, magnitude)
    return affine.warp_image(frame, transform), transform


def apply_cost_blend(video: PseudoVideo, blend: CostBlend) -> PseudoVideo:
    """Apply one frozen blend identically to every frame of a video.

    All masks are co-warped once by the composed affine of the blend's
    spatial ops; per-frame masks that become empty flip to not-visible, and
    tracks left with no visible frame are dropped.
    """
    if not blend.ops:
        return video

    new_frames = []
    affines: list[np.ndarray] = []
    for index, frame in enumerate(video.frames):
        current = frame
        for op in blend.ops:
            current, transform = apply_op(current, op)
            if index == 0 and transform is not None:
                affines.append(transform)
        new_frames.append(current)

    if affines:
        composed = affine.compose(affines)
        canvas = (video.height, video.width)
        new_tracks = {}
        for tid, track in video.tracks.items():
            masks = [
                None if m is None else _normalized(affine.warp_mask_windowed(m, composed, canvas))
                for m in track.masks
            ]
            new_tracks[tid] = Track(track.category_id, masks)
        new_tracks = _drop_invisible_tracks(new_tracks)
    else:
        new_tracks = {
            tid: Track(track.category_id, list(track.masks))
            for tid, track in video.tracks.items()
        }

    return PseudoVideo(
        frames=new_frames, tracks=new_tracks, source_image_id=video.source_image_id
    )
