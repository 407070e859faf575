"""Video morph & splice: turning one annotated image into a pseudo-video.

The pipeline replicates an image T times with per-frame random rotations
(the naive video), then repeatedly lifts an instance out of the source
image, warps it along a smooth per-frame affine schedule, and composites
it back over every frame. Compositing is per-pixel hard selection: where
the warped instance mask is set the output takes the warped pixel,
elsewhere the frame pixel survives, and every pre-existing track mask is
shrunk by the warped mask (occlusion). Masks stay binary throughout, so
the splice is exact integer arithmetic.

Track bookkeeping: per-frame masks are either a non-empty bool array or
None (not visible in that frame). Tracks that end up invisible in every
frame are removed so emitted videos always satisfy the one-visible-frame
invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import affine
from .errors import GeometryError
from .ingest import AnnotatedImage


@dataclass(frozen=True)
class InstanceLayer:
    """An instance lifted out of its image: pixels are zero off-mask."""

    pixels: np.ndarray  # H×W×3 uint8
    mask: np.ndarray  # H×W bool


@dataclass(frozen=True)
class MorphParams:
    """Affine decomposition for one frame of a morph schedule."""

    hflip: bool
    scale: float
    rotate_deg: float
    translate: tuple[float, float]  # (dx, dy) pixels


@dataclass(frozen=True)
class MorphSchedule:
    per_frame: tuple[MorphParams, ...]


@dataclass(frozen=True)
class MorphBounds:
    """Endpoint bounds for morph schedules; translations are in pixels."""

    scale_max: float = 0.1
    rot_max: float = 15.0
    translate_max_x: float = 0.0
    translate_max_y: float = 0.0
    independent: bool = False  # ablation mode: i.i.d. per-frame draws


@dataclass
class Track:
    category_id: int
    masks: list[np.ndarray | None]  # length T; None = not visible

    def visible_frames(self) -> list[int]:
        return [t for t, m in enumerate(self.masks) if m is not None]


@dataclass
class PseudoVideo:
    frames: list[np.ndarray]  # T × H×W×3 uint8
    tracks: dict[int, Track]
    source_image_id: int

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]


def _normalized(mask: np.ndarray | None) -> np.ndarray | None:
    if mask is None or not mask.any():
        return None
    return mask


def _drop_invisible_tracks(tracks: dict[int, Track]) -> dict[int, Track]:
    return {tid: tr for tid, tr in tracks.items() if tr.visible_frames()}


def _resolve_source_overlaps(image: AnnotatedImage) -> dict[int, np.ndarray]:
    """Track masks for the source instances, higher ids occluding lower ones.

    Source annotations may overlap (legal in COCO); track masks must not,
    so overlaps are resolved with the same layering rule as splicing:
    later (higher-id) instances sit on top.
    """
    resolved: dict[int, np.ndarray] = {}
    for inst in sorted(image.instances, key=lambda i: i.instance_id):
        for tid in resolved:
            resolved[tid] = resolved[tid] & ~inst.mask
        resolved[inst.instance_id] = inst.mask
    return resolved


def make_naive_video(
    image: AnnotatedImage,
    num_frames: int,
    rot_range_deg: float,
    rng: np.random.Generator,
) -> PseudoVideo:
    """Replicate the image with one uniform random rotation per frame.

    Rotation angles are a single ``rng.uniform(-r, r, size=T)`` draw. Frames
    are warped bilinearly, masks nearest-neighbor, both about the canvas
    center; rot_range_deg == 0 reproduces the image bit-exactly.
    """
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    if rot_range_deg < 0:
        raise ValueError(f"rot_range_deg must be >= 0, got {rot_range_deg}")
    center = affine.canvas_center(image.height, image.width)
    angles = rng.uniform(-rot_range_deg, rot_range_deg, size=num_frames)
    source_masks = _resolve_source_overlaps(image)

    frames = []
    per_frame_masks: dict[int, list[np.ndarray | None]] = {
        inst.instance_id: [] for inst in image.instances
    }
    canvas = (image.height, image.width)
    for theta in angles:
        transform = affine.about(center, affine.rotation_deg(theta))
        frames.append(affine.warp_image(image.pixels, transform))
        for inst in image.instances:
            warped = affine.warp_mask_windowed(source_masks[inst.instance_id], transform, canvas)
            per_frame_masks[inst.instance_id].append(_normalized(warped))

    tracks = {
        inst.instance_id: Track(inst.category_id, per_frame_masks[inst.instance_id])
        for inst in image.instances
    }
    return PseudoVideo(
        frames=frames,
        tracks=_drop_invisible_tracks(tracks),
        source_image_id=image.image_id,
    )


def extract_instance(image: AnnotatedImage, instance_id: int) -> InstanceLayer:
    """Isolate one instance: image pixels under the mask, zero elsewhere."""
    inst = image.instance(instance_id)
    pixels = np.where(inst.mask[..., None], image.pixels, np.uint8(0))
    return InstanceLayer(pixels=pixels, mask=inst.mask.copy())


def sample_morph_schedule(
    rng: np.random.Generator, num_frames: int, bounds: MorphBounds
) -> MorphSchedule:
    """Draw a morph trajectory for one spliced instance.

    Draw order: hflip (one bernoulli for the whole schedule), then either
    the four endpoint parameters (scale, rotation, dx, dy) which are
    linearly interpolated from identity at frame 0 to the endpoint at the
    last frame, or, in independent mode, the same four parameters fresh
    per frame. A single frame degenerates to the endpoint itself.
    """
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    flip = bool(rng.random() < 0.5)

    def draw() -> tuple[float, float, float, float]:
        scale = float(rng.uniform(1.0 - bounds.scale_max, 1.0 + bounds.scale_max))
        rot = float(rng.uniform(-bounds.rot_max, bounds.rot_max))
        dx = float(rng.uniform(-bounds.translate_max_x, bounds.translate_max_x))
        dy = float(rng.uniform(-bounds.translate_max_y, bounds.translate_max_y))
        return scale, rot, dx, dy

    per_frame = []
    if bounds.independent:
        for _ in range(num_frames):
            scale, rot, dx, dy = draw()
            per_frame.append(MorphParams(flip, scale, rot, (dx, dy)))
    else:
        scale_end, rot_end, dx_end, dy_end = draw()
        for t in range(num_frames):
            alpha = 1.0 if num_frames == 1 else t / (num_frames - 1)
            per_frame.append(
                MorphParams(
                    hflip=flip,
                    scale=1.0 + alpha * (scale_end - 1.0),
                    rotate_deg=alpha * rot_end,
                    translate=(alpha * dx_end, alpha * dy_end),
                )
            )
    return MorphSchedule(per_frame=tuple(per_frame))


def morph_affine(params: MorphParams, anchor_xy: tuple[float, float]) -> np.ndarray:
    """Build the frame transform: flip/scale/rotate about the anchor, then translate."""
    local = affine.rotation_deg(params.rotate_deg) @ affine.scaling(params.scale)
    if params.hflip:
        local = local @ affine.hflip()
    return affine.translation(*params.translate) @ affine.about(anchor_xy, local)


def warp_layer(
    layer: InstanceLayer, transform: np.ndarray, canvas: tuple[int, int]
) -> InstanceLayer:
    """Warp an instance layer onto a canvas.

    The mask is warped nearest-neighbor (stays binary); pixels are warped
    bilinearly and re-zeroed outside the warped mask. Content leaving the
    canvas is clipped. Work is confined to the destination window covering
    the warped mask, which is where all foreground can land.
    """
    affine.invert(transform)  # reject singular transforms up front
    height, width = canvas
    mask = np.zeros((height, width), dtype=bool)
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    bbox = affine.mask_bbox(layer.mask)
    window = None if bbox is None else affine.dest_window(transform, bbox, canvas)
    if window is not None:
        row_lo, row_hi, col_lo, col_hi = window
        shape = (row_hi - row_lo, col_hi - col_lo)
        origin = (row_lo, col_lo)
        sub_mask = affine.warp_mask(layer.mask, transform, shape, origin)
        sub_pixels = affine.warp_image(layer.pixels, transform, shape, origin)
        mask[row_lo:row_hi, col_lo:col_hi] = sub_mask
        pixels[row_lo:row_hi, col_lo:col_hi] = np.where(
            sub_mask[..., None], sub_pixels, np.uint8(0)
        )
    return InstanceLayer(pixels=pixels, mask=mask)


def splice_frame(
    frame: np.ndarray,
    existing_masks: dict[int, np.ndarray | None],
    warped: InstanceLayer,
) -> tuple[np.ndarray, dict[int, np.ndarray | None]]:
    """Composite a warped instance over one frame.

    Output pixel = warped pixel where the warped mask is set, frame pixel
    elsewhere. Every existing mask is intersected with the complement of
    the warped mask; masks that become empty turn into None (not visible).
    """
    if frame.shape[:2] != warped.mask.shape:
        raise GeometryError(
            f"frame is {frame.shape[:2]}, warped layer is {warped.mask.shape}"
        )
    mask = warped.mask
    out = np.where(mask[..., None], warped.pixels, frame)
    updated: dict[int, np.ndarray | None] = {}
    for tid, old in existing_masks.items():
        updated[tid] = None if old is None else _normalized(old & ~mask)
    return out, updated


def splice_instances(
    video: PseudoVideo,
    image: AnnotatedImage,
    n_instances: int,
    rng: np.random.Generator,
    bounds: MorphBounds,
) -> PseudoVideo:
    """Morph & splice stage: add duplicated instances to an existing video.

    min(n_instances, available) source instances are sampled uniformly
    without replacement (ascending-id order feeds the rng). Each gets a
    fresh track id above every existing id, its own morph schedule anchored
    at its mask centroid, and is spliced frame by frame; later splices
    occlude earlier ones.
    """
    if n_instances < 1:
        raise ValueError(f"n_instances must be >= 1, got {n_instances}")
    if not image.instances:
        raise ValueError(f"image {image.image_id} has no instances to splice")

    source_ids = sorted(inst.instance_id for inst in image.instances)
    count = min(n_instances, len(source_ids))
    chosen = rng.choice(np.asarray(source_ids, dtype=np.int64), size=count, replace=False)

    frames = list(video.frames)
    tracks = {tid: Track(tr.category_id, list(tr.masks)) for tid, tr in video.tracks.items()}
    next_id = max(source_ids + list(tracks.keys()), default=0) + 1
    num_frames = video.num_frames
    canvas = (video.height, video.width)

    for source_id in (int(i) for i in chosen):
        layer = extract_instance(image, source_id)
        schedule = sample_morph_schedule(rng, num_frames, bounds)
        anchor = affine.mask_centroid(layer.mask)
        new_masks: list[np.ndarray | None] = []
        for t in range(num_frames):
            warped = warp_layer(layer, morph_affine(schedule.per_frame[t], anchor), canvas)
            existing = {tid: tr.masks[t] for tid, tr in tracks.items()}
            frames[t], updated = splice_frame(frames[t], existing, warped)
            for tid, new_mask in updated.items():
                tracks[tid].masks[t] = new_mask
            new_masks.append(_normalized(warped.mask))
        tracks[next_id] = Track(image.instance(source_id).category_id, new_masks)
        next_id += 1

    return PseudoVideo(
        frames=frames,
        tracks=_drop_invisible_tracks(tracks),
        source_image_id=video.source_image_id,
    )


def vmosp_augment(
    image: AnnotatedImage,
    num_frames: int,
    n_instances: int,
    rng: np.random.Generator,
    *,
    rotation_deg: float,
    bounds: MorphBounds,
) -> PseudoVideo:
    """Full morph & splice augmentation from a single annotated image."""
    video = make_naive_video(image, num_frames, rotation_deg, rng)
    return splice_instances(video, image, n_instances, rng, bounds)
