"""Dataset handle, mask decoding, and clip iteration.

The manifest schema this client consumes:

  fingerprint: {tool_version, master_seed, config_hash}
  categories:  [{id, name}]
  videos:      [{video_id, width, height, frames: [relative paths], ...}]
  tracks:      [{track_id, video_id, category_id,
                 segmentations: [rle-or-null per frame]}]

Run-length records are {"size": [h, w], "counts": [...]} with column-major
counts starting on background.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


class SchemaError(Exception):
    """The manifest does not match the dataset schema."""


def decode_counts(counts: list[int], width: int, height: int) -> np.ndarray:
    """Expand column-major run-length counts into an H×W bool mask.

    Independent of the generator's codec on purpose: walks the runs one by
    one into a flat column-major buffer.
    """
    total = width * height
    flat = np.zeros(total, dtype=bool)
    cursor = 0
    value = False
    for count in counts:
        if count < 0:
            raise SchemaError(f"negative run count {count}")
        if count:
            flat[cursor : cursor + count] = value
        cursor += count
        value = not value
    if cursor != total:
        raise SchemaError(f"counts cover {cursor} pixels, mask has {total}")
    return flat.reshape((width, height)).T


@dataclass(frozen=True)
class ClipSample:
    video_id: int
    start_frame: int
    frames: list[np.ndarray]  # clip_len rasters, H×W×3 uint8
    masks: dict[int, list[np.ndarray | None]]  # track_id -> per-frame masks
    categories: dict[int, int]  # track_id -> category_id


@dataclass
class DatasetHandle:
    root: Path
    manifest: dict
    videos: dict[int, dict] = field(init=False)
    tracks_by_video: dict[int, list[dict]] = field(init=False)

    def __post_init__(self):
        self.videos = {v["video_id"]: v for v in self.manifest["videos"]}
        self.tracks_by_video = {vid: [] for vid in self.videos}
        for track in self.manifest["tracks"]:
            self.tracks_by_video.setdefault(track["video_id"], []).append(track)

    def __len__(self) -> int:
        return len(self.videos)

    def video_ids(self) -> list[int]:
        return sorted(self.videos)

    def load_frame(self, video_id: int, frame_index: int) -> np.ndarray:
        rel = self.videos[video_id]["frames"][frame_index]
        with Image.open(self.root / rel) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)

    def decode_track_masks(self, video_id: int) -> dict[int, list[np.ndarray | None]]:
        video = self.videos[video_id]
        width, height = video["width"], video["height"]
        out = {}
        for track in self.tracks_by_video.get(video_id, []):
            out[track["track_id"]] = [
                None if seg is None else decode_counts(seg["counts"], width, height)
                for seg in track["segmentations"]
            ]
        return out


_VIDEO_KEYS = {"video_id", "width", "height", "frames"}
_TRACK_KEYS = {"track_id", "video_id", "category_id", "segmentations"}


def _check_schema(manifest: dict) -> None:
    for key in ("fingerprint", "categories", "videos", "tracks"):
        if key not in manifest:
            raise SchemaError(f"manifest is missing top-level key {key!r}")
    for video in manifest["videos"]:
        missing = _VIDEO_KEYS - set(video)
        if missing:
            raise SchemaError(f"video record missing keys {sorted(missing)}: {video}")
    video_ids = {v["video_id"] for v in manifest["videos"]}
    if len(video_ids) != len(manifest["videos"]):
        raise SchemaError("duplicate video_id in manifest")
    for track in manifest["tracks"]:
        missing = _TRACK_KEYS - set(track)
        if missing:
            raise SchemaError(f"track record missing keys {sorted(missing)}")


def open_dataset(path: str | Path) -> DatasetHandle:
    """Open an emitted dataset directory.

    Validates the manifest schema and that every referenced frame file
    exists; frame pixels and masks decode lazily afterwards.
    """
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise SchemaError(f"no manifest.json under {root}")
    with open(manifest_path, "r", encoding="utf-8") as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"manifest is not valid JSON: {exc}") from exc
    _check_schema(manifest)
    for video in manifest["videos"]:
        for rel in video["frames"]:
            if not (root / rel).is_file():
                raise SchemaError(f"referenced frame file is missing: {root / rel}")
    return DatasetHandle(root=root, manifest=manifest)


def iterate_clips(handle: DatasetHandle, clip_len: int):
    """Yield contiguous clip windows from every video, in video-id order."""
    for video_id in handle.video_ids():
        num_frames = len(handle.videos[video_id]["frames"])
        if not 1 <= clip_len <= num_frames:
            raise ValueError(
                f"clip_len must be in [1, {num_frames}] for video {video_id}, got {clip_len}"
            )
        frames = [handle.load_frame(video_id, t) for t in range(num_frames)]
        masks = handle.decode_track_masks(video_id)
        categories = {
            t["track_id"]: t["category_id"] for t in handle.tracks_by_video.get(video_id, [])
        }
        for start in range(num_frames - clip_len + 1):
            window = slice(start, start + clip_len)
            yield ClipSample(
                video_id=video_id,
                start_frame=start,
                frames=frames[window],
                masks={tid: per_frame[window] for tid, per_frame in masks.items()},
                categories=categories,
            )
