"""Re-validation of emitted datasets.

Re-checks every pseudo-video invariant directly from the files: frame
files exist, run-length records decode at the stated size, visible masks
are non-empty, every track is visible somewhere, and per-frame masks of
distinct tracks never overlap.

A violation is canonically ``(kind, video_id, frame, tracks)`` with frame
= -1 when not frame-specific; the JSON report lists them sorted. The
downstream client library re-implements the same canonical form so the
two validators can be diffed against each other.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError
from .masks import decode_rle


def _violation(kind: str, video_id: int, frame: int, tracks: list[int], detail: str) -> dict:
    return {
        "kind": kind,
        "video_id": video_id,
        "frame": frame,
        "tracks": sorted(tracks),
        "detail": detail,
    }


def validate_dataset(dataset_dir: str | Path, manifest: dict) -> dict:
    """Validate one emitted dataset; returns a machine-readable report."""
    dataset_dir = Path(dataset_dir)
    for key in ("videos", "tracks", "categories", "fingerprint"):
        if key not in manifest:
            raise ParseError(f"manifest is missing required key {key!r}")

    violations: list[dict] = []
    videos = {v["video_id"]: v for v in manifest["videos"]}

    for video_id in sorted(videos):
        video = videos[video_id]
        for t, rel in enumerate(video["frames"]):
            if not (dataset_dir / rel).is_file():
                violations.append(
                    _violation("missing_frame_file", video_id, t, [], rel)
                )

    tracks_by_video: dict[int, list[dict]] = {vid: [] for vid in videos}
    for tr in manifest["tracks"]:
        vid = tr["video_id"]
        if vid not in videos:
            violations.append(
                _violation("orphan_track", vid, -1, [tr["track_id"]], "video_id not in manifest")
            )
            continue
        tracks_by_video[vid].append(tr)

    for video_id in sorted(tracks_by_video):
        video = videos[video_id]
        num_frames = len(video["frames"])
        h, w = video["height"], video["width"]
        decoded: dict[int, list[np.ndarray | None]] = {}
        for tr in tracks_by_video[video_id]:
            tid = tr["track_id"]
            segs = tr["segmentations"]
            if len(segs) != num_frames:
                violations.append(
                    _violation(
                        "bad_track_length",
                        video_id,
                        -1,
                        [tid],
                        f"{len(segs)} segmentations for {num_frames} frames",
                    )
                )
                continue
            masks: list[np.ndarray | None] = []
            visible = 0
            for t, seg in enumerate(segs):
                if seg is None:
                    masks.append(None)
                    continue
                try:
                    mask = decode_rle(seg["counts"], w, h)
                except Exception as exc:
                    violations.append(
                        _violation("decode_error", video_id, t, [tid], str(exc))
                    )
                    masks.append(None)
                    continue
                if not mask.any():
                    violations.append(
                        _violation("empty_visible_mask", video_id, t, [tid], "all-zero mask")
                    )
                    masks.append(None)
                    continue
                visible += 1
                masks.append(mask)
            if visible == 0:
                violations.append(
                    _violation("no_visible_frame", video_id, -1, [tid], "track never visible")
                )
            decoded[tid] = masks

        for t in range(num_frames):
            ids = sorted(tid for tid, m in decoded.items() if m[t] is not None)
            for i, tid_a in enumerate(ids):
                for tid_b in ids[i + 1 :]:
                    if np.logical_and(decoded[tid_a][t], decoded[tid_b][t]).any():
                        violations.append(
                            _violation("overlap", video_id, t, [tid_a, tid_b], "masks intersect")
                        )

    violations.sort(key=lambda v: (v["kind"], v["video_id"], v["frame"], v["tracks"]))
    return {
        "videos_checked": len(videos),
        "tracks_checked": len(manifest["tracks"]),
        "violations": violations,
    }


def violation_keys(report: dict) -> set[tuple]:
    """Canonical comparable form of a report's violations."""
    return {
        (v["kind"], v["video_id"], v["frame"], tuple(v["tracks"]))
        for v in report["violations"]
    }
