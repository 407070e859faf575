"""Independent re-validation of dataset invariants.

Re-implements the invariant checks from scratch against the decoded
masks; the violation records use the same canonical shape as the
generator's validator, (kind, video_id, frame, tracks), so reports from
the two implementations can be diffed directly.
"""

from __future__ import annotations

import numpy as np

from .dataset import DatasetHandle, SchemaError, decode_counts


def _record(kind: str, video_id: int, frame: int, tracks: list[int], detail: str) -> dict:
    return {
        "kind": kind,
        "video_id": video_id,
        "frame": frame,
        "tracks": sorted(tracks),
        "detail": detail,
    }


def revalidate(handle: DatasetHandle) -> dict:
    """Re-check decode validity, track lengths, visibility, disjointness."""
    violations: list[dict] = []

    known_videos = set(handle.videos)
    for track in handle.manifest["tracks"]:
        if track["video_id"] not in known_videos:
            violations.append(
                _record("orphan_track", track["video_id"], -1, [track["track_id"]], "video_id not in manifest")
            )

    for video_id in handle.video_ids():
        video = handle.videos[video_id]
        num_frames = len(video["frames"])
        width, height = video["width"], video["height"]

        visible_masks: list[dict[int, np.ndarray]] = [{} for _ in range(num_frames)]
        for track in handle.tracks_by_video.get(video_id, []):
            tid = track["track_id"]
            segs = track["segmentations"]
            if len(segs) != num_frames:
                violations.append(
                    _record(
                        "bad_track_length", video_id, -1, [tid],
                        f"{len(segs)} segmentations for {num_frames} frames",
                    )
                )
                continue
            seen_visible = 0
            for frame_index, seg in enumerate(segs):
                if seg is None:
                    continue
                try:
                    mask = decode_counts(seg["counts"], width, height)
                except (SchemaError, KeyError, TypeError) as exc:
                    violations.append(
                        _record("decode_error", video_id, frame_index, [tid], str(exc))
                    )
                    continue
                if not mask.any():
                    violations.append(
                        _record("empty_visible_mask", video_id, frame_index, [tid], "all-zero mask")
                    )
                    continue
                seen_visible += 1
                visible_masks[frame_index][tid] = mask
            if seen_visible == 0:
                violations.append(
                    _record("no_visible_frame", video_id, -1, [tid], "track never visible")
                )

        for frame_index, by_track in enumerate(visible_masks):
            ids = sorted(by_track)
            for left in range(len(ids)):
                for right in range(left + 1, len(ids)):
                    a, b = ids[left], ids[right]
                    if bool((by_track[a] & by_track[b]).any()):
                        violations.append(
                            _record("overlap", video_id, frame_index, [a, b], "masks intersect")
                        )

    violations.sort(key=lambda v: (v["kind"], v["video_id"], v["frame"], v["tracks"]))
    return {
        "videos_checked": len(handle.videos),
        "tracks_checked": len(handle.manifest["tracks"]),
        "violations": violations,
    }
