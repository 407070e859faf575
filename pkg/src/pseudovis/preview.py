"""Preview strips and generation reports.

The preview is a pixel-exact horizontal strip (frames left to right) with
track masks alpha-blended in fixed palette colors, so two renders of the
same video are byte-identical. The generation report is a summary.csv
(one row per video job) plus a matplotlib figure with track counts and
mask-area statistics.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib
import numpy as np
from PIL import Image

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .vmosp import PseudoVideo  # noqa: E402

# 16 fixed overlay colors; a track uses PALETTE[track_id % 16].
PALETTE = np.array(
    [
        (230, 25, 75),
        (60, 180, 75),
        (255, 225, 25),
        (0, 130, 200),
        (245, 130, 48),
        (145, 30, 180),
        (70, 240, 240),
        (240, 50, 230),
        (210, 245, 60),
        (250, 190, 190),
        (0, 128, 128),
        (230, 190, 255),
        (170, 110, 40),
        (255, 250, 200),
        (128, 0, 0),
        (170, 255, 195),
    ],
    dtype=np.uint8,
)


def track_color(track_id: int) -> np.ndarray:
    return PALETTE[track_id % len(PALETTE)]


def overlay_tracks(frame: np.ndarray, masks: dict[int, np.ndarray | None]) -> np.ndarray:
    """Blend each visible mask into the frame at 50% of its track color."""
    out = frame.astype(np.uint16)
    for tid in sorted(masks):
        mask = masks[tid]
        if mask is None:
            continue
        color = track_color(tid).astype(np.uint16)
        out[mask] = (out[mask] + color + 1) // 2
    return out.astype(np.uint8)


def render_preview(video: PseudoVideo, out_path: str | Path) -> Path:
    """Write a horizontal contact-sheet strip of the video with mask overlays."""
    panels = []
    for t, frame in enumerate(video.frames):
        masks = {tid: tr.masks[t] for tid, tr in video.tracks.items()}
        panels.append(overlay_tracks(frame, masks))
    strip = np.concatenate(panels, axis=1)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(strip).save(out_path)
    return out_path


def write_summary_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    fields = ["video_id", "image_id", "frames", "tracks", "status"]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
    return path


def write_report_figure(manifest: dict, path: str | Path) -> Path:
    """Render generation statistics (tracks per video, mask area spread)."""
    track_counts: dict[int, int] = {v["video_id"]: 0 for v in manifest["videos"]}
    area_fractions = []
    sizes = {v["video_id"]: (v["height"], v["width"]) for v in manifest["videos"]}
    for tr in manifest["tracks"]:
        track_counts[tr["video_id"]] += 1
        h, w = sizes[tr["video_id"]]
        for seg in tr["segmentations"]:
            if seg is not None:
                area_fractions.append(sum(seg["counts"][1::2]) / (h * w))

    fig, (ax_tracks, ax_area) = plt.subplots(1, 2, figsize=(10, 4))
    if track_counts:
        ids = sorted(track_counts)
        ax_tracks.bar(ids, [track_counts[i] for i in ids], color="#0082c8")
    ax_tracks.set_xlabel("video id")
    ax_tracks.set_ylabel("tracks")
    ax_tracks.set_title("Tracks per video")
    if area_fractions:
        ax_area.hist(area_fractions, bins=20, color="#3cb44b")
    ax_area.set_xlabel("visible mask area / canvas")
    ax_area.set_ylabel("track-frames")
    ax_area.set_title("Mask area distribution")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path
