"""Dataset-scale pseudo-video generation and emission.

Every video job is driven by its own seed, derived from the master seed
with a splitmix64 avalanche mix of ``master ^ video_index``, so output is
independent of worker scheduling. One job consumes randomness in a fixed
documented order: naive-rotation angles, the morph-splice gate, splice
draws, the consistent-blend gate, blend draws.

Emitted layout:

  out_dir/
    videos/<video_id:06d>/<frame:03d>.png   lossless frames
    manifest.json                           videos, tracks, categories,
                                            generator fingerprint
    summary.csv                             one row per video job
    report.png                              generation statistics figure

Masks are embedded in the manifest as uncompressed run-length records
(null where a track is not visible); the manifest is serialized with
sorted keys so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .augment_pool import AugOpSpec, apply_cost_blend, default_pool, sample_cost_blend
from .config import CliConfig, GenConfig, config_hash
from .ingest import AnnotatedDataset, AnnotatedImage
from .masks import decode_mask, encode_mask
from .vmosp import PseudoVideo, Track, make_naive_video, splice_instances

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, video_index: int) -> int:
    """Per-video seed: splitmix64 avalanche of master ^ index.

    splitmix64 is a bijection on 64-bit words, so for a fixed master seed
    distinct indices can never collide.
    """
    return _splitmix64((master_seed ^ video_index) & _MASK64)


def generate_pseudo_video(
    sample: AnnotatedImage,
    cfg: GenConfig,
    seed: int,
    pool: list[AugOpSpec] | None = None,
) -> PseudoVideo:
    """Generate one pseudo-video from one annotated image.

    rng consumption order: T rotation angles, one uniform gate draw for
    morph-splice, the splice draws, one gate draw for the consistent
    blend, the blend draws. Images without instances skip the splice stage
    (the gate draw is still consumed).
    """
    if pool is None:
        pool = default_pool(rotation_deg=cfg.rotation_deg)
    rng = np.random.default_rng(np.random.PCG64(seed))
    video = make_naive_video(sample, cfg.frames_t, cfg.rotation_deg, rng)
    if rng.random() < cfg.vmosp_probability and sample.instances:
        bounds = cfg.morph_bounds(sample.height, sample.width)
        video = splice_instances(video, sample, cfg.vmosp_instances, rng, bounds)
    if rng.random() < cfg.cost_probability:
        blend = sample_cost_blend(rng, pool, cfg.cost_k)
        video = apply_cost_blend(video, blend)
    return video


# --- emission ---------------------------------------------------------------


def frame_rel_path(video_id: int, frame_index: int) -> str:
    return f"videos/{video_id:06d}/{frame_index:03d}.png"


def write_video_frames(video: PseudoVideo, video_id: int, out_dir: Path) -> list[str]:
    video_dir = out_dir / "videos" / f"{video_id:06d}"
    video_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t, frame in enumerate(video.frames):
        rel = frame_rel_path(video_id, t)
        Image.fromarray(frame).save(out_dir / rel)
        paths.append(rel)
    return paths


@dataclass
class VideoEntry:
    video_id: int
    video: PseudoVideo
    frame_paths: list[str]


def build_manifest(
    entries: list[VideoEntry], categories: dict[int, str], cfg: GenConfig
) -> dict:
    videos = []
    tracks = []
    for entry in sorted(entries, key=lambda e: e.video_id):
        video = entry.video
        videos.append(
            {
                "video_id": entry.video_id,
                "width": video.width,
                "height": video.height,
                "source_image_id": video.source_image_id,
                "frames": entry.frame_paths,
            }
        )
        for tid in sorted(video.tracks):
            track = video.tracks[tid]
            tracks.append(
                {
                    "track_id": tid,
                    "video_id": entry.video_id,
                    "category_id": track.category_id,
                    "segmentations": [
                        None if m is None else encode_mask(m) for m in track.masks
                    ],
                }
            )
    return {
        "fingerprint": {
            "tool_version": __version__,
            "master_seed": cfg.master_seed,
            "config_hash": config_hash(cfg),
        },
        "categories": [{"id": i, "name": categories[i]} for i in sorted(categories)],
        "videos": videos,
        "tracks": tracks,
    }


def write_manifest(manifest: dict, out_dir: Path) -> Path:
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def write_dataset(
    videos: list[PseudoVideo],
    out_dir: str | Path,
    categories: dict[int, str] | None = None,
    cfg: GenConfig | None = None,
) -> dict:
    """Write frames plus manifest for already-generated videos (sequential).

    Video ids are positional. On failure the partially-written videos/
    tree and manifest are removed before the error propagates.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = cfg or GenConfig()
    categories = categories or {}
    created: list[Path] = []
    try:
        entries = []
        for video_id, video in enumerate(videos):
            paths = write_video_frames(video, video_id, out_dir)
            created.append(out_dir / "videos" / f"{video_id:06d}")
            entries.append(VideoEntry(video_id, video, paths))
        manifest = build_manifest(entries, categories, cfg)
        created.append(write_manifest(manifest, out_dir))
        return manifest
    except Exception:
        for path in created:
            if path.is_dir():
                shutil.rmtree(path, ignore_errors=True)
            else:
                path.unlink(missing_ok=True)
        raise


# --- dataset-scale run -------------------------------------------------------


@dataclass
class JobResult:
    video_id: int
    image_id: int
    entry: VideoEntry | None
    error: str | None


@dataclass
class RunSummary:
    manifest: dict
    results: list[JobResult]

    @property
    def failures(self) -> list[JobResult]:
        return [r for r in self.results if r.error is not None]


def run_generation(
    dataset: AnnotatedDataset,
    cfg: CliConfig,
    pool: list[AugOpSpec] | None = None,
) -> RunSummary:
    """Generate cfg.gen.num_videos pseudo-videos into cfg.out_dir.

    Source images are drawn round-robin in image-id order. Jobs run on a
    bounded thread pool; each job writes its own frames, and the manifest
    is assembled after all jobs finish, so output bytes are invariant to
    the worker count. A failed job has its partial frames removed and is
    reported in the summary instead of aborting the run.
    """
    if not dataset.images:
        raise ValueError("input dataset has no images")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gen = cfg.gen

    def job(video_id: int) -> JobResult:
        image = dataset.images[video_id % len(dataset.images)]
        try:
            seed = derive_seed(gen.master_seed, video_id)
            video = generate_pseudo_video(image, gen, seed, pool)
            paths = write_video_frames(video, video_id, out_dir)
            log.info("video %06d from image %s: %d tracks", video_id, image.image_id, len(video.tracks))
            return JobResult(video_id, image.image_id, VideoEntry(video_id, video, paths), None)
        except Exception as exc:  # job isolation: one bad job must not sink the run
            shutil.rmtree(out_dir / "videos" / f"{video_id:06d}", ignore_errors=True)
            log.error("video %06d from image %s failed: %s", video_id, image.image_id, exc)
            return JobResult(video_id, image.image_id, None, f"{type(exc).__name__}: {exc}")

    workers = cfg.workers if cfg.workers > 0 else None
    if gen.num_videos == 0:
        results: list[JobResult] = []
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            results = list(pool_exec.map(job, range(gen.num_videos)))

    entries = [r.entry for r in results if r.entry is not None]
    manifest = build_manifest(entries, dataset.categories, gen)
    write_manifest(manifest, out_dir)
    return RunSummary(manifest=manifest, results=results)


# --- reading emitted datasets back -------------------------------------------


def read_manifest(dataset_dir: str | Path) -> dict:
    with open(Path(dataset_dir) / "manifest.json", "r", encoding="utf-8") as f:
        return json.load(f)


def load_video(dataset_dir: str | Path, manifest: dict, video_id: int) -> PseudoVideo:
    """Reconstruct a PseudoVideo from emitted frames and manifest masks."""
    dataset_dir = Path(dataset_dir)
    record = next(v for v in manifest["videos"] if v["video_id"] == video_id)
    frames = []
    for rel in record["frames"]:
        with Image.open(dataset_dir / rel) as img:
            frames.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
    tracks = {}
    for tr in manifest["tracks"]:
        if tr["video_id"] != video_id:
            continue
        masks = [
            None if seg is None else decode_mask(seg, record["width"], record["height"])
            for seg in tr["segmentations"]
        ]
        tracks[tr["track_id"]] = Track(tr["category_id"], masks)
    return PseudoVideo(frames=frames, tracks=tracks, source_image_id=record.get("source_image_id", -1))
