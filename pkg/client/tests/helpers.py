"""Fixture helpers for the client test suite.

Datasets are produced through the generator's command-line interface, the
same external surface a training stack would consume.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
from PIL import Image


def write_source_dataset(root: Path, n_images: int = 2, size=(48, 64)) -> Path:
    """Write a small COCO-style source dataset; returns the manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(404)
    height, width = size
    images = []
    annotations = []
    ann_id = 1
    for image_id in range(1, n_images + 1):
        pixels = rng.integers(0, 256, (height, width, 3), dtype=np.uint8)
        name = f"src_{image_id:03d}.png"
        Image.fromarray(pixels).save(root / name)
        images.append(
            {"id": image_id, "file_name": name, "width": width, "height": height}
        )
        for (r0, r1, c0, c1) in ((4, height // 2, 4, width // 2), (height // 2 + 2, height - 4, width // 2 + 2, width - 4)):
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": image_id,
                    "category_id": ann_id % 2 + 1,
                    "segmentation": [[c0, r0, c1, r0, c1, r1, c0, r1]],
                }
            )
            ann_id += 1
    manifest = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "a"}, {"id": 2, "name": "b"}],
    }
    path = root / "annotations.json"
    path.write_text(json.dumps(manifest), encoding="utf-8")
    return path


def run_generator(*args: str) -> subprocess.CompletedProcess:
    """Invoke the generator CLI in a subprocess."""
    return subprocess.run(
        [sys.executable, "-m", "pseudovis.cli", *args],
        capture_output=True,
        text=True,
    )


def generate_dataset(source_manifest: Path, out_dir: Path, num_videos: int = 4, seed: int = 20240814) -> None:
    result = run_generator(
        "generate",
        "--input-manifest", str(source_manifest),
        "--out-dir", str(out_dir),
        "--num-videos", str(num_videos),
        "--frames", "3",
        "--rotation-deg", "15",
        "--vmosp-instances", "2",
        "--master-seed", str(seed),
    )
    assert result.returncode == 0, result.stderr + result.stdout
