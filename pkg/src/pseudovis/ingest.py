"""COCO-style dataset ingestion.

Expects a JSON manifest with ``images`` ({id, file_name, width, height}),
``annotations`` ({id, image_id, category_id, segmentation}) and
``categories`` ({id, name}); image files are resolved against an image
root directory. The loaded dataset is immutable and ordered (images by id,
annotations by id within each image), so repeated loads of the same files
produce identical in-memory structures.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ParseError
from .masks import decode_mask

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InstanceAnnotation:
    instance_id: int
    category_id: int
    mask: np.ndarray  # H×W bool, non-empty


@dataclass(frozen=True)
class AnnotatedImage:
    image_id: int
    pixels: np.ndarray  # H×W×3 uint8
    instances: list[InstanceAnnotation]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def instance(self, instance_id: int) -> InstanceAnnotation:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        raise KeyError(f"image {self.image_id} has no instance {instance_id}")


@dataclass(frozen=True)
class AnnotatedDataset:
    images: list[AnnotatedImage]
    categories: dict[int, str]
    warnings: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.images)


def _require(record: dict, key: str, context: str):
    if key not in record:
        raise ParseError(f"{context} is missing required key {key!r}: {record}")
    return record[key]


def load_image(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def load_dataset(
    manifest_path: str | Path,
    image_root: str | Path | None = None,
    category_filter: list[int] | None = None,
) -> AnnotatedDataset:
    """Load a COCO-style manifest into an AnnotatedDataset.

    Annotations referencing unknown image ids and annotations whose decoded
    mask is empty are dropped; the counts land in ``dataset.warnings``.
    An optional ``category_filter`` keeps only annotations with the listed
    category ids.
    """
    manifest_path = Path(manifest_path)
    root = Path(image_root) if image_root is not None else manifest_path.parent
    with open(manifest_path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{manifest_path} is not valid JSON: {exc}") from exc

    for key in ("images", "annotations", "categories"):
        _require(raw, key, f"manifest {manifest_path}")

    categories = {
        int(_require(c, "id", "category record")): str(_require(c, "name", "category record"))
        for c in raw["categories"]
    }
    keep = set(int(c) for c in category_filter) if category_filter else None

    image_records = {}
    for rec in raw["images"]:
        image_id = int(_require(rec, "id", "image record"))
        if image_id in image_records:
            raise ParseError(f"duplicate image id {image_id}")
        image_records[image_id] = rec

    anns_by_image: dict[int, list[dict]] = {i: [] for i in image_records}
    dropped_missing = 0
    dropped_filtered = 0
    for ann in raw["annotations"]:
        image_id = int(_require(ann, "image_id", "annotation record"))
        _require(ann, "segmentation", f"annotation {ann.get('id')}")
        if image_id not in anns_by_image:
            dropped_missing += 1
            continue
        if keep is not None and int(_require(ann, "category_id", "annotation record")) not in keep:
            dropped_filtered += 1
            continue
        anns_by_image[image_id].append(ann)

    images = []
    dropped_empty = 0
    for image_id in sorted(image_records):
        rec = image_records[image_id]
        pixels = load_image(root / _require(rec, "file_name", f"image {image_id}"))
        h, w = pixels.shape[:2]
        if "width" in rec and (int(rec["width"]) != w or int(rec["height"]) != h):
            raise ParseError(
                f"image {image_id}: file is {w}x{h} but manifest says "
                f"{rec['width']}x{rec['height']}"
            )
        instances = []
        seen_ids = set()
        for ann in sorted(anns_by_image[image_id], key=lambda a: int(a["id"])):
            ann_id = int(ann["id"])
            if ann_id in seen_ids:
                raise ParseError(f"duplicate annotation id {ann_id} on image {image_id}")
            seen_ids.add(ann_id)
            mask = decode_mask(ann["segmentation"], w, h)
            if not mask.any():
                dropped_empty += 1
                continue
            mask.setflags(write=False)
            instances.append(
                InstanceAnnotation(
                    instance_id=ann_id,
                    category_id=int(_require(ann, "category_id", f"annotation {ann_id}")),
                    mask=mask,
                )
            )
        pixels.setflags(write=False)
        images.append(AnnotatedImage(image_id=image_id, pixels=pixels, instances=instances))

    warnings = {}
    if dropped_missing:
        warnings["dropped_missing_image"] = dropped_missing
    if dropped_empty:
        warnings["dropped_empty_mask"] = dropped_empty
    if dropped_filtered:
        warnings["dropped_by_category_filter"] = dropped_filtered
    for key, count in warnings.items():
        log.warning("load_dataset: %s=%d", key, count)
    return AnnotatedDataset(images=images, categories=categories, warnings=warnings)
