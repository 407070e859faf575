"""Temporally-consistent pseudo-video dataset synthesis.

Turns COCO-style annotated still images into short clips with persistent
instance tracks: consistent stochastic augmentation blends, morph & splice
instance duplication with occlusion-aware masks, deterministic seeded
generation, and a float64 numeric reference of the multi-scale temporal
module (shift-window attention + ConvGRU).
"""

__version__ = "0.1.0"

from .augment_pool import AugOpSpec, CostBlend, apply_cost_blend, apply_op, default_pool, sample_cost_blend
from .config import CliConfig, GenConfig
from .ingest import AnnotatedDataset, AnnotatedImage, InstanceAnnotation, load_dataset
from .masks import decode_mask, encode_mask
from .synth import derive_seed, generate_pseudo_video, run_generation, write_dataset
from .vmosp import (
    InstanceLayer,
    MorphBounds,
    MorphSchedule,
    PseudoVideo,
    Track,
    extract_instance,
    make_naive_video,
    sample_morph_schedule,
    splice_frame,
    splice_instances,
    vmosp_augment,
    warp_layer,
)

__all__ = [
    "AnnotatedDataset",
    "AnnotatedImage",
    "AugOpSpec",
    "CliConfig",
    "CostBlend",
    "GenConfig",
    "InstanceAnnotation",
    "InstanceLayer",
    "MorphBounds",
    "MorphSchedule",
    "PseudoVideo",
    "Track",
    "apply_cost_blend",
    "apply_op",
    "decode_mask",
    "default_pool",
    "derive_seed",
    "encode_mask",
    "extract_instance",
    "generate_pseudo_video",
    "load_dataset",
    "make_naive_video",
    "run_generation",
    "sample_cost_blend",
    "sample_morph_schedule",
    "splice_frame",
    "splice_instances",
    "vmosp_augment",
    "warp_layer",
    "write_dataset",
]
