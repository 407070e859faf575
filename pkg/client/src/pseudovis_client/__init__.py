"""Reference consumer for pseudo-video datasets.

Reads exactly the generator's on-disk contract (manifest.json plus PNG
frames), decodes the embedded run-length masks, iterates contiguous
clips, and independently re-validates the dataset invariants. Kept
dependency-light (numpy + Pillow + stdlib) so it can be vendored into
training repositories.
"""

__version__ = "0.1.0"

from .dataset import ClipSample, DatasetHandle, SchemaError, decode_counts, iterate_clips, open_dataset
from .revalidate import revalidate

__all__ = [
    "ClipSample",
    "DatasetHandle",
    "SchemaError",
    "decode_counts",
    "iterate_clips",
    "open_dataset",
    "revalidate",
]
