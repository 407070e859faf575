"""Generation configuration: one JSON schema shared by library and CLI.

GenConfig covers everything that determines generated bytes; CliConfig
adds paths and the worker count (which by design never changes output).
Flag overrides win over config-file values.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .augment_pool import AugOpSpec, default_pool
from .errors import ConfigError
from .vmosp import MorphBounds


@dataclass(frozen=True)
class GenConfig:
    frames_t: int = 3
    cost_k: int = 3
    cost_probability: float = 0.5
    vmosp_probability: float = 0.5
    vmosp_instances: int = 2
    rotation_deg: float = 15.0
    morph_scale_max: float = 0.1
    morph_rot_max: float = 15.0
    morph_translate_max: float = 0.1  # fraction of canvas per endpoint
    morph_independent: bool = False
    num_videos: int = 10
    master_seed: int = 0

    def validate(self, pool_size: int) -> None:
        if self.frames_t < 1:
            raise ConfigError(f"frames_t must be >= 1, got {self.frames_t}")
        for name in ("cost_probability", "vmosp_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if self.cost_k < 0 or self.cost_k > pool_size:
            raise ConfigError(
                f"cost_k must be in [0, pool size={pool_size}], got {self.cost_k}"
            )
        if self.vmosp_instances < 1:
            raise ConfigError(f"vmosp_instances must be >= 1, got {self.vmosp_instances}")
        if self.num_videos < 0:
            raise ConfigError(f"num_videos must be >= 0, got {self.num_videos}")
        if self.rotation_deg < 0:
            raise ConfigError(f"rotation_deg must be >= 0, got {self.rotation_deg}")
        if not 0.0 <= self.morph_scale_max < 1.0:
            raise ConfigError(f"morph_scale_max must be in [0, 1), got {self.morph_scale_max}")
        if self.morph_rot_max < 0 or self.morph_translate_max < 0:
            raise ConfigError("morph bounds must be non-negative")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")

    def morph_bounds(self, height: int, width: int) -> MorphBounds:
        return MorphBounds(
            scale_max=self.morph_scale_max,
            rot_max=self.morph_rot_max,
            translate_max_x=self.morph_translate_max * width,
            translate_max_y=self.morph_translate_max * height,
            independent=self.morph_independent,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


GEN_FIELDS = {f.name for f in dataclasses.fields(GenConfig)}


def config_hash(cfg: GenConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class CliConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    input_manifest: str | None = None
    image_root: str | None = None
    out_dir: str | None = None
    workers: int = 0  # 0 = available parallelism
    pool_override: str | None = None
    category_filter: list[int] | None = None

    def to_dict(self) -> dict:
        out = self.gen.to_dict()
        out.update(
            input_manifest=self.input_manifest,
            image_root=self.image_root,
            out_dir=self.out_dir,
            workers=self.workers,
            pool_override=self.pool_override,
            category_filter=self.category_filter,
        )
        return out


def load_pool_override(path: str | Path) -> list[AugOpSpec]:
    with open(path, "r", encoding="utf-8") as f:
        records = json.load(f)
    if not isinstance(records, list):
        raise ConfigError(f"pool override {path} must be a JSON list")
    pool = []
    for rec in records:
        try:
            lo, hi = rec["magnitude_range"]
            pool.append(AugOpSpec(rec["kind"], (float(lo), float(hi))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad pool entry {rec!r}: {exc}") from exc
    return pool


def resolve_pool(cfg: CliConfig) -> list[AugOpSpec]:
    if cfg.pool_override:
        return load_pool_override(cfg.pool_override)
    return default_pool(rotation_deg=cfg.gen.rotation_deg)


def load_cli_config(path: str | Path | None, overrides: dict | None = None) -> CliConfig:
    """Build a CliConfig from an optional JSON file plus overrides (flags win)."""
    values: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            try:
                values = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")

    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    cli_keys = {"input_manifest", "image_root", "out_dir", "workers", "pool_override", "category_filter"}
    unknown = set(values) - GEN_FIELDS - cli_keys
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    gen = GenConfig(**{k: v for k, v in values.items() if k in GEN_FIELDS})
    cli = CliConfig(gen=gen, **{k: v for k, v in values.items() if k in cli_keys})
    return cli
