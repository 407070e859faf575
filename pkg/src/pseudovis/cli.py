"""Command-line driver.

Subcommands: generate, validate, preview, mstm-check, print-config.
Configuration comes from an optional JSON file plus flags (flags win).
Exit codes: 0 success, 1 operational failure, 2 usage or config error.
PSEUDOVIS_LOG sets the log level (DEBUG/INFO/WARNING/...).
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import __version__
from .config import CliConfig, load_cli_config, resolve_pool
from .errors import ConfigError, ParseError, PseudoVisError
from .ingest import load_dataset
from .mstm import MstmConfig, load_weights, self_check
from .preview import render_preview, write_report_figure, write_summary_csv
from .synth import load_video, read_manifest, run_generation
from .validate import validate_dataset

log = logging.getLogger("pseudovis")


def _setup_logging() -> None:
    level = os.environ.get("PSEUDOVIS_LOG", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Pseudo-video dataset synthesis for video instance segmentation."""
    _setup_logging()


def _config_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON config file; flags override it."),
        click.option("--input-manifest", default=None, help="COCO-style annotation JSON."),
        click.option("--image-root", default=None, help="Directory image file names resolve against."),
        click.option("--out-dir", default=None, help="Output dataset directory."),
        click.option("--num-videos", type=int, default=None),
        click.option("--frames", "frames_t", type=int, default=None, help="Frames per pseudo-video."),
        click.option("--rotation-deg", type=float, default=None, help="Naive-video rotation range in degrees."),
        click.option("--vmosp-instances", type=int, default=None, help="Instances to splice per video."),
        click.option("--vmosp-probability", type=float, default=None),
        click.option("--cost-k", type=int, default=None, help="Max ops per consistent blend."),
        click.option("--cost-probability", type=float, default=None),
        click.option("--master-seed", type=int, default=None),
        click.option("--workers", type=int, default=None, help="Worker threads (0 = auto); never changes output bytes."),
        click.option("--pool-override", default=None, help="JSON file replacing the default augmentation pool."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _resolve(config_path: str | None, overrides: dict) -> tuple[CliConfig, list]:
    cfg = load_cli_config(config_path, overrides)
    pool = resolve_pool(cfg)
    cfg.gen.validate(len(pool))
    return cfg, pool


@main.command()
@_config_options
def generate(config_path, **overrides) -> None:
    """Generate a pseudo-video dataset (frames, manifest, summary, report)."""
    try:
        cfg, pool = _resolve(config_path, overrides)
        if not cfg.input_manifest or not cfg.out_dir:
            raise ConfigError("generate needs --input-manifest and --out-dir (or config values)")
    except (ConfigError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)

    try:
        dataset = load_dataset(cfg.input_manifest, cfg.image_root, cfg.category_filter)
        summary = run_generation(dataset, cfg, pool)
    except (PseudoVisError, OSError, ValueError) as exc:
        click.echo(f"generation failed: {exc}", err=True)
        sys.exit(1)

    out_dir = Path(cfg.out_dir)
    rows = [
        {
            "video_id": r.video_id,
            "image_id": r.image_id,
            "frames": len(r.entry.frame_paths) if r.entry else 0,
            "tracks": len(r.entry.video.tracks) if r.entry else 0,
            "status": "ok" if r.error is None else f"failed: {r.error}",
        }
        for r in sorted(summary.results, key=lambda r: r.video_id)
    ]
    write_summary_csv(rows, out_dir / "summary.csv")
    write_report_figure(summary.manifest, out_dir / "report.png")

    written = len(summary.results) - len(summary.failures)
    click.echo(
        f"videos written: {written}, tracks: {len(summary.manifest['tracks'])}, "
        f"failures: {len(summary.failures)}"
    )
    sys.exit(0 if not summary.failures else 1)


@main.command()
@click.argument("dataset_dir", type=click.Path(file_okay=False))
@click.option("--out", "report_path", default=None, help="Also write the JSON report here.")
def validate(dataset_dir, report_path) -> None:
    """Re-check every pseudo-video invariant of an emitted dataset."""
    manifest_path = Path(dataset_dir) / "manifest.json"
    if not manifest_path.is_file():
        click.echo(f"no manifest at {manifest_path}", err=True)
        sys.exit(2)
    try:
        report = validate_dataset(dataset_dir, read_manifest(dataset_dir))
    except (ParseError, json.JSONDecodeError) as exc:
        click.echo(f"unreadable manifest: {exc}", err=True)
        sys.exit(2)
    payload = json.dumps(report, sort_keys=True, indent=2)
    if report_path:
        Path(report_path).write_text(payload + "\n", encoding="utf-8")
    click.echo(payload)
    sys.exit(0 if not report["violations"] else 1)


@main.command()
@click.argument("dataset_dir", type=click.Path(file_okay=False))
@click.option("--video-id", type=int, required=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def preview(dataset_dir, video_id, out_path) -> None:
    """Render a contact-sheet strip of one emitted video with mask overlays."""
    manifest_path = Path(dataset_dir) / "manifest.json"
    if not manifest_path.is_file():
        click.echo(f"no manifest at {manifest_path}", err=True)
        sys.exit(2)
    manifest = read_manifest(dataset_dir)
    if not any(v["video_id"] == video_id for v in manifest["videos"]):
        click.echo(f"video {video_id} not in dataset", err=True)
        sys.exit(1)
    video = load_video(dataset_dir, manifest, video_id)
    render_preview(video, out_path)
    click.echo(f"wrote {out_path}")


@main.command("mstm-check")
@click.option("--dims", default="4,8,8,16", help="T,H,W,D for the invariant suite.")
@click.option("--window", type=int, default=4)
@click.option("--shift", type=int, default=2)
@click.option("--heads", type=int, default=4)
@click.option("--layers", type=int, default=2)
@click.option("--gru-layers", type=int, default=2)
@click.option("--gru-kernel", type=int, default=3)
@click.option("--golden", "golden_path", default=None, type=click.Path(dir_okay=False), help="Alternate golden fixture file.")
@click.option("--weights", "weights_path", default=None, type=click.Path(dir_okay=False), help="Run with weights from a sidecar instead of seeded ones.")
def mstm_check(dims, window, shift, heads, layers, gru_layers, gru_kernel, golden_path, weights_path) -> None:
    """Run the temporal-kernel invariant suite and print pass/fail lines."""
    try:
        parsed = tuple(int(x) for x in dims.split(","))
        if len(parsed) != 4:
            raise ValueError("need exactly four comma-separated dims")
        cfg = MstmConfig(
            window=window, shift=shift, heads=heads, layers=layers,
            gru_layers=gru_layers, gru_kernel=gru_kernel,
        )
        if parsed[3] % cfg.heads != 0:
            raise ConfigError(f"D={parsed[3]} not divisible by heads={cfg.heads}")
        weights = None
        if weights_path:
            weights, cfg = load_weights(weights_path)
            if weights.channels != parsed[3]:
                raise ConfigError(
                    f"sidecar has {weights.channels} channels, dims say {parsed[3]}"
                )
    except (ValueError, ConfigError, PseudoVisError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)

    results = self_check(dims=parsed, cfg=cfg, golden_path=golden_path, weights=weights)
    failed = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        failed += 0 if result.passed else 1
        click.echo(f"{status} {result.name}: {result.detail}")
    click.echo(f"{len(results) - failed}/{len(results)} invariants passed")
    sys.exit(0 if failed == 0 else 1)


@main.command("print-config")
@_config_options
def print_config(config_path, **overrides) -> None:
    """Print the fully-resolved configuration as JSON."""
    try:
        cfg, _pool = _resolve(config_path, overrides)
    except (ConfigError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    click.echo(json.dumps(cfg.to_dict(), sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
