import json

import numpy as np
import pytest
from click.testing import CliRunner

from pseudovis.cli import main
from pseudovis.synth import read_manifest

from helpers import write_coco_fixture


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def coco_dir(tmp_path):
    rng = np.random.default_rng(1)
    images = []
    annotations = []
    ann_id = 1
    for image_id in (1, 2):
        pixels = rng.integers(0, 256, (24, 32, 3), dtype=np.uint8)
        images.append({"id": image_id, "pixels": pixels})
        for (r0, r1, c0, c1) in [(2, 10, 2, 14), (14, 22, 18, 30)]:
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": image_id,
                    "category_id": ann_id % 2 + 1,
                    "segmentation": [[c0, r0, c1, r0, c1, r1, c0, r1]],
                }
            )
            ann_id += 1
    manifest_path = write_coco_fixture(tmp_path / "src", images, annotations)
    return manifest_path


def _generate(runner, coco_dir, out_dir, *extra):
    return runner.invoke(
        main,
        [
            "generate",
            "--input-manifest", str(coco_dir),
            "--out-dir", str(out_dir),
            "--num-videos", "3",
            "--master-seed", "7",
            *extra,
        ],
    )


class TestGenerate:
    def test_zero_videos_exits_clean(self, runner, coco_dir, tmp_path):
        result = runner.invoke(
            main,
            ["generate", "--input-manifest", str(coco_dir), "--out-dir", str(tmp_path / "o"), "--num-videos", "0"],
        )
        assert result.exit_code == 0, result.output
        manifest = read_manifest(tmp_path / "o")
        assert manifest["videos"] == []

    def test_run_writes_dataset_summary_and_report(self, runner, coco_dir, tmp_path):
        out = tmp_path / "out"
        result = _generate(runner, coco_dir, out)
        assert result.exit_code == 0, result.output
        assert "videos written: 3" in result.output
        assert (out / "manifest.json").is_file()
        assert (out / "summary.csv").is_file()
        assert (out / "report.png").is_file()
        assert (out / "videos" / "000000" / "000.png").is_file()
        summary = (out / "summary.csv").read_text().strip().splitlines()
        assert summary[0] == "video_id,image_id,frames,tracks,status"
        assert len(summary) == 4

    def test_paper_settings_flags(self, runner, coco_dir, tmp_path):
        result = _generate(
            runner, coco_dir, tmp_path / "o",
            "--frames", "3", "--rotation-deg", "15", "--vmosp-instances", "2",
        )
        assert result.exit_code == 0, result.output

    def test_bad_config_exits_two(self, runner, coco_dir, tmp_path):
        result = _generate(runner, coco_dir, tmp_path / "o", "--cost-probability", "1.5")
        assert result.exit_code == 2
        assert "config error" in result.output

    def test_missing_required_paths_exits_two(self, runner):
        result = runner.invoke(main, ["generate", "--num-videos", "1"])
        assert result.exit_code == 2

    def test_unloadable_input_exits_one(self, runner, tmp_path):
        manifest = tmp_path / "bad.json"
        manifest.write_text(json.dumps({"images": [{"id": 1, "file_name": "gone.png"}], "annotations": [], "categories": []}))
        result = runner.invoke(
            main,
            ["generate", "--input-manifest", str(manifest), "--out-dir", str(tmp_path / "o"), "--num-videos", "1"],
        )
        assert result.exit_code == 1
        assert "generation failed" in result.output

    def test_flags_win_over_config_file(self, runner, coco_dir, tmp_path):
        config = {"num_videos": 99, "frames_t": 4, "master_seed": 1}
        config_path = tmp_path / "cfg.json"
        config_path.write_text(json.dumps(config))
        result = runner.invoke(
            main,
            [
                "generate",
                "--config", str(config_path),
                "--input-manifest", str(coco_dir),
                "--out-dir", str(tmp_path / "o"),
                "--num-videos", "2",
            ],
        )
        assert result.exit_code == 0, result.output
        manifest = read_manifest(tmp_path / "o")
        assert len(manifest["videos"]) == 2  # flag beat the config file
        assert len(manifest["videos"][0]["frames"]) == 4  # config file survived


class TestValidate:
    def test_fresh_dataset_is_clean(self, runner, coco_dir, tmp_path):
        out = tmp_path / "out"
        assert _generate(runner, coco_dir, out).exit_code == 0
        result = runner.invoke(main, ["validate", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["violations"] == []

    def test_corrupted_rle_reported(self, runner, coco_dir, tmp_path):
        out = tmp_path / "out"
        assert _generate(runner, coco_dir, out).exit_code == 0
        manifest = read_manifest(out)
        for seg in manifest["tracks"][0]["segmentations"]:
            if seg is not None:
                seg["counts"][0] += 3  # break the sum invariant
                break
        (out / "manifest.json").write_text(json.dumps(manifest))
        result = runner.invoke(main, ["validate", str(out)])
        assert result.exit_code == 1
        report = json.loads(result.output)
        kinds = {v["kind"] for v in report["violations"]}
        assert "decode_error" in kinds

    def test_injected_overlap_names_video_frame_and_pair(self, runner, coco_dir, tmp_path):
        out = tmp_path / "out"
        assert _generate(runner, coco_dir, out).exit_code == 0
        manifest = read_manifest(out)
        donor = next(
            tr for tr in manifest["tracks"] if any(s is not None for s in tr["segmentations"])
        )
        clone = json.loads(json.dumps(donor))
        clone["track_id"] = 9999
        manifest["tracks"].append(clone)
        (out / "manifest.json").write_text(json.dumps(manifest))
        result = runner.invoke(main, ["validate", str(out)])
        assert result.exit_code == 1
        report = json.loads(result.output)
        overlaps = [v for v in report["violations"] if v["kind"] == "overlap"]
        assert overlaps
        frame_idx = next(i for i, s in enumerate(donor["segmentations"]) if s is not None)
        assert any(
            v["video_id"] == donor["video_id"]
            and v["frame"] == frame_idx
            and v["tracks"] == sorted([donor["track_id"], 9999])
            for v in overlaps
        )

    def test_missing_manifest_exits_two(self, runner, tmp_path):
        result = runner.invoke(main, ["validate", str(tmp_path / "nowhere")])
        assert result.exit_code == 2

    def test_missing_frame_file_reported(self, runner, coco_dir, tmp_path):
        out = tmp_path / "out"
        assert _generate(runner, coco_dir, out).exit_code == 0
        (out / "videos" / "000001" / "001.png").unlink()
        result = runner.invoke(main, ["validate", str(out)])
        assert result.exit_code == 1
        report = json.loads(result.output)
        assert any(v["kind"] == "missing_frame_file" for v in report["violations"])


class TestPreview:
    def test_preview_writes_strip(self, runner, coco_dir, tmp_path):
        out = tmp_path / "out"
        assert _generate(runner, coco_dir, out).exit_code == 0
        strip = tmp_path / "strip.png"
        result = runner.invoke(main, ["preview", str(out), "--video-id", "0", "--out", str(strip)])
        assert result.exit_code == 0, result.output
        from PIL import Image

        manifest = read_manifest(out)
        with Image.open(strip) as img:
            video = manifest["videos"][0]
            assert img.size == (video["width"] * len(video["frames"]), video["height"])

    def test_unknown_video_exits_one(self, runner, coco_dir, tmp_path):
        out = tmp_path / "out"
        assert _generate(runner, coco_dir, out).exit_code == 0
        result = runner.invoke(main, ["preview", str(out), "--video-id", "42", "--out", str(tmp_path / "x.png")])
        assert result.exit_code == 1


class TestMstmCheck:
    def test_default_run_passes(self, runner):
        result = runner.invoke(main, ["mstm-check"])
        assert result.exit_code == 0, result.output
        assert "FAIL" not in result.output
        assert "golden_fixture" in result.output

    def test_dims_flag(self, runner):
        result = runner.invoke(main, ["mstm-check", "--dims", "4,8,8,16"])
        assert result.exit_code == 0, result.output

    def test_corrupted_golden_fails_fixture_only(self, runner, tmp_path):
        from pseudovis.mstm import golden_fixture_path

        with np.load(golden_fixture_path()) as archive:
            data = dict(archive)
        data["output"] = data["output"] + 1e-6
        bad = tmp_path / "bad_golden.npz"
        np.savez(bad, **data)
        result = runner.invoke(main, ["mstm-check", "--golden", str(bad)])
        assert result.exit_code == 1
        lines = result.output.splitlines()
        assert any(line.startswith("FAIL golden_fixture") for line in lines)
        assert sum(1 for line in lines if line.startswith("FAIL")) == 1

    def test_bad_dims_exit_two(self, runner):
        result = runner.invoke(main, ["mstm-check", "--dims", "4,8,8"])
        assert result.exit_code == 2

    def test_weights_sidecar_accepted(self, runner, tmp_path):
        from pseudovis.mstm import MstmConfig, dump_weights, init_weights

        cfg = MstmConfig()
        path = tmp_path / "w.mstm"
        dump_weights(init_weights(cfg, 16, 3), cfg, path)
        result = runner.invoke(main, ["mstm-check", "--weights", str(path)])
        assert result.exit_code == 0, result.output


class TestPrintConfig:
    def test_defaults_are_json(self, runner):
        result = runner.invoke(main, ["print-config"])
        assert result.exit_code == 0
        config = json.loads(result.output)
        assert config["frames_t"] == 3
        assert config["rotation_deg"] == 15.0
        assert config["vmosp_instances"] == 2
        assert config["cost_k"] == 3

    def test_flag_order_independent(self, runner):
        a = runner.invoke(main, ["print-config", "--frames", "5", "--master-seed", "9"])
        b = runner.invoke(main, ["print-config", "--master-seed", "9", "--frames", "5"])
        assert a.output == b.output


def test_unknown_subcommand_exits_two(runner):
    assert runner.invoke(main, ["frobnicate"]).exit_code == 2
