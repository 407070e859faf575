import json

import numpy as np

from pseudovis.config import CliConfig, GenConfig
from pseudovis.ingest import load_dataset
from pseudovis.preview import PALETTE, render_preview, track_color
from pseudovis.synth import (
    derive_seed,
    generate_pseudo_video,
    load_video,
    read_manifest,
    run_generation,
    write_dataset,
)
from pseudovis.vmosp import make_naive_video

from helpers import make_annotated_image, write_coco_fixture


class TestDeriveSeed:
    def test_pinned_golden_value(self):
        # first splitmix64 output from state 0, the mixer's documented constant
        assert derive_seed(0, 0) == 0xE220A8397B1DCDAF

    def test_stable_across_calls(self):
        assert derive_seed(123456789, 42) == derive_seed(123456789, 42)

    def test_no_collisions_over_a_million_indices(self):
        # vectorized independent re-implementation of the mixer
        indices = np.arange(1_000_000, dtype=np.uint64)
        master = np.uint64(0x9A3C0FFEE1234567)
        x = (indices ^ master) + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
        assert np.unique(x).size == indices.size
        for i in (0, 1, 31337, 999_999):
            assert int(x[i]) == derive_seed(0x9A3C0FFEE1234567, i)


class TestGeneratePseudoVideo:
    def test_zero_probabilities_give_naive_video(self):
        image = make_annotated_image(np.random.default_rng(0))
        cfg = GenConfig(cost_probability=0.0, vmosp_probability=0.0, rotation_deg=7.0)
        video = generate_pseudo_video(image, cfg, seed=11)
        naive = make_naive_video(
            image, cfg.frames_t, cfg.rotation_deg, np.random.default_rng(np.random.PCG64(11))
        )
        for a, b in zip(video.frames, naive.frames):
            assert np.array_equal(a, b)
        assert sorted(video.tracks) == sorted(naive.tracks)
        for tid in video.tracks:
            for ma, mb in zip(video.tracks[tid].masks, naive.tracks[tid].masks):
                assert (ma is None and mb is None) or np.array_equal(ma, mb)

    def test_full_pipeline_deterministic(self):
        image = make_annotated_image(np.random.default_rng(1))
        cfg = GenConfig(cost_probability=1.0, vmosp_probability=1.0)
        a = generate_pseudo_video(image, cfg, seed=99)
        b = generate_pseudo_video(image, cfg, seed=99)
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa, fb)
        assert sorted(a.tracks) == sorted(b.tracks)

    def test_ten_frame_clip(self):
        image = make_annotated_image(np.random.default_rng(2))
        cfg = GenConfig(frames_t=10)
        assert generate_pseudo_video(image, cfg, seed=5).num_frames == 10

    def test_instanceless_image_skips_splice(self):
        from pseudovis.ingest import AnnotatedImage

        rng = np.random.default_rng(3)
        image = AnnotatedImage(7, rng.integers(0, 256, (8, 8, 3), dtype=np.uint8), [])
        cfg = GenConfig(vmosp_probability=1.0, cost_probability=0.0, rotation_deg=0.0)
        video = generate_pseudo_video(image, cfg, seed=1)
        assert video.tracks == {}
        assert video.num_frames == cfg.frames_t


class TestWriteDataset:
    def _video(self, seed=4):
        image = make_annotated_image(np.random.default_rng(seed))
        return generate_pseudo_video(image, GenConfig(vmosp_probability=0.0, cost_probability=0.0), seed)

    def test_manifest_shape(self, tmp_path):
        video = self._video()
        manifest = write_dataset([video], tmp_path / "ds", {1: "a", 2: "b"}, GenConfig())
        assert len(manifest["videos"]) == 1
        assert manifest["videos"][0]["frames"] == [
            "videos/000000/000.png",
            "videos/000000/001.png",
            "videos/000000/002.png",
        ]
        assert len(manifest["tracks"]) == 2
        for track in manifest["tracks"]:
            assert len(track["segmentations"]) == 3

    def test_rerun_is_byte_identical(self, tmp_path):
        video = self._video()
        write_dataset([video], tmp_path / "a", {1: "x"}, GenConfig())
        write_dataset([video], tmp_path / "b", {1: "x"}, GenConfig())
        a = (tmp_path / "a" / "manifest.json").read_bytes()
        b = (tmp_path / "b" / "manifest.json").read_bytes()
        assert a == b

    def test_reload_round_trips_masks_bit_exactly(self, tmp_path):
        video = self._video()
        manifest = write_dataset([video], tmp_path / "ds", {1: "x"}, GenConfig())
        loaded = load_video(tmp_path / "ds", manifest, 0)
        for a, b in zip(loaded.frames, video.frames):
            assert np.array_equal(a, b)
        assert sorted(loaded.tracks) == sorted(video.tracks)
        for tid in video.tracks:
            for ma, mb in zip(loaded.tracks[tid].masks, video.tracks[tid].masks):
                assert (ma is None and mb is None) or np.array_equal(ma, mb)

    def test_fingerprint_present(self, tmp_path):
        manifest = write_dataset([self._video()], tmp_path / "ds", {}, GenConfig(master_seed=77))
        fp = manifest["fingerprint"]
        assert fp["master_seed"] == 77
        assert len(fp["config_hash"]) == 64
        assert fp["tool_version"]


class TestRunGeneration:
    def _dataset(self, tmp_path, n_images=2, size=(24, 32)):
        rng = np.random.default_rng(10)
        images = []
        annotations = []
        ann_id = 1
        for image_id in range(1, n_images + 1):
            h, w = size
            pixels = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
            images.append({"id": image_id, "pixels": pixels})
            for (r0, r1, c0, c1) in [(2, h // 2, 2, w // 2), (h // 2 + 2, h - 2, w // 2 + 2, w - 2)]:
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
        return load_dataset(manifest_path)

    def test_worker_count_invariance(self, tmp_path):
        dataset = self._dataset(tmp_path)
        outputs = {}
        for workers in (1, 4):
            out_dir = tmp_path / f"out_{workers}"
            cfg = CliConfig(
                gen=GenConfig(num_videos=6, master_seed=5),
                out_dir=str(out_dir),
                workers=workers,
            )
            summary = run_generation(dataset, cfg)
            assert not summary.failures
            tree = {}
            for path in sorted(out_dir.rglob("*")):
                if path.is_file():
                    tree[str(path.relative_to(out_dir))] = path.read_bytes()
            outputs[workers] = tree
        assert outputs[1] == outputs[4]

    def test_zero_videos(self, tmp_path):
        dataset = self._dataset(tmp_path)
        cfg = CliConfig(gen=GenConfig(num_videos=0), out_dir=str(tmp_path / "out"))
        summary = run_generation(dataset, cfg)
        assert summary.manifest["videos"] == []
        assert summary.manifest["tracks"] == []
        assert (tmp_path / "out" / "manifest.json").is_file()

    def test_round_robin_sources(self, tmp_path):
        dataset = self._dataset(tmp_path, n_images=2)
        cfg = CliConfig(gen=GenConfig(num_videos=4, master_seed=1), out_dir=str(tmp_path / "out"))
        summary = run_generation(dataset, cfg)
        sources = [v["source_image_id"] for v in summary.manifest["videos"]]
        assert sources == [1, 2, 1, 2]

    def test_one_failed_job_does_not_sink_the_run(self, tmp_path, monkeypatch):
        import pseudovis.synth as synth_module

        dataset = self._dataset(tmp_path)
        real = synth_module.generate_pseudo_video

        def flaky(sample, cfg, seed, pool=None):
            if flaky.calls == 2:
                flaky.calls += 1
                raise RuntimeError("injected job failure")
            flaky.calls += 1
            return real(sample, cfg, seed, pool)

        flaky.calls = 0
        monkeypatch.setattr(synth_module, "generate_pseudo_video", flaky)
        out_dir = tmp_path / "out"
        cfg = CliConfig(gen=GenConfig(num_videos=4, master_seed=3), out_dir=str(out_dir), workers=1)
        summary = run_generation(dataset, cfg)
        assert len(summary.failures) == 1
        failed = summary.failures[0]
        assert "injected job failure" in failed.error
        assert len(summary.manifest["videos"]) == 3
        assert not (out_dir / "videos" / f"{failed.video_id:06d}").exists()


class TestPreview:
    def test_single_frame_strip_width(self, tmp_path):
        image = make_annotated_image(np.random.default_rng(20))
        video = generate_pseudo_video(image, GenConfig(frames_t=1, vmosp_probability=0.0), 3)
        path = render_preview(video, tmp_path / "p.png")
        from PIL import Image

        with Image.open(path) as img:
            assert img.size == (image.width, image.height)

    def test_render_twice_identical_bytes(self, tmp_path):
        image = make_annotated_image(np.random.default_rng(21))
        video = generate_pseudo_video(image, GenConfig(), 9)
        a = render_preview(video, tmp_path / "a.png").read_bytes()
        b = render_preview(video, tmp_path / "b.png").read_bytes()
        assert a == b

    def test_two_tracks_two_palette_colors(self, tmp_path):
        image = make_annotated_image(np.random.default_rng(22))
        video = make_naive_video(image, 3, 0.0, np.random.default_rng(0))
        assert len(video.tracks) == 2
        colors = {tuple(track_color(tid)) for tid in video.tracks}
        assert len(colors) == 2
        for color in colors:
            assert any(tuple(p) == color for p in PALETTE)
        render_preview(video, tmp_path / "p.png")


def test_manifest_keys_sorted_on_disk(tmp_path):
    image = make_annotated_image(np.random.default_rng(23))
    video = generate_pseudo_video(image, GenConfig(vmosp_probability=0.0), 1)
    write_dataset([video], tmp_path / "ds", {1: "x"}, GenConfig())
    text = (tmp_path / "ds" / "manifest.json").read_text()
    parsed = json.loads(text)
    assert text == json.dumps(parsed, sort_keys=True, indent=2) + "\n"
    assert read_manifest(tmp_path / "ds") == parsed
