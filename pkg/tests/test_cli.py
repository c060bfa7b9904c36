from __future__ import annotations

import json

import numpy as np
import pytest
import yaml

from rebarscope.cli import main, render_combined, render_overlay, validate_json
from rebarscope.config import AppConfig, default_palette, load_config, resolve_spool
from rebarscope.raster import BinaryMask, RasterImage, Region

SMALL_SPEC = {
    "width": 448,
    "height": 336,
    "spacing_px": 90.0,
    "stripe_len_px": 320.0,
    "dash_len_px": 45.0,
    "dash_gap_px": 10.0,
    "stripe_width_px": 12.0,
    "sign_bbox": [300, 20, 430, 100],
}


def _write_spec(tmp_path, **overrides):
    spec = dict(SMALL_SPEC, **overrides)
    path = tmp_path / "spec.yaml"
    path.write_text(yaml.safe_dump(spec))
    return path


def _synth(tmp_path, seed=0, out="scene"):
    spec = _write_spec(tmp_path)
    out_dir = tmp_path / out
    rc = main(["synth", "--spec", str(spec), "--seed", str(seed), "--out", str(out_dir)])
    assert rc == 0
    return out_dir


class TestSynth:
    def test_outputs_exist_and_validate(self, tmp_path):
        out = _synth(tmp_path)
        assert (out / "scene.png").exists()
        assert (out / "truth.png").exists()
        echo = json.loads((out / "spec.json").read_text())
        validate_json(echo, "scene_echo")

    def test_same_seed_identical_bytes(self, tmp_path):
        a = _synth(tmp_path, seed=5, out="a")
        b = _synth(tmp_path, seed=5, out="b")
        assert (a / "scene.png").read_bytes() == (b / "scene.png").read_bytes()
        assert (a / "truth.png").read_bytes() == (b / "truth.png").read_bytes()

    def test_invalid_spec_exit_2(self, tmp_path):
        spec = _write_spec(tmp_path, spacing_px=8.0)  # <= stripe width
        rc = main(["synth", "--spec", str(spec), "--out", str(tmp_path / "x")])
        assert rc == 2


class TestDetect:
    def test_empty_input_warns_exit_zero(self, tmp_path, capsys):
        rc = main(["detect", "--out", str(tmp_path / "out")])
        assert rc == 0
        assert "no input images" in capsys.readouterr().err

    def test_full_output_set(self, tmp_path):
        scene_dir = _synth(tmp_path)
        out = tmp_path / "out"
        rc = main(["detect", "--out", str(out), str(scene_dir / "scene.png")])
        assert rc == 0
        report_path = out / "scene.png.report.json"
        assert report_path.exists()
        report = json.loads(report_path.read_text())
        validate_json(report, "detection_report")
        assert (out / "scene.png.overlay.png").exists()
        assert (out / "scene.png.anon.png").exists()
        assert (out / "scene.png.combined.png").exists()
        for r in report["regions"]:
            assert (out / f"scene.png.region{r['id']}.png").exists()
        summary = json.loads((out / "privacy_summary.json").read_text())
        validate_json(summary, "privacy_summary")
        assert summary["images"] == 1
        # single sign in a batch of one stays below k=3: suppressed
        assert summary["signs"] == 1
        assert summary["published_cells"] == [] and summary["suppressed_cells"] == 1

    def test_source_file_untouched(self, tmp_path):
        scene_dir = _synth(tmp_path)
        src = scene_dir / "scene.png"
        before = src.read_bytes()
        main(["detect", "--out", str(tmp_path / "out2"), str(src)])
        assert src.read_bytes() == before

    def test_unreadable_image_nonzero_exit(self, tmp_path, capsys):
        bad = tmp_path / "missing.png"
        rc = main(["detect", "--out", str(tmp_path / "out"), str(bad)])
        assert rc == 1
        assert "failed" in capsys.readouterr().err


class TestEval:
    def test_batch_metrics(self, tmp_path):
        scene_dir = _synth(tmp_path)
        pairs = [
            {"image": str(scene_dir / "scene.png"), "truth": str(scene_dir / "truth.png")}
        ]
        pairs_file = tmp_path / "pairs.json"
        pairs_file.write_text(json.dumps(pairs))
        out = tmp_path / "eval"
        rc = main(["eval", "--pairs", str(pairs_file), "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "eval_summary.json").read_text())
        validate_json(summary, "eval_summary")
        assert summary["pairs"] == 1
        assert summary["pixel"]["recall"] > 0.5
        report = json.loads((out / "scene.png.report.json").read_text())
        assert report["metrics"] is not None

    def test_zero_pairs_is_an_error(self, tmp_path, capsys):
        pairs_file = tmp_path / "pairs.json"
        pairs_file.write_text("[]")
        rc = main(["eval", "--pairs", str(pairs_file), "--out", str(tmp_path / "o")])
        assert rc == 2


class TestOverlay:
    def _regions_13(self):
        regions = []
        for i in range(13):
            bits = np.zeros((64, 128), dtype=bool)
            x0 = 3 + 9 * i
            bits[10:20, x0 : x0 + 6] = True
            regions.append(
                Region(
                    id=i,
                    mask=BinaryMask(bits),
                    area=60,
                    bbox=(x0, 10, x0 + 5, 19),
                    centroid=(x0 + 2.5, 14.5),
                    aspect_ratio=10 / 6,
                )
            )
        return regions

    def test_palette_wraps_mod_12(self):
        img = RasterImage(np.zeros((64, 128, 3), dtype=np.uint8))
        palette = default_palette()
        out = render_overlay(img, self._regions_13(), palette)
        # bbox outline carries the full palette color
        assert tuple(out.pixels[10, 3]) == palette[0]
        assert tuple(out.pixels[10, 3 + 9 * 12]) == palette[0]  # region 12 reuses color 0

    def test_combined_width(self):
        img = RasterImage(np.zeros((20, 30, 3), dtype=np.uint8))
        panel = render_combined(img, img, img)
        assert panel.width == 3 * 30 + 2 * 2 and panel.height == 20


class TestConfig:
    def test_defaults_and_hash_stability(self):
        cfg = AppConfig()
        assert cfg.config_hash() == AppConfig().config_hash()
        assert len(cfg.palette) == 12

    def test_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(
            yaml.safe_dump(
                {
                    "pipeline": {"auto_grid_side": 16, "tau": 0.5,
                                 "dense_grid_sides": [3, 5, 7]},
                    "privacy": {"k": 4, "white_range": [0, 179, 0, 30, 200, 255]},
                    "backend": "reference",
                    "jobs": 1,
                }
            )
        )
        cfg = load_config(path)
        assert cfg.pipeline.auto_grid_side == 16
        assert cfg.pipeline.tau == 0.5
        assert cfg.pipeline.dense_grid_sides == (3, 5, 7)
        assert cfg.privacy.k == 4
        assert cfg.privacy.white_range.s_max == 30
        assert cfg.jobs == 1
        assert cfg.config_hash() != AppConfig().config_hash()

    def test_adaptive_tau_keyword(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump({"pipeline": {"tau": "adaptive"}}))
        assert load_config(path).pipeline.tau is None

    def test_spool_precedence(self, monkeypatch):
        cfg = AppConfig(spool="/from/config")
        assert resolve_spool(cfg, None) == "/from/config"
        monkeypatch.setenv("REBARSCOPE_SPOOL", "/from/env")
        assert resolve_spool(cfg, None) == "/from/env"
        assert resolve_spool(cfg, "/from/flag") == "/from/flag"
