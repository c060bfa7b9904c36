from __future__ import annotations

import numpy as np
import pytest
from scipy import ndimage

import oracles
from rebarscope._kernels import active as K
from rebarscope.privacy import (
    OcrMethod,
    PrivacyActions,
    PrivacySettings,
    SignRegion,
    anonymize,
    detect_signboards,
    estimate_text_angle,
    k_anonymize_locations,
    ocr_preprocess,
)
from rebarscope.raster import RasterImage
from rebarscope.segbackend import ReferenceBackend


def _total_variation(pixels: np.ndarray) -> float:
    f = pixels.astype(np.float64)
    return float(
        np.abs(np.diff(f, axis=0)).sum() + np.abs(np.diff(f, axis=1)).sum()
    )


class TestDetectSignboards:
    def test_synthetic_sign_found(self, small_scene):
        spec, scene = small_scene
        signs = detect_signboards(scene.image, ReferenceBackend())
        assert len(signs) == 1
        s = signs[0]
        assert s.rectangularity >= 0.6
        x0, y0, x1, y1 = s.region.bbox
        sx0, sy0, sx1, sy1 = spec.sign_bbox
        assert abs(x0 - sx0) <= 2 and abs(y0 - sy0) <= 2
        assert abs(x1 - sx1) <= 2 and abs(y1 - sy1) <= 2

    def test_no_white_pixels_no_signs(self):
        img = RasterImage(np.full((64, 64, 3), np.uint8(100)))
        assert detect_signboards(img, ReferenceBackend()) == []

    def test_thin_streak_rejected_by_rectangularity(self):
        arr = np.full((120, 120, 3), np.uint8(100))
        for i in range(100):  # 5px wide diagonal: area ~500, bbox ~100x104
            arr[10 + i, 10 + i : 15 + i] = 250
        img = RasterImage(arr)
        # rectangularity = 500 / (104*105) ~ 0.05
        assert detect_signboards(img, ReferenceBackend()) == []

    def test_small_white_speck_rejected_by_area(self):
        arr = np.full((64, 64, 3), np.uint8(100))
        arr[10:20, 10:20] = 250  # 100 px < 400
        assert detect_signboards(RasterImage(arr), ReferenceBackend()) == []


class TestAnonymize:
    def test_no_signs_identity(self, rng):
        img = RasterImage(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
        out = anonymize(img, [])
        assert np.array_equal(out.pixels, img.pixels)

    def test_locality_outside_bbox_bit_exact(self, small_scene):
        spec, scene = small_scene
        signs = detect_signboards(scene.image, ReferenceBackend())
        out = anonymize(scene.image, signs)
        protect = np.zeros((scene.image.height, scene.image.width), dtype=bool)
        for s in signs:
            x0, y0, x1, y1 = s.region.bbox
            protect[y0 : y1 + 1, x0 : x1 + 1] = True
        assert np.array_equal(out.pixels[~protect], scene.image.pixels[~protect])
        assert all(s.blurred for s in signs)

    def test_total_variation_halves_inside_sign(self, small_scene):
        spec, scene = small_scene
        signs = detect_signboards(scene.image, ReferenceBackend())
        out = anonymize(scene.image, signs)
        x0, y0, x1, y1 = signs[0].region.bbox
        before = _total_variation(scene.image.pixels[y0 : y1 + 1, x0 : x1 + 1])
        after = _total_variation(out.pixels[y0 : y1 + 1, x0 : x1 + 1])
        assert after <= 0.5 * before

    def test_second_pass_deterministic(self, small_scene):
        _, scene = small_scene
        signs = detect_signboards(scene.image, ReferenceBackend())
        once = anonymize(scene.image, signs)
        bbox_before = [s.region.bbox for s in signs]
        twice_a = anonymize(once, signs)
        twice_b = anonymize(once, signs)
        assert np.array_equal(twice_a.pixels, twice_b.pixels)
        assert [s.region.bbox for s in signs] == bbox_before

    def test_dimension_mismatch_rejected(self, rng, small_scene):
        _, scene = small_scene
        signs = detect_signboards(scene.image, ReferenceBackend())
        other = RasterImage(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            anonymize(other, signs)


def _text_crop(angle_deg=0.0):
    crop = np.full((120, 260, 3), 245, dtype=np.uint8)
    for row0 in (30, 60, 90):
        crop[row0 : row0 + 8, 20:240] = 40
    if angle_deg:
        crop = ndimage.rotate(
            crop, angle_deg, reshape=False, order=1, mode="nearest", axes=(0, 1)
        ).astype(np.uint8)
    return crop


class TestOcrPreprocess:
    def test_binarize_two_levels(self):
        arr = np.full((20, 20, 3), np.uint8(10))
        arr[5:15, 5:15] = 200
        out = ocr_preprocess(RasterImage(arr), (0, 0, 19, 19), OcrMethod.BINARIZE)
        assert set(np.unique(out.pixels)) == {0, 255}

    def test_binarize_idempotent(self, rng):
        arr = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
        once = ocr_preprocess(RasterImage(arr), (0, 0, 23, 23), OcrMethod.BINARIZE)
        twice = ocr_preprocess(once, (0, 0, 23, 23), OcrMethod.BINARIZE)
        assert np.array_equal(once.pixels, twice.pixels)

    def test_contrast_stretch_constant_identity(self):
        arr = np.full((16, 16, 3), np.uint8(77))
        out = ocr_preprocess(RasterImage(arr), (0, 0, 15, 15), OcrMethod.CONTRAST_STRETCH)
        assert np.array_equal(out.pixels, arr)

    def test_contrast_stretch_expands_range(self):
        arr = np.full((16, 16, 3), np.uint8(100))
        arr[:8] = 140
        out = ocr_preprocess(RasterImage(arr), (0, 0, 15, 15), OcrMethod.CONTRAST_STRETCH)
        assert out.pixels.min() < 50 and out.pixels.max() > 200

    def test_denoise_removes_impulse(self):
        arr = np.full((15, 15, 3), np.uint8(100))
        arr[7, 7] = 255
        out = ocr_preprocess(RasterImage(arr), (0, 0, 14, 14), OcrMethod.DENOISE)
        assert (out.pixels == 100).all()

    def test_deskew_corrects_three_degrees(self):
        rot = _text_crop(3.0)
        out = ocr_preprocess(RasterImage(rot), (0, 0, 259, 119), OcrMethod.DESKEW)
        assert abs(estimate_text_angle(out.pixels)) <= 0.5

    def test_region_out_of_bounds(self):
        img = RasterImage(np.zeros((10, 10, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            ocr_preprocess(img, (0, 0, 10, 9), OcrMethod.BINARIZE)


class TestKAnonymity:
    def test_boundary_k3_published(self):
        pts = [(10.0, 10.0), (20.0, 30.0), (40.0, 40.0)]  # same 64px cell
        published, suppressed = k_anonymize_locations(pts, cell_px=64.0, k=3)
        assert published == [(0, 0, 3)]
        assert suppressed == 0

    def test_under_k_all_suppressed(self):
        pts = [(10, 10), (20, 20), (100, 100), (110, 110)]  # two cells of 2
        published, suppressed = k_anonymize_locations(pts, cell_px=64.0, k=3)
        assert published == []
        assert suppressed == 2

    def test_random_batches_match_bucket_oracle(self, rng):
        for _ in range(20):
            n = int(rng.integers(0, 40))
            pts = [tuple(p) for p in rng.random((n, 2)) * 500.0]
            cell = float(rng.uniform(20, 120))
            k = int(rng.integers(1, 5))
            assert k_anonymize_locations(pts, cell, k) == oracles.bucket_locations(pts, cell, k)

    def test_validation(self):
        with pytest.raises(ValueError):
            k_anonymize_locations([], cell_px=0.0, k=3)
        with pytest.raises(ValueError):
            k_anonymize_locations([], cell_px=10.0, k=0)


class TestExternalOcrCommand:
    def test_disabled_by_default(self, small_scene):
        from rebarscope.privacy import extract_sign_text

        _, scene = small_scene
        signs = detect_signboards(scene.image, ReferenceBackend())
        assert extract_sign_text(scene.image, signs[0], PrivacySettings()) is None

    def test_command_receives_preprocessed_crop(self, small_scene, tmp_path):
        import sys

        from rebarscope.privacy import extract_sign_text

        _, scene = small_scene
        signs = detect_signboards(scene.image, ReferenceBackend())
        probe = tmp_path / "probe.py"
        probe.write_text(
            "import sys\nfrom PIL import Image\n"
            "im = Image.open(sys.argv[1])\nprint(im.size[0], im.size[1])\n"
        )
        settings = PrivacySettings(ocr_command=f"{sys.executable} {probe}")
        out = extract_sign_text(scene.image, signs[0], settings)
        x0, y0, x1, y1 = signs[0].region.bbox
        assert out.split() == [str(x1 - x0 + 1), str(y1 - y0 + 1)]

    def test_failing_command_raises(self, small_scene):
        import sys

        from rebarscope.privacy import extract_sign_text

        _, scene = small_scene
        signs = detect_signboards(scene.image, ReferenceBackend())
        settings = PrivacySettings(
            ocr_command=f"{sys.executable} -c 'raise SystemExit(3)'"
        )
        with pytest.raises(RuntimeError, match="OCR command failed"):
            extract_sign_text(scene.image, signs[0], settings)


def test_privacy_actions_json_shape(small_scene):
    _, scene = small_scene
    signs = detect_signboards(scene.image, ReferenceBackend())
    actions = PrivacyActions(signs=signs, kernel=(25, 25.0 / 3.0),
                             suppressed_cells=1, published_cells=[(1, 2, 3)])
    d = actions.to_json_dict(k=3)
    assert d["kernel"] == [51, 8.33]
    assert d["k"] == 3
    assert d["published_cells"] == [[1, 2, 3]]
    assert all(set(s) == {"bbox", "rectangularity"} for s in d["signs"])
