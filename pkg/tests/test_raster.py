from __future__ import annotations

import numpy as np
import pytest

import oracles
from rebarscope.raster import (
    BinaryMask,
    Connectivity,
    RasterImage,
    blur_within,
    connected_components,
    gaussian_blur,
    hsv_to_rgb,
    rgb_to_hsv,
)


def _solid(color, h=4, w=4) -> RasterImage:
    return RasterImage(np.full((h, w, 3), color, dtype=np.uint8))


class TestRgbToHsv:
    def test_black(self):
        assert rgb_to_hsv(_solid((0, 0, 0))).pixel(0, 0) == (0, 0, 0)

    def test_pure_red(self):
        assert rgb_to_hsv(_solid((255, 0, 0))).pixel(0, 0) == (0, 255, 255)

    def test_hand_computed_case(self):
        # (128,64,32): V=128, delta=96, S=255*96/128=191.25 -> 191,
        # H = 60*(64-32)/96 = 20 degrees -> 10 on the half-degree scale.
        assert rgb_to_hsv(_solid((128, 64, 32))).pixel(0, 0) == (10, 191, 128)

    def test_roundtrip_error_bound(self, rng):
        # Hue lives on the 0..179 scale, so its quantization alone can move
        # a channel by 255/60 ~ 4.25; the observed worst case over the RGB
        # cube is 4. Low-saturation pixels stay within +/-2.
        img = RasterImage(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
        back = hsv_to_rgb(rgb_to_hsv(img))
        diff = np.abs(back.pixels.astype(int) - img.pixels.astype(int))
        assert diff.max() <= 4
        gray = RasterImage(
            np.repeat(rng.integers(0, 256, (32, 32, 1), dtype=np.uint8), 3, axis=2)
        )
        back_gray = hsv_to_rgb(rgb_to_hsv(gray))
        assert np.abs(back_gray.pixels.astype(int) - gray.pixels.astype(int)).max() <= 2

    def test_hue_capped_at_179(self, rng):
        img = RasterImage(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
        assert rgb_to_hsv(img).values[..., 0].max() <= 179


class TestGaussianBlur:
    def test_constant_preserved(self):
        img = _solid((77, 140, 201), 16, 16)
        out = gaussian_blur(img, 3, 1.5)
        assert np.abs(out.pixels.astype(int) - img.pixels.astype(int)).max() <= 1

    def test_impulse_matches_kernel_oracle(self):
        k, sigma = 2, 1.0
        arr = np.zeros((11, 11, 3), dtype=np.uint8)
        arr[5, 5] = 255
        out = gaussian_blur(RasterImage(arr), k, sigma).pixels[:, :, 0].astype(int)
        expected = np.zeros((11, 11))
        expected[3:8, 3:8] = oracles.gaussian_kernel2d(k, sigma) * 255.0
        assert np.abs(out - np.round(expected)).max() <= 1

    def test_privacy_kernel_footprint_51(self):
        # k=25: the impulse response matches the normalized 51x51 kernel
        # within one level and is exactly zero outside that footprint.
        arr = np.zeros((151, 151, 3), dtype=np.uint8)
        arr[75, 75] = 255
        out = gaussian_blur(RasterImage(arr), 25, 25.0 / 3.0).pixels[:, :, 0].astype(int)
        window = out[50:101, 50:101]
        expected = oracles.gaussian_kernel2d(25, 25.0 / 3.0) * 255.0
        assert np.abs(window - np.round(expected)).max() <= 1
        outside = out.copy()
        outside[50:101, 50:101] = 0
        assert not outside.any()

    @pytest.mark.parametrize("k,sigma", [(0, 1.0), (-2, 1.0), (3, 0.0), (3, -1.0)])
    def test_rejects_bad_parameters(self, k, sigma):
        with pytest.raises(ValueError):
            gaussian_blur(_solid((1, 1, 1)), k, sigma)


class TestBlurWithin:
    def test_empty_mask_is_identity(self, rng):
        img = RasterImage(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
        mask = BinaryMask(np.zeros((16, 16), dtype=bool))
        assert np.array_equal(blur_within(img, mask, 2, 1.0).pixels, img.pixels)

    def test_full_mask_equals_whole_blur(self, rng):
        img = RasterImage(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
        mask = BinaryMask(np.ones((16, 16), dtype=bool))
        assert np.array_equal(
            blur_within(img, mask, 2, 1.0).pixels, gaussian_blur(img, 2, 1.0).pixels
        )

    def test_half_frame_impulse_composition(self):
        arr = np.zeros((10, 10, 3), dtype=np.uint8)
        arr[4, 4] = 255
        arr[4, 8] = 255
        img = RasterImage(arr)
        half = np.zeros((10, 10), dtype=bool)
        half[:, :6] = True
        out = blur_within(img, BinaryMask(half), 2, 1.0)
        full = gaussian_blur(img, 2, 1.0)
        assert np.array_equal(out.pixels[:, :6], full.pixels[:, :6])
        assert np.array_equal(out.pixels[:, 6:], arr[:, 6:])

    def test_outside_mask_bit_exact(self, rng):
        img = RasterImage(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
        bits = rng.random((32, 32)) < 0.3
        out = blur_within(img, BinaryMask(bits), 3, 2.0)
        assert np.array_equal(out.pixels[~bits], img.pixels[~bits])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            blur_within(_solid((1, 1, 1), 4, 4), BinaryMask(np.zeros((3, 3), bool)), 1, 1.0)


class TestConnectedComponents:
    def test_all_false(self):
        assert connected_components(BinaryMask(np.zeros((5, 5), bool))) == []

    def test_diagonal_connectivity(self):
        bits = np.zeros((4, 4), dtype=bool)
        bits[1, 1] = bits[2, 2] = True
        mask = BinaryMask(bits)
        assert len(connected_components(mask, Connectivity.FOUR)) == 2
        assert len(connected_components(mask, Connectivity.EIGHT)) == 1

    @pytest.mark.parametrize("conn", [Connectivity.FOUR, Connectivity.EIGHT])
    def test_random_matches_union_find_oracle(self, rng, conn):
        for _ in range(10):
            bits = rng.random((32, 32)) < 0.4
            regions = connected_components(BinaryMask(bits), conn)
            got = {
                frozenset(zip(*np.nonzero(r.mask.bits))) for r in regions
            }
            assert got == oracles.union_find_components(bits, conn.value)

    def test_region_statistics_invariants(self, rng):
        bits = rng.random((40, 60)) < 0.35
        regions = connected_components(BinaryMask(bits))
        union = np.zeros_like(bits)
        total = 0
        for r in regions:
            m = r.mask.bits
            assert not (union & m).any(), "regions must be disjoint"
            union |= m
            total += r.area
            assert r.area == int(m.sum())
            ys, xs = np.nonzero(m)
            assert (xs.min(), ys.min(), xs.max(), ys.max()) == r.bbox
            x0, y0, x1, y1 = r.bbox
            assert x0 <= r.centroid[0] <= x1 and y0 <= r.centroid[1] <= y1
            assert r.aspect_ratio >= 1.0
        assert np.array_equal(union, bits)
        assert total == int(bits.sum())

    def test_min_area_filter(self):
        bits = np.zeros((8, 8), dtype=bool)
        bits[0, 0] = True
        bits[4:6, 4:8] = True
        regions = connected_components(BinaryMask(bits), min_area=2)
        assert len(regions) == 1 and regions[0].area == 8


class TestPngIo:
    def test_image_roundtrip(self, tmp_path, rng):
        img = RasterImage(rng.integers(0, 256, (20, 30, 3), dtype=np.uint8))
        path = tmp_path / "img.png"
        img.save(path)
        assert np.array_equal(RasterImage.load(path).pixels, img.pixels)

    def test_mask_roundtrip(self, tmp_path, rng):
        mask = BinaryMask(rng.random((20, 30)) < 0.5)
        path = tmp_path / "mask.png"
        mask.save(path)
        assert np.array_equal(BinaryMask.load(path).bits, mask.bits)

    def test_invariants_rejected(self):
        with pytest.raises(ValueError):
            RasterImage(np.zeros((0, 4, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            RasterImage(np.zeros((4, 4), dtype=np.uint8))
