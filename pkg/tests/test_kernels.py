"""Parity between the compiled kernel core and the NumPy fallback."""

from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from rebarscope import _kernels

compiled = _kernels.compiled_impl
needs_compiled = pytest.mark.skipif(
    compiled is None, reason="compiled kernel extension not built"
)


@pytest.fixture(scope="module")
def data(rng=None):
    rng = np.random.default_rng(99)
    img = rng.integers(0, 256, (96, 128, 3), dtype=np.uint8)
    mask = rng.random((96, 128)) < 0.4
    pts = rng.random((200, 2)) * 60.0
    return img, mask, pts


@needs_compiled
class TestParity:
    def test_rgb_hsv_roundtrip_functions(self, data):
        img, _, _ = data
        a = _kernels.py_impl.rgb_to_hsv_u8(img)
        b = compiled.rgb_to_hsv_u8(img)
        assert np.array_equal(a, b)
        assert np.array_equal(
            _kernels.py_impl.hsv_to_rgb_u8(a), compiled.hsv_to_rgb_u8(a)
        )

    def test_in_range(self, data):
        img, _, _ = data
        hsv = compiled.rgb_to_hsv_u8(img)
        lo, hi = (10, 40, 30), (120, 200, 220)
        assert np.array_equal(
            _kernels.py_impl.in_range_u8(hsv, lo, hi), compiled.in_range_u8(hsv, lo, hi)
        )

    @pytest.mark.parametrize("k,sigma", [(1, 0.8), (3, 1.5), (25, 25 / 3)])
    def test_blur_within_one_level(self, data, k, sigma):
        img, _, _ = data
        a = _kernels.py_impl.gaussian_blur_u8(img, k, sigma).astype(int)
        b = compiled.gaussian_blur_u8(img, k, sigma).astype(int)
        assert np.abs(a - b).max() <= 1

    @pytest.mark.parametrize("conn", [4, 8])
    def test_labeling_and_stats(self, data, conn):
        _, mask, _ = data
        la, na = _kernels.py_impl.label_mask(mask, conn)
        lb, nb = compiled.label_mask(mask, conn)
        assert na == nb
        assert np.array_equal(la, lb)
        for x, y in zip(
            _kernels.py_impl.component_stats(la, na), compiled.component_stats(lb, nb)
        ):
            assert np.allclose(x, y)

    def test_dbscan_labels_identical(self, data):
        _, _, pts = data
        for eps, mp in ((2.0, 3), (5.0, 1), (8.0, 6)):
            a = _kernels.py_impl.dbscan_labels(pts, eps, mp)
            b = compiled.dbscan_labels(pts, eps, mp)
            assert np.array_equal(a, b)

    def test_color_field(self, data):
        img, _, _ = data
        hsv2 = compiled.rgb_to_hsv_u8(img).astype(np.float32)
        hsv2[..., 0] *= 2.0
        colors = hsv2[::17, ::31].reshape(-1, 3)[:20].copy()
        ca, wa = _kernels.py_impl.color_conf_field(hsv2, colors, 40.0)
        cb, wb = compiled.color_conf_field(hsv2, colors, 40.0)
        assert np.array_equal(wa, wb)
        assert np.abs(ca - cb).max() <= 1e-6


def test_env_var_forces_python_backend():
    code = (
        "import rebarscope._kernels as k; "
        "print(k.BACKEND)"
    )
    env = dict(os.environ, REBARSCOPE_KERNELS="py")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.stdout.strip() == "python"
