#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the NumPy fallback.

Runs each hot kernel on 1024x768-scale inputs and reports per-call times
plus the speedup of the compiled side. Exits nonzero if the extension is
not built (there is nothing to compare then).

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from rebarscope import _kernels

W, H = 1024, 768


def _time(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def build_cases(rng: np.random.Generator):
    img = rng.integers(0, 256, (H, W, 3), dtype=np.uint8)
    hsv = _kernels.py_impl.rgb_to_hsv_u8(img)
    hsv2 = hsv.astype(np.float32)
    hsv2[..., 0] *= 2.0
    colors = hsv2[::64, ::64].reshape(-1, 3)[:25].copy()
    mask = rng.random((H, W)) < 0.35
    labels, n = _kernels.py_impl.label_mask(mask, 8)
    blob_pts = np.concatenate(
        [rng.normal(c, 12.0, (400, 2)) for c in ((100, 100), (400, 250), (700, 500))]
    )
    return [
        ("rgb_to_hsv_u8", ("rgb_to_hsv_u8", (img,))),
        ("hsv_to_rgb_u8", ("hsv_to_rgb_u8", (hsv,))),
        ("in_range_u8", ("in_range_u8", (hsv, (0, 31, 28), (177, 135, 142)))),
        ("gaussian_blur_u8 k=25", ("gaussian_blur_u8", (img, 25, 25.0 / 3.0))),
        ("label_mask 35% fill", ("label_mask", (mask, 8))),
        ("component_stats", ("component_stats", (labels, n))),
        ("dbscan n=1200", ("dbscan_labels", (blob_pts, 20.0, 4))),
        ("color_conf_field p=25", ("color_conf_field", (hsv2, colors, 40.0))),
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if _kernels.compiled_impl is None:
        print("compiled kernel extension is not built; run `pip install -e .` first")
        return 1

    rng = np.random.default_rng(0)
    cases = build_cases(rng)
    name_w = max(len(name) for name, _ in cases)
    print(f"{'kernel':<{name_w}}  {'numpy':>10}  {'compiled':>10}  {'speedup':>8}")
    print("-" * (name_w + 34))
    for name, (fn_name, fn_args) in cases:
        t_py = _time(getattr(_kernels.py_impl, fn_name), *fn_args, repeats=args.repeats)
        t_cy = _time(getattr(_kernels.compiled_impl, fn_name), *fn_args, repeats=args.repeats)
        print(
            f"{name:<{name_w}}  {t_py * 1e3:>8.1f}ms  {t_cy * 1e3:>8.1f}ms  "
            f"{t_py / t_cy:>7.2f}x"
        )
    print(f"\nactive backend at import time: {_kernels.BACKEND}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
