"""Metrics and synthetic scenes with exact ground truth.

Field imagery is not shippable, so scoring runs against generated scenes:
parallel rows of rust-colored patches (dashes) on a gray background, with
an optional white signboard. The generator knows the exact truth mask and
line geometry, which makes it its own oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .colorfilter import rust_range
from .raster import BinaryMask, Connectivity, RasterImage, connected_components

REGION_IOU_THRESHOLD = 0.5


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")


def f1(counts: ConfusionCounts) -> tuple[float, float, float]:
    """(precision, recall, f1) with the zero-denominator convention of 0."""
    if counts.tp + counts.fp + counts.fn == 0:
        raise ValueError("all-zero confusion counts")
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    score = (
        2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    )
    return precision, recall, score


def pixel_confusion(pred: BinaryMask, truth: BinaryMask) -> ConfusionCounts:
    if (pred.height, pred.width) != (truth.height, truth.width):
        raise ValueError("mask dimensions mismatch")
    p, t = pred.bits, truth.bits
    return ConfusionCounts(
        tp=int(np.logical_and(p, t).sum()),
        fp=int(np.logical_and(p, ~t).sum()),
        fn=int(np.logical_and(~p, t).sum()),
    )


def iou(a: BinaryMask, b: BinaryMask) -> float:
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError("mask dimensions mismatch")
    union = int(np.logical_or(a.bits, b.bits).sum())
    if union == 0:
        return 0.0
    return int(np.logical_and(a.bits, b.bits).sum()) / union


@dataclass
class SceneSpec:
    """Parameters of a synthetic inspection scene.

    Stripes are dashed rows of rust patches so each row yields several
    regions, the way corrosion shows up along a real bar. All color values
    are HSV with hue on the 0..179 scale.
    """

    width: int = 1024
    height: int = 768
    stripe_count: int = 3
    spacing_px: float = 133.0
    angle_deg: float = 0.35
    stripe_width_px: float = 12.0
    stripe_len_px: float | None = 595.0  # None spans the full frame
    dash_len_px: float = 45.0
    dash_gap_px: float = 10.0
    rust_hsv: tuple[int, int, int] = (10, 120, 100)
    background_gray: int = 128
    sign_bbox: tuple[int, int, int, int] | None = None
    glyph_seed: int = 0
    noise_sigma: float = 3.0

    def __post_init__(self):
        if self.spacing_px <= self.stripe_width_px:
            raise ValueError("spacing must exceed stripe width")
        if self.stripe_count < 1 or self.width < 8 or self.height < 8:
            raise ValueError("degenerate scene spec")
        half_extent = (self.stripe_count - 1) / 2.0 * self.spacing_px + self.stripe_width_px
        if half_extent * 2 > min(self.width, self.height):
            raise ValueError("stripes do not fit inside the image")
        if self.sign_bbox is not None:
            x0, y0, x1, y1 = self.sign_bbox
            if not (0 <= x0 < x1 < self.width and 0 <= y0 < y1 < self.height):
                raise ValueError("sign bbox outside image")

    def to_json_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "stripe_count": self.stripe_count,
            "spacing_px": self.spacing_px,
            "angle_deg": self.angle_deg,
            "stripe_width_px": self.stripe_width_px,
            "stripe_len_px": self.stripe_len_px,
            "dash_len_px": self.dash_len_px,
            "dash_gap_px": self.dash_gap_px,
            "rust_hsv": list(self.rust_hsv),
            "background_gray": self.background_gray,
            "sign_bbox": list(self.sign_bbox) if self.sign_bbox else None,
            "glyph_seed": self.glyph_seed,
            "noise_sigma": self.noise_sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        kwargs = dict(d)
        if kwargs.get("rust_hsv") is not None:
            kwargs["rust_hsv"] = tuple(kwargs["rust_hsv"])
        if kwargs.get("sign_bbox") is not None:
            kwargs["sign_bbox"] = tuple(kwargs["sign_bbox"])
        return cls(**kwargs)


@dataclass
class Scene:
    image: RasterImage
    rust_mask: BinaryMask
    sign_bbox: tuple[int, int, int, int] | None
    line_angle_deg: float
    line_offsets: tuple[float, ...]  # perpendicular offsets from image center


# Rust HSV samples stay this far inside the preset box so the RGB->HSV
# roundtrip (+/-2 per channel) cannot escape it.
_PRESET_MARGIN = 3


def _rust_sample_bounds() -> tuple[np.ndarray, np.ndarray]:
    r = rust_range()
    lo = np.array([r.h_min + _PRESET_MARGIN, r.s_min + _PRESET_MARGIN, r.v_min + _PRESET_MARGIN])
    hi = np.array([r.h_max - _PRESET_MARGIN, r.s_max - _PRESET_MARGIN, r.v_max - _PRESET_MARGIN])
    return lo, hi


def generate_scene(spec: SceneSpec, seed: int) -> Scene:
    """Render the scene; deterministic per (spec, seed)."""
    rng = np.random.default_rng(seed)
    h, w = spec.height, spec.width
    img = np.full((h, w, 3), np.uint8(spec.background_gray))

    theta = math.radians(spec.angle_deg)
    d = (math.cos(theta), math.sin(theta))
    n = (-math.sin(theta), math.cos(theta))
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0

    ys, xs = np.mgrid[0:h, 0:w]
    u = (xs - cx) * d[0] + (ys - cy) * d[1]
    v = (xs - cx) * n[0] + (ys - cy) * n[1]

    half_len = (spec.stripe_len_px / 2.0) if spec.stripe_len_px else float(np.hypot(w, h))
    period = spec.dash_len_px + spec.dash_gap_px
    in_dash = np.mod(u + half_len, period) < spec.dash_len_px

    offsets = []
    rust = np.zeros((h, w), dtype=bool)
    for i in range(spec.stripe_count):
        off = (i - (spec.stripe_count - 1) / 2.0) * spec.spacing_px
        offsets.append(off)
        stripe = (
            (np.abs(v - off) <= spec.stripe_width_px / 2.0)
            & (np.abs(u) <= half_len)
            & in_dash
        )
        rust |= stripe

    lo, hi = _rust_sample_bounds()
    center = np.asarray(spec.rust_hsv, dtype=np.float64)
    count = int(rust.sum())
    if count:
        samples = center + rng.normal(0.0, spec.noise_sigma, size=(count, 3))
        samples = np.clip(np.floor(samples + 0.5), lo, hi).astype(np.uint8)
        hsv_img = np.zeros((h, w, 3), dtype=np.uint8)
        hsv_img[rust] = samples
        rgb = K.hsv_to_rgb_u8(hsv_img)
        img[rust] = rgb[rust]

    if spec.sign_bbox is not None:
        x0, y0, x1, y1 = spec.sign_bbox
        img[y0 : y1 + 1, x0 : x1 + 1] = (245, 245, 245)
        grng = np.random.default_rng(spec.glyph_seed * 100003 + seed)
        block = 6
        margin = 8
        for gy in range(y0 + margin, y1 - margin - block, 2 * block):
            for gx in range(x0 + margin, x1 - margin - block, 2 * block):
                if grng.random() < 0.55:
                    img[gy : gy + block, gx : gx + block] = (60, 60, 60)

    return Scene(
        image=RasterImage(img),
        rust_mask=BinaryMask(rust),
        sign_bbox=spec.sign_bbox,
        line_angle_deg=spec.angle_deg % 180.0,
        line_offsets=tuple(offsets),
    )


def score_report(report, truth: BinaryMask) -> dict:
    """Pixel- and region-level scores of a detection report against truth.

    Pixel scoring compares the union of reported region masks with the
    truth mask. Region scoring greedily matches predictions to truth
    components by IoU, counting a match at IoU >= 0.5.
    """
    regions = report.regions
    if regions and (
        (regions[0].mask.height, regions[0].mask.width) != (truth.height, truth.width)
    ):
        raise ValueError("report and truth dimensions mismatch")

    union = np.zeros_like(truth.bits)
    for r in regions:
        union |= r.mask.bits
    pix = pixel_confusion(BinaryMask(union), truth)
    p_precision, p_recall, p_f1 = f1(pix) if pix.tp + pix.fp + pix.fn else (0.0, 0.0, 0.0)

    truth_comps = connected_components(truth, Connectivity.EIGHT)
    pairs = []
    for pi, r in enumerate(regions):
        for ti, t in enumerate(truth_comps):
            val = iou(r.mask, t.mask)
            if val >= REGION_IOU_THRESHOLD:
                pairs.append((val, pi, ti))
    pairs.sort(key=lambda x: (-x[0], x[1], x[2]))
    used_p: set[int] = set()
    used_t: set[int] = set()
    tp = 0
    for _, pi, ti in pairs:
        if pi in used_p or ti in used_t:
            continue
        used_p.add(pi)
        used_t.add(ti)
        tp += 1
    reg = ConfusionCounts(tp=tp, fp=len(regions) - tp, fn=len(truth_comps) - tp)
    r_precision, r_recall, r_f1 = (
        f1(reg) if reg.tp + reg.fp + reg.fn else (0.0, 0.0, 0.0)
    )

    return {
        "pixel": {
            "precision": round(p_precision, 6),
            "recall": round(p_recall, 6),
            "f1": round(p_f1, 6),
            "tp": pix.tp,
            "fp": pix.fp,
            "fn": pix.fn,
        },
        "region": {
            "precision": round(r_precision, 6),
            "recall": round(r_recall, 6),
            "f1": round(r_f1, 6),
            "tp": reg.tp,
            "fp": reg.fp,
            "fn": reg.fn,
            "iou_threshold": REGION_IOU_THRESHOLD,
        },
    }
