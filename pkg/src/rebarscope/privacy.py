"""Signboard anonymization and location privacy.

Detected signboards are blurred over their full bounding boxes (frames
and posts carry location text too), every other pixel is left bit-exact.
Batch-level sign locations are only ever published as grid cells holding
at least k signs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .cluster import Point2D, fit_line
from .colorfilter import HsvRange, hsv_filter, white_signboard_range
from .raster import (
    BinaryMask,
    Connectivity,
    RasterImage,
    Region,
    blur_within,
    connected_components,
)
from .segbackend import (
    PointPrompt,
    SegmentationBackend,
    SegmentationRequest,
    adaptive_tau,
    segment,
    threshold_mask,
)

DEFAULT_KERNEL_HALF_WIDTH = 25
DEFAULT_SIGMA = 25.0 / 3.0


@dataclass
class PrivacySettings:
    white_range: HsvRange = field(default_factory=white_signboard_range)
    min_sign_area: int = 400
    min_rectangularity: float = 0.6
    kernel_half_width: int = DEFAULT_KERNEL_HALF_WIDTH
    sigma: float = DEFAULT_SIGMA
    k: int = 3
    cell_px: float = 256.0
    # External OCR engine invoked with a preprocessed crop PNG path;
    # stdout is taken as the extracted text. Disabled by default.
    ocr_command: str | None = None


@dataclass
class SignRegion:
    region: Region
    rectangularity: float
    blurred: bool = False


@dataclass
class PrivacyActions:
    signs: list[SignRegion]
    kernel: tuple[int, float]
    suppressed_cells: int = 0
    published_cells: list[tuple[int, int, int]] = field(default_factory=list)

    def to_json_dict(self, k: int) -> dict:
        return {
            "signs": [
                {"bbox": list(s.region.bbox), "rectangularity": round(s.rectangularity, 4)}
                for s in self.signs
            ],
            "kernel": [2 * self.kernel[0] + 1, round(self.kernel[1], 2)],
            "k": k,
            "published_cells": [list(c) for c in self.published_cells],
            "suppressed_cells": self.suppressed_cells,
        }


def _nearest_mask_pixel(region: Region) -> tuple[int, int]:
    """Mask pixel closest to the centroid; the refinement seed."""
    ys, xs = np.nonzero(region.mask.bits)
    cx, cy = region.centroid
    i = int(np.argmin((xs - cx) ** 2 + (ys - cy) ** 2))
    return int(xs[i]), int(ys[i])


def detect_signboards(
    image: RasterImage,
    backend: SegmentationBackend,
    settings: PrivacySettings | None = None,
) -> list[SignRegion]:
    """White-box HSV candidates, gated by area and rectangularity, refined
    by one foreground prompt through the segmentation backend.

    Refinement keeps the component of the thresholded confidence map that
    contains the seed; if that comes up empty the raw candidate stands.
    """
    settings = settings or PrivacySettings()
    candidates = connected_components(
        hsv_filter(image, settings.white_range), Connectivity.EIGHT
    )
    signs: list[SignRegion] = []
    for cand in candidates:
        if cand.area < settings.min_sign_area:
            continue
        if cand.area / cand.bbox_area < settings.min_rectangularity:
            continue
        seed = _nearest_mask_pixel(cand)
        conf = segment(
            backend,
            SegmentationRequest(image=image, prompts=(PointPrompt(seed[0], seed[1]),)),
        )
        refined = threshold_mask(conf, adaptive_tau(conf))
        chosen = cand
        if refined.bits[seed[1], seed[0]]:
            for comp in connected_components(refined, Connectivity.EIGHT):
                if comp.mask.bits[seed[1], seed[0]]:
                    chosen = comp
                    break
        final = Region(
            id=len(signs),
            mask=chosen.mask,
            area=chosen.area,
            bbox=chosen.bbox,
            centroid=chosen.centroid,
            aspect_ratio=chosen.aspect_ratio,
            mean_confidence=float(conf.values[chosen.mask.bits].mean()),
        )
        signs.append(
            SignRegion(region=final, rectangularity=final.area / final.bbox_area)
        )
    return signs


def anonymize(
    image: RasterImage,
    signs: list[SignRegion],
    kernel_half_width: int = DEFAULT_KERNEL_HALF_WIDTH,
    sigma: float = DEFAULT_SIGMA,
) -> RasterImage:
    """Gaussian-blur the union of sign bounding boxes; marks signs blurred."""
    for s in signs:
        r = s.region
        if (r.mask.height, r.mask.width) != (image.height, image.width):
            raise ValueError("sign mask dimensions must match image")
    if not signs:
        return image
    union = np.zeros((image.height, image.width), dtype=bool)
    for s in signs:
        x0, y0, x1, y1 = s.region.bbox
        union[y0 : y1 + 1, x0 : x1 + 1] = True
    out = blur_within(image, BinaryMask(union), kernel_half_width, sigma)
    for s in signs:
        s.blurred = True
    return out


class OcrMethod(enum.Enum):
    BINARIZE = "binarize"
    CONTRAST_STRETCH = "contrast_stretch"
    DENOISE = "denoise"
    DESKEW = "deskew"


def _gray(pixels: np.ndarray) -> np.ndarray:
    f = pixels.astype(np.float64)
    return 0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]


def _otsu_u8(gray: np.ndarray) -> float:
    from .segbackend import _otsu_plateau

    hist = np.bincount(np.clip(gray, 0, 255).astype(np.uint8).ravel(), minlength=256)
    plateau = _otsu_plateau(hist)
    if plateau is None:
        return 127.5
    first, last = plateau
    return 0.5 * (first + last) + 1.0  # midpoint of the maximizing split range


def estimate_text_angle(crop: np.ndarray) -> float:
    """Dominant text-line angle in degrees, from dark-pixel centroids.

    The crop is sliced into vertical bands along the text direction; the
    mean dark-pixel position per band traces the tilt, and a total-least-
    squares fit through those centroids gives the angle. Returns a value
    in (-90, 90], 0 meaning perfectly horizontal text.
    """
    gray = _gray(crop)
    dark = gray < _otsu_u8(gray)
    if dark.sum() < 4:
        return 0.0
    h, w = dark.shape
    band_w = max(4, w // 24)
    bands = []
    for x0 in range(0, w, band_w):
        band = dark[:, x0 : x0 + band_w]
        ys, xs = np.nonzero(band)
        if len(ys) == 0:
            continue
        bands.append((len(ys), Point2D(x0 + xs.mean(), ys.mean())))
    if len(bands) < 2:
        return 0.0
    # Bands clipped at the text ends carry stray fragments; keep only
    # bands with a healthy share of the median dark count.
    median = float(np.median([c for c, _ in bands]))
    pts = [p for c, p in bands if c >= 0.5 * median]
    if len(pts) < 2:
        pts = [p for _, p in bands]
    try:
        angle = fit_line(pts).angle_deg
    except ValueError:
        return 0.0
    if angle > 90.0:
        angle -= 180.0
    return angle


def ocr_preprocess(
    image: RasterImage, bbox: tuple[int, int, int, int], method: OcrMethod
) -> RasterImage:
    """One of four text-conditioning transforms applied to the bbox crop."""
    x0, y0, x1, y1 = bbox
    if not (0 <= x0 <= x1 < image.width and 0 <= y0 <= y1 < image.height):
        raise ValueError("region bbox outside image")
    crop = image.pixels[y0 : y1 + 1, x0 : x1 + 1]

    if method is OcrMethod.BINARIZE:
        gray = _gray(crop)
        out = np.where(gray >= _otsu_u8(gray), 255, 0).astype(np.uint8)
        return RasterImage(np.repeat(out[..., None], 3, axis=2))

    if method is OcrMethod.CONTRAST_STRETCH:
        out = crop.astype(np.float64)
        for ch in range(3):
            p2, p98 = np.percentile(out[..., ch], (2.0, 98.0))
            if p98 > p2:
                out[..., ch] = (out[..., ch] - p2) * (255.0 / (p98 - p2))
        return RasterImage(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))

    if method is OcrMethod.DENOISE:
        out = np.empty_like(crop)
        for ch in range(3):
            out[..., ch] = ndimage.median_filter(crop[..., ch], size=3, mode="nearest")
        return RasterImage(out)

    if method is OcrMethod.DESKEW:
        angle = estimate_text_angle(crop)
        if abs(angle) < 1e-9:
            return RasterImage(crop.copy())
        out = ndimage.rotate(
            crop, angle, reshape=False, order=1, mode="nearest", axes=(0, 1)
        )
        return RasterImage(np.clip(out, 0, 255).astype(np.uint8))

    raise ValueError(f"unknown method {method}")


def extract_sign_text(
    image: RasterImage,
    sign: SignRegion,
    settings: PrivacySettings,
    method: OcrMethod = OcrMethod.BINARIZE,
) -> str | None:
    """Run the configured external OCR command on a preprocessed sign crop.

    Returns the command's stdout, or None when no command is configured.
    The command receives one argument: the path of a temporary PNG crop.
    """
    if not settings.ocr_command:
        return None
    import os
    import shlex
    import subprocess
    import tempfile

    crop = ocr_preprocess(image, sign.region.bbox, method)
    with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as tmp:
        path = tmp.name
    try:
        crop.save(path)
        result = subprocess.run(
            [*shlex.split(settings.ocr_command), path],
            capture_output=True,
            text=True,
            timeout=60,
        )
        if result.returncode != 0:
            raise RuntimeError(
                f"OCR command failed ({result.returncode}): {result.stderr.strip()}"
            )
        return result.stdout
    finally:
        os.unlink(path)


def k_anonymize_locations(
    sign_centroids, cell_px: float, k: int = 3
) -> tuple[list[tuple[int, int, int]], int]:
    """Quantize centroids to a grid; publish only cells holding >= k.

    Returns (published_cells, suppressed_cell_count); published cells are
    (cell_x, cell_y, count) sorted lexicographically. Raw centroids never
    leave this function.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if cell_px <= 0:
        raise ValueError("cell_px must be positive")
    counts: dict[tuple[int, int], int] = {}
    for p in sign_centroids:
        cell = (math.floor(p[0] / cell_px), math.floor(p[1] / cell_px))
        counts[cell] = counts.get(cell, 0) + 1
    published = sorted(
        (cx, cy, n) for (cx, cy), n in counts.items() if n >= k
    )
    suppressed = sum(1 for n in counts.values() if n < k)
    return published, suppressed
