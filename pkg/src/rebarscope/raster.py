"""Pixel-grid primitives: rasters, masks, color conversion, blur, labeling.

All grid types wrap read-only NumPy arrays, so instances are immutable
after construction and safe to share across threads. Coordinates are
(x, y) with x running along image width; arrays are indexed [y, x].
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

from . import _kernels as K


class Connectivity(enum.Enum):
    FOUR = 4
    EIGHT = 8


class Stage(enum.Enum):
    """Which detection pass produced a region."""

    AUTO = "auto"
    HSV_GRID = "hsv_grid"
    PATTERN = "pattern"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit RGB raster, row-major (h, w, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError("pixels must be (h, w, 3) uint8")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        object.__setattr__(self, "pixels", _frozen(np.ascontiguousarray(p)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def load(cls, path: str | Path) -> "RasterImage":
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("RGB"), dtype=np.uint8))

    def save(self, path: str | Path) -> None:
        # Fresh PIL image from the array: output carries no EXIF/metadata.
        Image.fromarray(self.pixels).save(path, format="PNG")


@dataclass(frozen=True, eq=False)
class ConfidenceMap:
    """Per-pixel segmentation confidence in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError("confidence map must be 2D")
        if v.dtype not in (np.float32, np.float64):
            v = v.astype(np.float32)
        if v.size and (float(v.min()) < 0.0 or float(v.max()) > 1.0):
            raise ValueError("confidence values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(np.ascontiguousarray(v)))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean pixel membership grid."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValueError("mask must be 2D")
        if b.dtype != np.bool_:
            b = b.astype(bool)
        object.__setattr__(self, "bits", _frozen(np.ascontiguousarray(b)))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def load(cls, path: str | Path) -> "BinaryMask":
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("L")) >= 128)

    def save(self, path: str | Path) -> None:
        Image.fromarray(np.where(self.bits, 255, 0).astype(np.uint8)).save(
            path, format="PNG"
        )


class HsvPixel(NamedTuple):
    """HSV triple with hue on the 0..179 scale and s, v on 0..255."""

    h: int
    s: int
    v: int


@dataclass(frozen=True, eq=False)
class HsvImage:
    """HSV raster, same layout as RasterImage with channels (h, s, v)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or v.shape[2] != 3 or v.dtype != np.uint8:
            raise ValueError("hsv values must be (h, w, 3) uint8")
        if v[..., 0].max(initial=0) > 179:
            raise ValueError("hue channel exceeds 179")
        object.__setattr__(self, "values", _frozen(np.ascontiguousarray(v)))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def pixel(self, x: int, y: int) -> HsvPixel:
        h, s, v = self.values[y, x]
        return HsvPixel(int(h), int(s), int(v))


@dataclass
class Region:
    """A connected candidate region with shape statistics.

    `mask` is full-frame; `bbox` is the inclusive (x_min, y_min, x_max,
    y_max) box around the true bits. `stage` stays None until a pipeline
    pass claims the region.
    """

    id: int
    mask: BinaryMask
    area: int
    bbox: tuple[int, int, int, int]
    centroid: tuple[float, float]
    aspect_ratio: float
    mean_confidence: float = 0.0
    stage: Stage | None = None

    @property
    def bbox_area(self) -> int:
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0 + 1) * (y1 - y0 + 1)


def rgb_to_hsv(image: RasterImage) -> HsvImage:
    """Convert to HSV; deterministic, matching the 0..179 hue convention."""
    return HsvImage(K.rgb_to_hsv_u8(image.pixels))


def hsv_to_rgb(hsv: HsvImage) -> RasterImage:
    """Inverse conversion; roundtrips RGB within +/-2 per channel."""
    return RasterImage(K.hsv_to_rgb_u8(hsv.values))


def gaussian_blur(image: RasterImage, kernel_half_width: int, sigma: float) -> RasterImage:
    """Blur with a normalized (2k+1)x(2k+1) Gaussian; borders replicate."""
    if kernel_half_width < 1:
        raise ValueError("kernel_half_width must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return RasterImage(K.gaussian_blur_u8(image.pixels, int(kernel_half_width), float(sigma)))


def blur_within(
    image: RasterImage, mask: BinaryMask, kernel_half_width: int, sigma: float
) -> RasterImage:
    """Replace masked pixels with the whole-image blur; others are untouched."""
    if (mask.height, mask.width) != (image.height, image.width):
        raise ValueError("mask dimensions must match image")
    if not mask.bits.any():
        return image
    blurred = gaussian_blur(image, kernel_half_width, sigma)
    out = image.pixels.copy()
    out[mask.bits] = blurred.pixels[mask.bits]
    return RasterImage(out)


def connected_components(
    mask: BinaryMask,
    connectivity: Connectivity = Connectivity.EIGHT,
    min_area: int = 0,
) -> list[Region]:
    """Partition the mask's true bits into maximal connected regions.

    Regions are returned in raster first-touch order with ids 0..n-1
    (renumbered after the optional min_area filter). The stage field is
    left unset.
    """
    labels, n = K.label_mask(mask.bits, connectivity.value)
    if n == 0:
        return []
    areas, bboxes, centroids = K.component_stats(labels, n)
    regions: list[Region] = []
    for i in range(n):
        area = int(areas[i])
        if area < min_area:
            continue
        x0, y0, x1, y1 = (int(v) for v in bboxes[i])
        w = x1 - x0 + 1
        h = y1 - y0 + 1
        aspect = max(w, h) / min(w, h)
        regions.append(
            Region(
                id=len(regions),
                mask=BinaryMask(labels == i + 1),
                area=area,
                bbox=(x0, y0, x1, y1),
                centroid=(float(centroids[i][0]), float(centroids[i][1])),
                aspect_ratio=float(aspect),
            )
        )
    return regions
