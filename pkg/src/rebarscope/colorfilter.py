"""HSV box filtering and the rust / white-signboard presets."""

from __future__ import annotations

from dataclasses import dataclass

from . import _kernels as K
from .raster import BinaryMask, HsvImage, HsvPixel, RasterImage, rgb_to_hsv


@dataclass(frozen=True)
class HsvRange:
    """Inclusive per-channel HSV box; hue on the 0..179 scale."""

    h_min: int
    h_max: int
    s_min: int
    s_max: int
    v_min: int
    v_max: int

    def __post_init__(self):
        for lo, hi, cap, name in (
            (self.h_min, self.h_max, 179, "h"),
            (self.s_min, self.s_max, 255, "s"),
            (self.v_min, self.v_max, 255, "v"),
        ):
            if not (0 <= lo <= hi <= cap):
                raise ValueError(f"invalid {name} range [{lo}, {hi}] (cap {cap})")

    def contains(self, px: HsvPixel) -> bool:
        return (
            self.h_min <= px.h <= self.h_max
            and self.s_min <= px.s <= self.s_max
            and self.v_min <= px.v <= self.v_max
        )

    def as_list(self) -> list[int]:
        """Config-file form: [h_min, h_max, s_min, s_max, v_min, v_max]."""
        return [self.h_min, self.h_max, self.s_min, self.s_max, self.v_min, self.v_max]

    @classmethod
    def from_list(cls, vals) -> "HsvRange":
        if len(vals) != 6:
            raise ValueError("HSV range needs exactly six integers")
        return cls(*(int(v) for v in vals))


def hsv_filter(image: RasterImage, rng: HsvRange) -> BinaryMask:
    """True exactly where all three channels fall inside the box (inclusive)."""
    return hsv_filter_grid(rgb_to_hsv(image), rng)


def hsv_filter_grid(hsv: HsvImage, rng: HsvRange) -> BinaryMask:
    """Same box test applied to an already-converted HSV raster."""
    return BinaryMask(
        K.in_range_u8(
            hsv.values,
            (rng.h_min, rng.s_min, rng.v_min),
            (rng.h_max, rng.s_max, rng.v_max),
        )
    )


def rust_range() -> HsvRange:
    """Field-calibrated rust color box."""
    return HsvRange(0, 177, 31, 135, 28, 142)


def white_signboard_range() -> HsvRange:
    """Low-saturation, high-value box for white construction signboards.

    Conservative defaults; tune via the config file when field imagery
    disagrees.
    """
    return HsvRange(0, 179, 0, 40, 180, 255)
