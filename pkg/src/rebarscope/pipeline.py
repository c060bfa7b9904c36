"""Three-stage detection orchestration.

Stage 1 sweeps a coarse prompt lattice over the whole frame, stage 2
drops dense prompt grids onto HSV rust candidates, and stage 3 re-prompts
along the recovered rebar line pattern. Regions are deduplicated by
overlap and the privacy phase always runs, pattern or not.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import Point2D, RebarPattern, detect_pattern
from .colorfilter import hsv_filter, rust_range
from .privacy import PrivacyActions, PrivacySettings, anonymize, detect_signboards, k_anonymize_locations
from .raster import (
    BinaryMask,
    ConfidenceMap,
    Connectivity,
    RasterImage,
    Region,
    Stage,
    connected_components,
)
from .segbackend import (
    BackendError,
    PointPrompt,
    SegmentationBackend,
    SegmentationRequest,
    adaptive_tau,
    segment,
    threshold_mask,
)

STAGE3_CENTROID_GAP_PX = 10.0


@dataclass
class PipelineConfig:
    auto_grid_side: int = 32
    dense_grid_sides: tuple[int, int, int] = (5, 7, 9)
    dense_small_max_px2: int = 1_000
    dense_large_min_px2: int = 10_000
    area_min: int = 70
    area_max: int = 2_000
    aspect_min: float = 2.0
    overlap_dedup_threshold: float = 0.5
    dbscan_eps: float = 60.0
    dbscan_min_pts: int = 2
    angle_tol_deg: float = 5.0
    tau: float | None = None  # None selects the adaptive (Otsu) threshold
    shape_filter_all_stages: bool = False

    def __post_init__(self):
        if not self.area_min < self.area_max:
            raise ValueError("area_min must be < area_max")
        if not (0.0 < self.overlap_dedup_threshold <= 1.0):
            raise ValueError("overlap_dedup_threshold must be in (0, 1]")
        if self.auto_grid_side < 1 or any(s < 1 for s in self.dense_grid_sides):
            raise ValueError("grid sides must be >= 1")
        if self.tau is not None and not (0.0 <= self.tau <= 1.0):
            raise ValueError("fixed tau must lie in [0, 1]")


@dataclass
class StageStats:
    name: str
    prompts: int
    regions_found: int
    ms: float


@dataclass
class DetectionReport:
    image: str
    config_hash: str
    stages: list[StageStats]
    pattern: RebarPattern
    regions: list[Region]
    regions_pre_dedup: int
    privacy: PrivacyActions | None = None
    privacy_k: int = 3
    metrics: dict | None = None
    anonymized: RasterImage | None = None  # in-memory only, not serialized

    def to_json_dict(self) -> dict:
        return {
            "image": self.image,
            "config_hash": self.config_hash,
            "stages": [
                {
                    "name": s.name,
                    "prompts": s.prompts,
                    "regions_found": s.regions_found,
                    "ms": round(s.ms, 3),
                }
                for s in self.stages
            ],
            "pattern": {
                "parallel": self.pattern.parallel,
                "lines": [
                    {
                        "angle_deg": round(ln.angle_deg, 4),
                        "offset_px": round(ln.distance_origin, 2),
                        "inliers": len(ln.inliers),
                        "rms_px": round(ln.rms_residual, 3),
                    }
                    for ln in self.pattern.lines
                ],
                "mean_spacing_px": round(self.pattern.mean_spacing_px, 2),
                "mean_angle_deg": round(self.pattern.mean_angle_deg, 3),
            },
            "regions": [
                {
                    "id": r.id,
                    "stage": r.stage.value if r.stage else None,
                    "bbox": list(r.bbox),
                    "area": r.area,
                    "aspect_ratio": round(r.aspect_ratio, 3),
                    "centroid": [round(r.centroid[0], 2), round(r.centroid[1], 2)],
                    "mean_confidence": round(r.mean_confidence, 4),
                }
                for r in self.regions
            ],
            "regions_pre_dedup": self.regions_pre_dedup,
            "privacy": self.privacy.to_json_dict(self.privacy_k) if self.privacy else None,
            "metrics": self.metrics,
        }


def _lattice(extent: int, side: int) -> list[int]:
    """Integer cell-center coordinates of a uniform 1D lattice."""
    return [int((i + 0.5) * extent / side) for i in range(side)]


def stage1_auto_prompts(image: RasterImage, cfg: PipelineConfig) -> list[SegmentationRequest]:
    """One single-prompt request per cell center of the coarse lattice."""
    side = cfg.auto_grid_side
    if image.width < side or image.height < side:
        raise ValueError(f"image smaller than {side}px per side")
    xs = _lattice(image.width, side)
    ys = _lattice(image.height, side)
    return [
        SegmentationRequest(image=image, prompts=(PointPrompt(x, y),))
        for y in ys
        for x in xs
    ]


def _dense_side(cfg: PipelineConfig, bbox_area: int) -> int:
    small, mid, large = cfg.dense_grid_sides
    if bbox_area < cfg.dense_small_max_px2:
        return small
    if bbox_area > cfg.dense_large_min_px2:
        return large
    return mid


def stage2_hsv_prompts(image: RasterImage, cfg: PipelineConfig) -> list[SegmentationRequest]:
    """A dense prompt grid per rust-colored candidate component.

    Grid side follows the candidate's bbox area; lattice points that miss
    the component mask are dropped, and a candidate whose grid has no
    surviving point produces no request.
    """
    candidates = connected_components(hsv_filter(image, rust_range()), Connectivity.EIGHT)
    requests: list[SegmentationRequest] = []
    for cand in candidates:
        x0, y0, x1, y1 = cand.bbox
        side = _dense_side(cfg, cand.bbox_area)
        seen: set[tuple[int, int]] = set()
        prompts: list[PointPrompt] = []
        for dy in _lattice(y1 - y0 + 1, side):
            for dx in _lattice(x1 - x0 + 1, side):
                x, y = x0 + dx, y0 + dy
                if cand.mask.bits[y, x] and (x, y) not in seen:
                    seen.add((x, y))
                    prompts.append(PointPrompt(x, y))
        if prompts:
            requests.append(SegmentationRequest(image=image, prompts=tuple(prompts)))
    return requests


def shape_filter(regions: list[Region], cfg: PipelineConfig) -> list[Region]:
    """Keep regions with aspect >= aspect_min and area within bounds (inclusive)."""
    return [
        r
        for r in regions
        if r.aspect_ratio >= cfg.aspect_min and cfg.area_min <= r.area <= cfg.area_max
    ]


def _area_filter(regions: list[Region], cfg: PipelineConfig) -> list[Region]:
    """Blob stages keep the area bounds but waive the aspect test."""
    if cfg.shape_filter_all_stages:
        return shape_filter(regions, cfg)
    return [r for r in regions if cfg.area_min <= r.area <= cfg.area_max]


def _sample_line(
    base: tuple[float, float],
    direction: tuple[float, float],
    step: float,
    width: int,
    height: int,
) -> list[tuple[int, int]]:
    """Integer pixel samples along a line, clipped to the frame."""
    diag = float(np.hypot(width, height))
    out = []
    k = 0
    while k * step <= diag:
        for t in {k * step, -k * step} if k else {0.0}:
            x = base[0] + t * direction[0]
            y = base[1] + t * direction[1]
            xi, yi = int(round(x)), int(round(y))
            if 0 <= xi < width and 0 <= yi < height:
                out.append((xi, yi))
        k += 1
    return sorted(set(out))


def _stage3_points(
    pattern: RebarPattern,
    width: int,
    height: int,
    existing_centroids: list[tuple[float, float]],
) -> list[tuple[int, int]]:
    group = [pattern.lines[i] for i in pattern.parallel_group]
    theta = math.radians(pattern.mean_angle_deg)
    d = (math.cos(theta), math.sin(theta))
    n = (-math.sin(theta), math.cos(theta))
    spacing = pattern.mean_spacing_px
    step = spacing / 2.0

    feet = sorted(
        (ln.foot_point() for ln in group),
        key=lambda p: p[0] * n[0] + p[1] * n[1],
    )

    bases: list[tuple[float, float]] = list(feet)
    for a, b in zip(feet, feet[1:]):  # between adjacent line pairs
        bases.append(((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0))
    lo, hi = feet[0], feet[-1]  # one extrapolated line beyond each outermost
    bases.append((lo[0] - spacing * n[0], lo[1] - spacing * n[1]))
    bases.append((hi[0] + spacing * n[0], hi[1] + spacing * n[1]))

    cents = np.asarray(existing_centroids, dtype=np.float64).reshape(-1, 2)
    points: list[tuple[int, int]] = []
    for base in bases:
        for x, y in _sample_line(base, d, step, width, height):
            if len(cents) and np.min(np.hypot(cents[:, 0] - x, cents[:, 1] - y)) <= STAGE3_CENTROID_GAP_PX:
                continue
            points.append((x, y))
    return sorted(set(points))


def stage3_pattern_prompts(
    pattern: RebarPattern,
    width: int,
    height: int,
    existing_centroids: list[tuple[float, float]],
    image: RasterImage,
    cfg: PipelineConfig,
) -> list[SegmentationRequest]:
    """Re-prompt along, between, and just outside the parallel line group.

    Samples run at half the recovered spacing, skip positions within 10 px
    of an already-detected region centroid, and are clipped to the frame.
    Each surviving point becomes its own single-prompt request.
    """
    if not pattern.parallel:
        raise ValueError("stage 3 requires a parallel pattern")
    pts = _stage3_points(pattern, width, height, existing_centroids)
    return [SegmentationRequest(image=image, prompts=(PointPrompt(x, y),)) for x, y in pts]


def dedup(regions: list[Region], threshold: float) -> list[Region]:
    """Greedy overlap suppression.

    Regions are visited in descending mean-confidence order (ties: larger
    area, then lower id); one is dropped when the fraction of its own area
    already covered by kept regions reaches the threshold.
    """
    if not (0.0 < threshold <= 1.0):
        raise ValueError("threshold must be in (0, 1]")
    order = sorted(regions, key=lambda r: (-r.mean_confidence, -r.area, r.id))
    kept: list[Region] = []
    for cand in order:
        cx0, cy0, cx1, cy1 = cand.bbox
        removed = False
        for k in kept:
            kx0, ky0, kx1, ky1 = k.bbox
            ix0, iy0 = max(cx0, kx0), max(cy0, ky0)
            ix1, iy1 = min(cx1, kx1), min(cy1, ky1)
            if ix0 > ix1 or iy0 > iy1:
                continue
            window = (slice(iy0, iy1 + 1), slice(ix0, ix1 + 1))
            inter = int(np.logical_and(cand.mask.bits[window], k.mask.bits[window]).sum())
            if inter / cand.area >= threshold:
                removed = True
                break
        if not removed:
            kept.append(cand)
    return sorted(kept, key=lambda r: r.id)


class _ExtractionCache:
    """Memoizes region extraction per distinct confidence-map object.

    The reference backend returns the same immutable map object for
    repeated equivalent prompts, so extraction repeats verbatim; keeping a
    strong reference to each map keeps ids stable for the run.
    """

    def __init__(self):
        self._store: dict[int, tuple[ConfidenceMap, list[Region], float]] = {}

    def extract(self, conf: ConfidenceMap, cfg: PipelineConfig) -> tuple[list[Region], float]:
        key = id(conf)
        hit = self._store.get(key)
        if hit is None:
            tau = cfg.tau if cfg.tau is not None else adaptive_tau(conf)
            mask = threshold_mask(conf, tau)
            regions = connected_components(mask, Connectivity.EIGHT, min_area=cfg.area_min)
            for r in regions:
                r.mean_confidence = float(conf.values[r.mask.bits].mean())
            hit = (conf, regions, tau)
            self._store[key] = hit
        return hit[1], hit[2]


def _run_stage(
    requests: list[SegmentationRequest],
    backend: SegmentationBackend,
    cfg: PipelineConfig,
    cache: _ExtractionCache,
    stage: Stage,
    id_start: int,
) -> list[Region]:
    regions: list[Region] = []
    next_id = id_start
    for req in requests:
        try:
            conf = segment(backend, req)
        except BackendError as exc:
            raise BackendError(
                exc.request_id, f"[stage {stage.value}] {exc.detail}"
            ) from exc
        templates, _ = cache.extract(conf, cfg)
        for t in templates:
            regions.append(replace(t, id=next_id, stage=stage))
            next_id += 1
    return regions


def run_pipeline(
    image: RasterImage,
    backend: SegmentationBackend,
    cfg: PipelineConfig | None = None,
    privacy_settings: PrivacySettings | None = None,
    image_name: str = "",
    config_hash: str = "",
    run_privacy: bool = True,
) -> DetectionReport:
    """Full detection and privacy pass over one image.

    Deterministic for a fixed image, config, and reference backend; the
    privacy phase runs regardless of whether a rebar pattern was found.
    """
    cfg = cfg or PipelineConfig()
    privacy_settings = privacy_settings or PrivacySettings()
    cache = _ExtractionCache()
    stages: list[StageStats] = []

    t0 = time.perf_counter()
    reqs1 = stage1_auto_prompts(image, cfg)
    found1 = _area_filter(_run_stage(reqs1, backend, cfg, cache, Stage.AUTO, 0), cfg)
    stages.append(
        StageStats("auto", sum(len(r.prompts) for r in reqs1), len(found1),
                   (time.perf_counter() - t0) * 1e3)
    )

    t1 = time.perf_counter()
    reqs2 = stage2_hsv_prompts(image, cfg)
    raw2 = _run_stage(reqs2, backend, cfg, cache, Stage.HSV_GRID,
                      id_start=1_000_000)
    found2 = shape_filter(raw2, cfg)
    stages.append(
        StageStats("hsv_grid", sum(len(r.prompts) for r in reqs2), len(found2),
                   (time.perf_counter() - t1) * 1e3)
    )

    t2 = time.perf_counter()
    detected = found1 + found2
    pattern = detect_pattern(
        [Point2D(*r.centroid) for r in detected],
        cfg.dbscan_eps,
        cfg.dbscan_min_pts,
        cfg.angle_tol_deg,
    )
    found3: list[Region] = []
    prompts3 = 0
    if pattern.parallel:
        reqs3 = stage3_pattern_prompts(
            pattern, image.width, image.height,
            [r.centroid for r in detected], image, cfg,
        )
        prompts3 = sum(len(r.prompts) for r in reqs3)
        found3 = _area_filter(
            _run_stage(reqs3, backend, cfg, cache, Stage.PATTERN, id_start=2_000_000), cfg
        )
    stages.append(
        StageStats("pattern", prompts3, len(found3), (time.perf_counter() - t2) * 1e3)
    )

    merged = detected + found3
    for seq, r in enumerate(merged):  # stable public ids in stage order
        r.id = seq
    final = dedup(merged, cfg.overlap_dedup_threshold)

    t3 = time.perf_counter()
    privacy_actions = None
    anonymized = None
    if run_privacy:
        signs = detect_signboards(image, backend, privacy_settings)
        anonymized = anonymize(
            image, signs, privacy_settings.kernel_half_width, privacy_settings.sigma
        )
        published, suppressed = k_anonymize_locations(
            [s.region.centroid for s in signs],
            privacy_settings.cell_px,
            privacy_settings.k,
        )
        privacy_actions = PrivacyActions(
            signs=signs,
            kernel=(privacy_settings.kernel_half_width, privacy_settings.sigma),
            suppressed_cells=suppressed,
            published_cells=published,
        )
        stages.append(
            StageStats("privacy", len(signs), len(signs), (time.perf_counter() - t3) * 1e3)
        )

    return DetectionReport(
        image=image_name,
        config_hash=config_hash,
        stages=stages,
        pattern=pattern,
        regions=final,
        regions_pre_dedup=len(merged),
        privacy=privacy_actions,
        privacy_k=privacy_settings.k,
        anonymized=anonymized,
    )
