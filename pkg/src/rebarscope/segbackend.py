"""Pluggable segmentation: contract, reference backend, spool protocol.

The reference backend is a fully specified, deterministic stand-in for a
promptable foundation model so the whole pipeline runs and tests at desk
scale. External models plug in through a file-spool protocol (see
SpoolBackend) and must return a 16-bit single-channel PNG confidence map.
"""

from __future__ import annotations

import abc
import enum
import json
import os
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import _kernels as K
from .raster import BinaryMask, ConfidenceMap, RasterImage, rgb_to_hsv

COLOR_SIGMA = 40.0
UNREACHABLE_FACTOR = 0.2
TAU_CLAMP = (0.3, 0.8)


class PromptLabel(enum.Enum):
    FOREGROUND = "fg"
    BACKGROUND = "bg"


@dataclass(frozen=True)
class PointPrompt:
    x: int
    y: int
    label: PromptLabel = PromptLabel.FOREGROUND


@dataclass(frozen=True)
class SegmentationRequest:
    """A single segmentation job: one image, one or more seed points."""

    image: RasterImage
    prompts: tuple[PointPrompt, ...]
    request_id: str = field(default_factory=lambda: uuid.uuid4().hex)

    def __post_init__(self):
        object.__setattr__(self, "prompts", tuple(self.prompts))
        if not self.prompts:
            raise ValueError("request needs at least one prompt")
        if not any(p.label is PromptLabel.FOREGROUND for p in self.prompts):
            raise ValueError("request needs at least one foreground prompt")
        for p in self.prompts:
            if not (0 <= p.x < self.image.width and 0 <= p.y < self.image.height):
                raise ValueError(f"prompt ({p.x}, {p.y}) outside image bounds")


class BackendError(RuntimeError):
    """Segmentation failure, carrying the request id for diagnostics."""

    def __init__(self, request_id: str, message: str):
        super().__init__(f"request {request_id}: {message}")
        self.request_id = request_id
        self.detail = message


class SegmentationBackend(abc.ABC):
    """Capability contract: turn a request into a confidence map."""

    @abc.abstractmethod
    def segment(self, request: SegmentationRequest) -> ConfidenceMap: ...


def segment(backend: SegmentationBackend, request: SegmentationRequest) -> ConfidenceMap:
    """Run a request and enforce the output contract (dimensions, range)."""
    conf = backend.segment(request)
    if (conf.height, conf.width) != (request.image.height, request.image.width):
        raise BackendError(request.request_id, "confidence map dimensions mismatch")
    return conf


class ReferenceBackend(SegmentationBackend):
    """Deterministic color-similarity segmenter.

    For each pixel p, confidence is exp(-d^2 / (2 sigma^2)) where d is the
    Euclidean distance in doubled-hue HSV space (2h, s, v) from p to the
    nearest foreground prompt color. Pixels not flood-connected to any
    foreground prompt through the d <= 2 sigma region keep only 20% of
    that value; background prompts zero out their own flood basin.

    Pure and reentrant: responses for identical inputs are memoized per
    image, and repeated prompts with the same color and basin reuse the
    same (immutable) map object.
    """

    _FIELD_CACHE_MAX = 12
    _RESPONSE_CACHE_MAX = 24

    def __init__(self, sigma: float = COLOR_SIGMA):
        self.sigma = float(sigma)
        self._lock = threading.Lock()
        self._images: OrderedDict[int, dict] = OrderedDict()

    def _image_ctx(self, image: RasterImage) -> dict:
        key = id(image)
        ctx = self._images.get(key)
        if ctx is None:
            hsv = rgb_to_hsv(image).values.astype(np.float32)
            hsv2 = hsv.copy()
            hsv2[..., 0] *= 2.0
            ctx = {
                "image": image,  # strong ref keeps id() stable
                "hsv2": hsv2,
                "fields": OrderedDict(),
                "responses": OrderedDict(),
            }
            self._images[key] = ctx
            while len(self._images) > 4:
                self._images.popitem(last=False)
        else:
            self._images.move_to_end(key)
        return ctx

    def _field(self, ctx: dict, colors_key: tuple) -> tuple[np.ndarray, np.ndarray, int]:
        """conf0 and within-component labels for a set of prompt colors."""
        cache: OrderedDict = ctx["fields"]
        hit = cache.get(colors_key)
        if hit is not None:
            cache.move_to_end(colors_key)
            return hit
        colors = np.asarray(colors_key, dtype=np.float32)
        conf0, within = K.color_conf_field(ctx["hsv2"], colors, self.sigma)
        labels, n = K.label_mask(within, 8)
        cache[colors_key] = (conf0, labels, n)
        while len(cache) > self._FIELD_CACHE_MAX:
            cache.popitem(last=False)
        return conf0, labels, n

    def segment(self, request: SegmentationRequest) -> ConfidenceMap:
        with self._lock:
            ctx = self._image_ctx(request.image)
            hsv2 = ctx["hsv2"]
            fg = [p for p in request.prompts if p.label is PromptLabel.FOREGROUND]
            bg = [p for p in request.prompts if p.label is PromptLabel.BACKGROUND]

            colors_key = tuple(sorted({tuple(hsv2[p.y, p.x].tolist()) for p in fg}))
            conf0, labels, _ = self._field(ctx, colors_key)
            seeds_key = tuple(sorted({int(labels[p.y, p.x]) for p in fg}))
            bg_key = tuple(sorted({(p.x, p.y) for p in bg}))

            resp_key = (colors_key, seeds_key, bg_key)
            responses: OrderedDict = ctx["responses"]
            hit = responses.get(resp_key)
            if hit is not None:
                responses.move_to_end(resp_key)
                return hit

            lut = np.full(int(labels.max()) + 1, np.float32(UNREACHABLE_FACTOR))
            lut[list(seeds_key)] = 1.0
            conf = conf0 * lut[labels]
            for x, y in bg_key:
                color = tuple(hsv2[y, x].tolist())
                _, blab, _ = self._field(ctx, (color,))
                conf[blab == blab[y, x]] = 0.0

            out = ConfidenceMap(conf)
            responses[resp_key] = out
            while len(responses) > self._RESPONSE_CACHE_MAX:
                responses.popitem(last=False)
            return out


def reference_segment(image: RasterImage, prompts) -> ConfidenceMap:
    """One-shot reference segmentation (no cache reuse across calls)."""
    req = SegmentationRequest(image=image, prompts=tuple(prompts))
    return segment(ReferenceBackend(), req)


def threshold_mask(conf: ConfidenceMap, tau: float) -> BinaryMask:
    """Bit true iff confidence >= tau (inclusive)."""
    if not (0.0 <= tau <= 1.0):
        raise ValueError("tau must lie in [0, 1]")
    return BinaryMask(conf.values >= tau)


def _otsu_plateau(hist: np.ndarray) -> tuple[int, int] | None:
    """First and last split index maximizing between-class variance.

    A split at index i sends bins 0..i to class 0. Returns None when the
    histogram is degenerate (fewer than two occupied bins).
    """
    h = hist.astype(np.float64)
    total = h.sum()
    if total <= 0 or np.count_nonzero(h) < 2:
        return None
    centers = np.arange(len(h), dtype=np.float64) + 0.5
    w0 = np.cumsum(h)[:-1]
    w1 = total - w0
    m0 = np.cumsum(h * centers)[:-1]
    mt = float((h * centers).sum())
    valid = (w0 > 0) & (w1 > 0)
    mu0 = np.where(valid, m0 / np.where(w0 > 0, w0, 1.0), 0.0)
    mu1 = np.where(valid, (mt - m0) / np.where(w1 > 0, w1, 1.0), 0.0)
    sigma_b = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    best = sigma_b.max()
    plateau = np.flatnonzero(sigma_b == best)
    return int(plateau[0]), int(plateau[-1])


def adaptive_tau(conf: ConfidenceMap) -> float:
    """Otsu threshold over a 256-bin confidence histogram, clamped to [0.3, 0.8].

    On plateaus (perfectly separable histograms) the midpoint of the
    maximizing range is used, so a two-level map splits halfway between
    its modes.
    """
    if conf.values.size == 0:
        raise ValueError("empty confidence map")
    hist, edges = np.histogram(conf.values, bins=256, range=(0.0, 1.0))
    plateau = _otsu_plateau(hist)
    lo, hi = TAU_CLAMP
    if plateau is None:
        return lo
    first, last = plateau
    tau = 0.5 * (edges[first + 1] + edges[last + 1])
    return float(min(max(tau, lo), hi))


@dataclass
class SpoolBackend(SegmentationBackend):
    """Client side of the file-spool protocol for external segmenters.

    Layout: requests land in <spool>/req as <id>.png plus an atomically
    renamed <id>.json; the worker answers in <spool>/resp with
    <id>.png (16-bit grayscale, confidence = value / 65535) followed by an
    empty <id>.done marker, or <id>.err with a UTF-8 message. One request
    is in flight per backend instance.
    """

    spool: Path
    timeout_s: float = 30.0
    poll_s: float = 0.05
    keep_files: bool = False

    def __post_init__(self):
        self.spool = Path(self.spool)
        self._lock = threading.Lock()

    @property
    def req_dir(self) -> Path:
        return self.spool / "req"

    @property
    def resp_dir(self) -> Path:
        return self.spool / "resp"

    def segment(self, request: SegmentationRequest) -> ConfidenceMap:
        with self._lock:
            return self._roundtrip(request)

    def _roundtrip(self, request: SegmentationRequest) -> ConfidenceMap:
        rid = request.request_id
        self.req_dir.mkdir(parents=True, exist_ok=True)
        self.resp_dir.mkdir(parents=True, exist_ok=True)

        img_path = self.req_dir / f"{rid}.png"
        request.image.save(img_path)
        payload = {
            "request_id": rid,
            "image_path": str(img_path.resolve()),
            "prompts": [
                {"x": p.x, "y": p.y, "label": p.label.value} for p in request.prompts
            ],
        }
        tmp = self.req_dir / f".{rid}.json.tmp"
        tmp.write_text(json.dumps(payload), encoding="utf-8")
        os.replace(tmp, self.req_dir / f"{rid}.json")

        resp_png = self.resp_dir / f"{rid}.png"
        done = self.resp_dir / f"{rid}.done"
        err = self.resp_dir / f"{rid}.err"
        deadline = time.monotonic() + self.timeout_s
        try:
            while True:
                if err.exists():
                    raise BackendError(rid, err.read_text(encoding="utf-8").strip())
                if done.exists():
                    return self._read_response(request, resp_png)
                if time.monotonic() >= deadline:
                    raise BackendError(rid, f"timed out after {self.timeout_s:.1f}s")
                time.sleep(self.poll_s)
        finally:
            if not self.keep_files:
                for p in (img_path, self.req_dir / f"{rid}.json", resp_png, done, err):
                    p.unlink(missing_ok=True)

    def _read_response(self, request: SegmentationRequest, resp_png: Path) -> ConfidenceMap:
        rid = request.request_id
        try:
            with Image.open(resp_png) as im:
                arr = np.asarray(im)
        except Exception as exc:
            raise BackendError(rid, f"unreadable response PNG: {exc}") from exc
        if arr.ndim != 2 or arr.dtype != np.uint16:
            raise BackendError(
                rid, f"response must be 16-bit single-channel, got {arr.dtype} ndim={arr.ndim}"
            )
        if arr.shape != (request.image.height, request.image.width):
            raise BackendError(
                rid,
                f"response dimensions {arr.shape[::-1]} mismatch image "
                f"{(request.image.width, request.image.height)}",
            )
        return ConfidenceMap((arr.astype(np.float32) / 65535.0))
