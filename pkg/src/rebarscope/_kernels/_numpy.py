"""NumPy/SciPy implementations of the hot raster and clustering kernels.

This module is the pure-Python side of the kernel pair; a compiled twin
(`_core.pyx`) implements the same functions with identical semantics.
Rounding is floor(x + 0.5) everywhere so both sides agree bit for bit.

Conventions shared by both implementations:
  * RGB/HSV rasters are (h, w, 3) uint8; hue lives on the 0..179 scale.
  * Binary masks are (h, w) bool.
  * `label_mask` numbers components 1..n in raster-scan first-touch order.
  * `dbscan_labels` returns -1 for noise and cluster ids 0..k-1 in
    first-touch order of the input sequence.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def rgb_to_hsv_u8(rgb: np.ndarray) -> np.ndarray:
    """8-bit RGB to HSV with H in [0,179], S and V in [0,255]."""
    f = rgb.astype(np.float64)
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    v = f.max(axis=-1)
    delta = v - f.min(axis=-1)
    s = np.where(v > 0, 255.0 * delta / np.where(v > 0, v, 1.0), 0.0)

    h = np.zeros_like(v)
    nz = delta > 0
    d = np.where(nz, delta, 1.0)
    rmax = nz & (v == r)
    gmax = nz & (v == g) & ~rmax
    bmax = nz & ~rmax & ~gmax
    h = np.where(rmax, 60.0 * (g - b) / d, h)
    h = np.where(gmax, 60.0 * (b - r) / d + 120.0, h)
    h = np.where(bmax, 60.0 * (r - g) / d + 240.0, h)
    h = np.mod(h, 360.0)

    hh = np.floor(h / 2.0 + 0.5)
    hh = np.where(hh >= 180.0, 0.0, hh)  # 359.x rounds to 180, wraps to 0
    ss = np.floor(s + 0.5)
    out = np.stack([hh, ss, v], axis=-1)
    return out.astype(np.uint8)


def hsv_to_rgb_u8(hsv: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_hsv_u8 (exact up to 8-bit quantization)."""
    h = hsv[..., 0].astype(np.float64) * 2.0
    s = hsv[..., 1].astype(np.float64) / 255.0
    v = hsv[..., 2].astype(np.float64)

    c = v * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    sector = np.floor(hp).astype(np.int64) % 6

    zeros = np.zeros_like(c)
    r1 = np.select([sector == 0, sector == 1, sector == 2,
                    sector == 3, sector == 4, sector == 5],
                   [c, x, zeros, zeros, x, c])
    g1 = np.select([sector == 0, sector == 1, sector == 2,
                    sector == 3, sector == 4, sector == 5],
                   [x, c, c, x, zeros, zeros])
    b1 = np.select([sector == 0, sector == 1, sector == 2,
                    sector == 3, sector == 4, sector == 5],
                   [zeros, zeros, x, c, c, x])
    m = v - c
    out = np.stack([r1 + m, g1 + m, b1 + m], axis=-1)
    out = np.clip(np.floor(out + 0.5), 0.0, 255.0)
    return out.astype(np.uint8)


def in_range_u8(hsv: np.ndarray, lo, hi) -> np.ndarray:
    """Inclusive per-channel box test on an HSV raster."""
    lo = np.asarray(lo, dtype=np.uint8)
    hi = np.asarray(hi, dtype=np.uint8)
    return np.logical_and(hsv >= lo, hsv <= hi).all(axis=-1)


def gaussian_kernel1d(k: int, sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian with taps at offsets -k..k."""
    offs = np.arange(-k, k + 1, dtype=np.float64)
    w = np.exp(-(offs * offs) / (2.0 * sigma * sigma))
    return w / w.sum()


def gaussian_blur_u8(img: np.ndarray, k: int, sigma: float) -> np.ndarray:
    """Separable (2k+1)^2 Gaussian blur with clamp-to-edge borders.

    Separating the passes is exact here because the border clamp acts on
    each coordinate independently.
    """
    w = gaussian_kernel1d(k, sigma)
    f = img.astype(np.float64)
    f = ndimage.correlate1d(f, w, axis=1, mode="nearest")
    f = ndimage.correlate1d(f, w, axis=0, mode="nearest")
    return np.clip(np.floor(f + 0.5), 0.0, 255.0).astype(np.uint8)


def label_mask(mask: np.ndarray, connectivity: int) -> tuple[np.ndarray, int]:
    """Connected-component labeling; labels follow raster first-touch order."""
    structure = _STRUCT_8 if connectivity == 8 else _STRUCT_4
    labels, n = ndimage.label(mask, structure=structure)
    return labels.astype(np.int32, copy=False), int(n)


def component_stats(labels: np.ndarray, n: int):
    """Per-label area, inclusive bbox (xmin,ymin,xmax,ymax) and centroid (x,y)."""
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:].astype(np.int64)
    bboxes = np.zeros((n, 4), dtype=np.int32)
    centroids = np.zeros((n, 2), dtype=np.float64)
    ys, xs = np.nonzero(labels)
    if len(ys) == 0:
        return areas, bboxes, centroids
    lab = labels[ys, xs] - 1
    order = np.argsort(lab, kind="stable")
    sl, sx, sy = lab[order], xs[order], ys[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(sl)) + 1])
    present = sl[starts]
    bboxes[present, 0] = np.minimum.reduceat(sx, starts)
    bboxes[present, 1] = np.minimum.reduceat(sy, starts)
    bboxes[present, 2] = np.maximum.reduceat(sx, starts)
    bboxes[present, 3] = np.maximum.reduceat(sy, starts)
    nz = areas > 0
    centroids[nz, 0] = np.bincount(lab, weights=xs, minlength=n)[nz] / areas[nz]
    centroids[nz, 1] = np.bincount(lab, weights=ys, minlength=n)[nz] / areas[nz]
    return areas, bboxes, centroids


def dbscan_labels(pts: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density clustering; clusters expand to completion in seed-scan order.

    A border point therefore belongs to the earliest-seeded cluster that
    has a core point within eps of it.
    """
    n = len(pts)
    labels = np.full(n, -2, dtype=np.int32)
    if n == 0:
        return labels
    tree = cKDTree(pts)
    neigh = tree.query_ball_point(pts, r=eps)
    core = np.fromiter((len(nb) >= min_pts for nb in neigh), dtype=bool, count=n)

    cid = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        if not core[i]:
            labels[i] = -1
            continue
        labels[i] = cid
        stack = [i]
        while stack:
            j = stack.pop()
            for q in neigh[j]:
                lq = labels[q]
                if lq == -2:
                    labels[q] = cid
                    if core[q]:
                        stack.append(q)
                elif lq == -1:
                    labels[q] = cid
        cid += 1
    return labels


def color_conf_field(hsv2: np.ndarray, colors: np.ndarray, sigma: float):
    """Gaussian color-similarity field against the nearest of several colors.

    `hsv2` is the (h, w, 3) float32 raster in doubled-hue space (2h, s, v);
    `colors` is (p, 3) in the same space. Returns (conf, within) where
    conf = exp(-d2/(2 sigma^2)) for the squared distance d2 to the nearest
    color and within = d2 <= (2 sigma)^2. All coordinates are small
    integers, so d2 is exact in float64.
    """
    h, w, _ = hsv2.shape
    x = hsv2.reshape(-1, 3).astype(np.float64)
    c = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    cn = (c * c).sum(axis=1)

    npix = h * w
    conf = np.empty(npix, dtype=np.float32)
    within = np.empty(npix, dtype=bool)
    inv = 1.0 / (2.0 * sigma * sigma)
    thr = (2.0 * sigma) ** 2

    block = 1 << 16
    for a in range(0, npix, block):
        b = min(a + block, npix)
        xb = x[a:b]
        d2 = (xb * xb).sum(axis=1)[:, None] - 2.0 * (xb @ c.T) + cn[None, :]
        d2m = d2.min(axis=1)
        np.maximum(d2m, 0.0, out=d2m)
        conf[a:b] = np.exp(-d2m * inv)
        within[a:b] = d2m <= thr
    return conf.reshape(h, w), within.reshape(h, w)
