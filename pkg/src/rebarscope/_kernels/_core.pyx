# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the NumPy kernels.

Semantics, rounding (floor(x + 0.5)) and label ordering match
``_numpy.py`` exactly; the module docstring there is the contract.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, floor, fmod

cnp.import_array()


def rgb_to_hsv_u8(const cnp.uint8_t[:, :, ::1] rgb):
    cdef Py_ssize_t h = rgb.shape[0], w = rgb.shape[1]
    out_arr = np.empty((h, w, 3), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t y, x
    cdef double r, g, b, v, mn, delta, s, hue, hh
    for y in range(h):
        for x in range(w):
            r = rgb[y, x, 0]
            g = rgb[y, x, 1]
            b = rgb[y, x, 2]
            v = r if r >= g else g
            if b > v:
                v = b
            mn = r if r <= g else g
            if b < mn:
                mn = b
            delta = v - mn
            s = 0.0 if v <= 0.0 else 255.0 * delta / v
            if delta <= 0.0:
                hue = 0.0
            elif v == r:
                hue = 60.0 * (g - b) / delta
            elif v == g:
                hue = 60.0 * (b - r) / delta + 120.0
            else:
                hue = 60.0 * (r - g) / delta + 240.0
            hue = fmod(hue, 360.0)
            if hue < 0.0:
                hue += 360.0
            hh = floor(hue / 2.0 + 0.5)
            if hh >= 180.0:
                hh = 0.0
            out[y, x, 0] = <cnp.uint8_t>hh
            out[y, x, 1] = <cnp.uint8_t>floor(s + 0.5)
            out[y, x, 2] = <cnp.uint8_t>v
    return out_arr


def hsv_to_rgb_u8(const cnp.uint8_t[:, :, ::1] hsv):
    cdef Py_ssize_t h = hsv.shape[0], w = hsv.shape[1]
    out_arr = np.empty((h, w, 3), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t y, x
    cdef double hdeg, s, v, c, hp, xv, m, r1, g1, b1
    cdef int sector
    for y in range(h):
        for x in range(w):
            hdeg = hsv[y, x, 0] * 2.0
            s = hsv[y, x, 1] / 255.0
            v = hsv[y, x, 2]
            c = v * s
            hp = hdeg / 60.0
            xv = c * (1.0 - fabs(fmod(hp, 2.0) - 1.0))
            sector = (<int>floor(hp)) % 6
            if sector == 0:
                r1 = c; g1 = xv; b1 = 0.0
            elif sector == 1:
                r1 = xv; g1 = c; b1 = 0.0
            elif sector == 2:
                r1 = 0.0; g1 = c; b1 = xv
            elif sector == 3:
                r1 = 0.0; g1 = xv; b1 = c
            elif sector == 4:
                r1 = xv; g1 = 0.0; b1 = c
            else:
                r1 = c; g1 = 0.0; b1 = xv
            m = v - c
            out[y, x, 0] = _round_u8(r1 + m)
            out[y, x, 1] = _round_u8(g1 + m)
            out[y, x, 2] = _round_u8(b1 + m)
    return out_arr


cdef inline cnp.uint8_t _round_u8(double val):
    val = floor(val + 0.5)
    if val < 0.0:
        val = 0.0
    elif val > 255.0:
        val = 255.0
    return <cnp.uint8_t>val


def in_range_u8(const cnp.uint8_t[:, :, ::1] hsv, lo, hi):
    cdef Py_ssize_t h = hsv.shape[0], w = hsv.shape[1]
    cdef cnp.uint8_t l0 = lo[0], l1 = lo[1], l2 = lo[2]
    cdef cnp.uint8_t h0 = hi[0], h1 = hi[1], h2 = hi[2]
    out_arr = np.empty((h, w), dtype=np.bool_)
    cdef cnp.uint8_t[:, ::1] out = out_arr.view(np.uint8)
    cdef Py_ssize_t y, x
    for y in range(h):
        for x in range(w):
            out[y, x] = (
                l0 <= hsv[y, x, 0] <= h0
                and l1 <= hsv[y, x, 1] <= h1
                and l2 <= hsv[y, x, 2] <= h2
            )
    return out_arr


def gaussian_blur_u8(const cnp.uint8_t[:, :, ::1] img, int k, double sigma):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef Py_ssize_t y, x, xx, yy
    cdef int i
    kern_arr = np.empty(2 * k + 1, dtype=np.float64)
    cdef double[::1] kern = kern_arr
    cdef double total = 0.0, val
    for i in range(-k, k + 1):
        kern[i + k] = exp(-(<double>(i * i)) / (2.0 * sigma * sigma))
        total += kern[i + k]
    for i in range(2 * k + 1):
        kern[i] /= total

    tmp_arr = np.empty((h, w, 3), dtype=np.float64)
    cdef double[:, :, ::1] tmp = tmp_arr
    out_arr = np.empty((h, w, 3), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] out = out_arr
    acc_arr = np.empty((w, 3), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    cdef double kv, v0, v1, v2

    # Horizontal pass: one sweep over the taps with contiguous pixel reads.
    for y in range(h):
        for x in range(w):
            v0 = 0.0
            v1 = 0.0
            v2 = 0.0
            for i in range(-k, k + 1):
                xx = x + i
                if xx < 0:
                    xx = 0
                elif xx >= w:
                    xx = w - 1
                kv = kern[i + k]
                v0 += kv * img[y, xx, 0]
                v1 += kv * img[y, xx, 1]
                v2 += kv * img[y, xx, 2]
            tmp[y, x, 0] = v0
            tmp[y, x, 1] = v1
            tmp[y, x, 2] = v2
    # Vertical pass: accumulate whole rows so reads stay contiguous.
    for y in range(h):
        for x in range(w):
            acc[x, 0] = 0.0
            acc[x, 1] = 0.0
            acc[x, 2] = 0.0
        for i in range(-k, k + 1):
            yy = y + i
            if yy < 0:
                yy = 0
            elif yy >= h:
                yy = h - 1
            kv = kern[i + k]
            for x in range(w):
                acc[x, 0] += kv * tmp[yy, x, 0]
                acc[x, 1] += kv * tmp[yy, x, 1]
                acc[x, 2] += kv * tmp[yy, x, 2]
        for x in range(w):
            out[y, x, 0] = _round_u8(acc[x, 0])
            out[y, x, 1] = _round_u8(acc[x, 1])
            out[y, x, 2] = _round_u8(acc[x, 2])
    return out_arr


def label_mask(mask, int connectivity):
    if mask.dtype == np.bool_:
        mask_u8 = mask.view(np.uint8)
    else:
        mask_u8 = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef const cnp.uint8_t[:, ::1] m = mask_u8
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] lab = labels_arr
    queue_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = queue_arr
    cdef Py_ssize_t y, x, qh, qt, cy, cx, ny, nx
    cdef cnp.int64_t cur
    cdef int n = 0, di, dj
    cdef bint conn8 = connectivity == 8
    for y in range(h):
        for x in range(w):
            if m[y, x] != 0 and lab[y, x] == 0:
                n += 1
                lab[y, x] = n
                qh = 0
                qt = 0
                queue[qt] = y * w + x
                qt += 1
                while qh < qt:
                    cur = queue[qh]
                    qh += 1
                    cy = cur // w
                    cx = cur % w
                    for di in range(-1, 2):
                        for dj in range(-1, 2):
                            if di == 0 and dj == 0:
                                continue
                            if not conn8 and di != 0 and dj != 0:
                                continue
                            ny = cy + di
                            nx = cx + dj
                            if 0 <= ny < h and 0 <= nx < w and m[ny, nx] != 0 and lab[ny, nx] == 0:
                                lab[ny, nx] = n
                                queue[qt] = ny * w + nx
                                qt += 1
    return labels_arr, n


def component_stats(labels, int n):
    labels_c = np.ascontiguousarray(labels, dtype=np.int32)
    cdef const cnp.int32_t[:, ::1] lab = labels_c
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1]
    areas_arr = np.zeros(n, dtype=np.int64)
    bboxes_arr = np.zeros((n, 4), dtype=np.int32)
    cent_arr = np.zeros((n, 2), dtype=np.float64)
    cdef cnp.int64_t[::1] areas = areas_arr
    cdef cnp.int32_t[:, ::1] bb = bboxes_arr
    cdef double[:, ::1] cent = cent_arr
    cdef Py_ssize_t y, x
    cdef int li, i
    for i in range(n):
        bb[i, 0] = <cnp.int32_t>w
        bb[i, 1] = <cnp.int32_t>h
        bb[i, 2] = -1
        bb[i, 3] = -1
    for y in range(h):
        for x in range(w):
            li = lab[y, x]
            if li == 0:
                continue
            li -= 1
            areas[li] += 1
            cent[li, 0] += x
            cent[li, 1] += y
            if x < bb[li, 0]:
                bb[li, 0] = <cnp.int32_t>x
            if y < bb[li, 1]:
                bb[li, 1] = <cnp.int32_t>y
            if x > bb[li, 2]:
                bb[li, 2] = <cnp.int32_t>x
            if y > bb[li, 3]:
                bb[li, 3] = <cnp.int32_t>y
    for i in range(n):
        if areas[i] > 0:
            cent[i, 0] /= areas[i]
            cent[i, 1] /= areas[i]
    return areas_arr, bboxes_arr, cent_arr


def dbscan_labels(const double[:, ::1] pts, double eps, int min_pts):
    cdef Py_ssize_t n = pts.shape[0]
    labels_arr = np.full(n, -2, dtype=np.int32)
    if n == 0:
        return labels_arr
    cdef cnp.int32_t[::1] labels = labels_arr
    cdef double e2 = eps * eps
    cdef Py_ssize_t i, j
    cdef double dx, dy

    counts_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    for i in range(n):
        for j in range(n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            if dx * dx + dy * dy <= e2:
                counts[i] += 1

    offsets_arr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] offsets = offsets_arr
    for i in range(n):
        offsets[i + 1] = offsets[i] + counts[i]
    neigh_arr = np.empty(offsets_arr[n], dtype=np.int64)
    cdef cnp.int64_t[::1] neigh = neigh_arr
    fill_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] fill = fill_arr
    for i in range(n):
        for j in range(n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            if dx * dx + dy * dy <= e2:
                neigh[offsets[i] + fill[i]] = j
                fill[i] += 1

    stack_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] stack = stack_arr
    cdef Py_ssize_t top, q, cur
    cdef cnp.int64_t pos
    cdef int cid = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        if counts[i] < min_pts:
            labels[i] = -1
            continue
        labels[i] = cid
        top = 0
        stack[top] = i
        top += 1
        while top > 0:
            top -= 1
            cur = stack[top]
            for pos in range(offsets[cur], offsets[cur + 1]):
                q = neigh[pos]
                if labels[q] == -2:
                    labels[q] = cid
                    if counts[q] >= min_pts:
                        stack[top] = q
                        top += 1
                elif labels[q] == -1:
                    labels[q] = cid
        cid += 1
    return labels_arr


def color_conf_field(const float[:, :, ::1] hsv2, const float[:, ::1] colors, double sigma):
    cdef Py_ssize_t h = hsv2.shape[0], w = hsv2.shape[1], p = colors.shape[0]
    conf_arr = np.empty((h, w), dtype=np.float32)
    within_arr = np.empty((h, w), dtype=np.bool_)
    cdef float[:, ::1] conf = conf_arr
    cdef cnp.uint8_t[:, ::1] within = within_arr.view(np.uint8)
    cdef double inv = 1.0 / (2.0 * sigma * sigma)
    cdef double thr = (2.0 * sigma) * (2.0 * sigma)
    cdef Py_ssize_t y, x, j
    cdef double d0, d1, d2, dist, best
    for y in range(h):
        for x in range(w):
            best = 1e300
            for j in range(p):
                d0 = hsv2[y, x, 0] - colors[j, 0]
                d1 = hsv2[y, x, 1] - colors[j, 1]
                d2 = hsv2[y, x, 2] - colors[j, 2]
                dist = d0 * d0 + d1 * d1 + d2 * d2
                if dist < best:
                    best = dist
            conf[y, x] = <float>exp(-best * inv)
            within[y, x] = best <= thr
    return conf_arr, within_arr
