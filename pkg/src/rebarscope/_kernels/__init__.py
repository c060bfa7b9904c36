"""Kernel backend selection.

The compiled extension (`_core`) is preferred when importable; the NumPy
fallback (`_numpy`) is used otherwise. Force a side with
REBARSCOPE_KERNELS=c or REBARSCOPE_KERNELS=py.
"""

from __future__ import annotations

import os

from . import _numpy as py_impl

compiled_impl = None
_choice = os.environ.get("REBARSCOPE_KERNELS", "auto").lower()
if _choice not in ("py", "python"):
    try:
        from . import _core as compiled_impl  # type: ignore[no-redef]
    except ImportError:
        if _choice in ("c", "cy", "compiled"):
            raise
        compiled_impl = None

active = compiled_impl if compiled_impl is not None else py_impl
BACKEND = "compiled" if active is compiled_impl and compiled_impl is not None else "python"

rgb_to_hsv_u8 = active.rgb_to_hsv_u8
hsv_to_rgb_u8 = active.hsv_to_rgb_u8
in_range_u8 = active.in_range_u8
gaussian_blur_u8 = active.gaussian_blur_u8
label_mask = active.label_mask
component_stats = active.component_stats
dbscan_labels = active.dbscan_labels
color_conf_field = active.color_conf_field
gaussian_kernel1d = py_impl.gaussian_kernel1d
