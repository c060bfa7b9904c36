"""rebarscope: rebar-corrosion detection and signboard anonymization.

Staged prompt-driven segmentation over inspection imagery: a coarse
prompt lattice, HSV-guided dense grids, and rebar-pattern re-prompting,
followed by overlap deduplication and privacy protection (selective
signboard blur, spatial k-anonymity of sign locations).
"""

from ._kernels import BACKEND as kernel_backend
from .cluster import dbscan, detect_pattern, fit_line
from .colorfilter import HsvRange, hsv_filter, rust_range, white_signboard_range
from .pipeline import DetectionReport, PipelineConfig, run_pipeline
from .privacy import PrivacySettings, anonymize, detect_signboards, k_anonymize_locations
from .raster import (
    BinaryMask,
    ConfidenceMap,
    Connectivity,
    RasterImage,
    Region,
    Stage,
    blur_within,
    connected_components,
    gaussian_blur,
    rgb_to_hsv,
)
from .segbackend import (
    BackendError,
    PointPrompt,
    PromptLabel,
    ReferenceBackend,
    SegmentationBackend,
    SegmentationRequest,
    SpoolBackend,
    adaptive_tau,
    reference_segment,
    segment,
    threshold_mask,
)

__version__ = "0.1.0"
