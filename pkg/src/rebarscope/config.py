"""Application configuration: file loading, overrides, palette, hashing."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import _kernels as K
from .colorfilter import HsvRange
from .pipeline import PipelineConfig
from .privacy import PrivacySettings

SPOOL_ENV_VAR = "REBARSCOPE_SPOOL"


def default_palette() -> list[tuple[int, int, int]]:
    """12 maximally separated hues (30 degree steps) at full saturation."""
    hsv = np.array([[(15 * i, 255, 255) for i in range(12)]], dtype=np.uint8)
    rgb = K.hsv_to_rgb_u8(hsv)[0]
    return [tuple(int(c) for c in row) for row in rgb]


@dataclass
class AppConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    privacy: PrivacySettings = field(default_factory=PrivacySettings)
    backend: str = "reference"  # "reference" | "external"
    spool: str | None = None
    timeout_s: float = 30.0
    palette: list[tuple[int, int, int]] = field(default_factory=default_palette)
    jobs: int = 0  # 0 = one worker per CPU

    def __post_init__(self):
        if self.backend not in ("reference", "external"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if len(self.palette) != 12:
            raise ValueError("palette must have exactly 12 colors")

    def config_hash(self) -> str:
        """Stable digest of the detection-relevant configuration."""
        payload = {
            "pipeline": asdict(self.pipeline),
            "privacy": {
                "white_range": self.privacy.white_range.as_list(),
                "min_sign_area": self.privacy.min_sign_area,
                "min_rectangularity": self.privacy.min_rectangularity,
                "kernel_half_width": self.privacy.kernel_half_width,
                "sigma": self.privacy.sigma,
                "k": self.privacy.k,
                "cell_px": self.privacy.cell_px,
                "ocr_command": self.privacy.ocr_command,
            },
            "backend": self.backend,
            "palette": [list(c) for c in self.palette],
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def _parse_tau(value) -> float | None:
    if value is None or value == "adaptive":
        return None
    return float(value)


def load_config(path: str | Path | None) -> AppConfig:
    """Read the YAML config file; missing keys keep their defaults."""
    if path is None:
        return AppConfig()
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}

    pd = dict(data.get("pipeline") or {})
    if "dense_grid_sides" in pd:
        pd["dense_grid_sides"] = tuple(pd["dense_grid_sides"])
    if "tau" in pd:
        pd["tau"] = _parse_tau(pd["tau"])
    pipeline = PipelineConfig(**pd)

    vd = dict(data.get("privacy") or {})
    if "white_range" in vd:
        vd["white_range"] = HsvRange.from_list(vd["white_range"])
    privacy = PrivacySettings(**vd)

    palette = data.get("palette")
    if palette is not None:
        palette = [tuple(int(c) for c in row) for row in palette]
    else:
        palette = default_palette()

    return AppConfig(
        pipeline=pipeline,
        privacy=privacy,
        backend=data.get("backend", "reference"),
        spool=data.get("spool"),
        timeout_s=float(data.get("timeout_s", 30.0)),
        palette=palette,
        jobs=int(data.get("jobs", 0)),
    )


def resolve_spool(cfg: AppConfig, flag_value: str | None) -> str | None:
    """Spool precedence: CLI flag, then environment, then config file."""
    return flag_value or os.environ.get(SPOOL_ENV_VAR) or cfg.spool
