from __future__ import annotations

import numpy as np
import pytest

from rebarscope.evaluate import SceneSpec, generate_scene


@pytest.fixture(scope="session")
def small_scene():
    """Compact scene with rust rows and a glyph-bearing signboard."""
    spec = SceneSpec(
        width=512,
        height=384,
        spacing_px=90.0,
        stripe_len_px=320.0,
        dash_len_px=45.0,
        dash_gap_px=10.0,
        stripe_width_px=12.0,
        sign_bbox=(340, 30, 480, 120),
    )
    return spec, generate_scene(spec, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
