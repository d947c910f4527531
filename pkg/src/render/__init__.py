"""
Deterministic text-to-image compression.

Renders source text into fixed-geometry page images and counts the visual
tokens each page costs under a given encoder profile.
"""

from .presets import (
    RenderPreset,
    EncoderProfile,
    RenderError,
    InvalidDimensionError,
    UnknownPresetError,
    PRESETS,
    PROFILES,
    DEFAULT_PROFILE,
    GLM_PROFILE,
    get_preset,
    get_profile,
    compute_visual_tokens,
)
from .metrics import FontGlyphMetrics, MonospaceGlyphMetrics, create_metrics
from .paginate import (
    TextLine,
    Page,
    PageSet,
    layout_pages,
    render_pages,
    render_page_at_scale,
    page_capacity_estimate,
)
from .storage import write_page_set, read_manifest, build_manifest

__all__ = [
    'RenderPreset',
    'EncoderProfile',
    'RenderError',
    'InvalidDimensionError',
    'UnknownPresetError',
    'PRESETS',
    'PROFILES',
    'DEFAULT_PROFILE',
    'GLM_PROFILE',
    'get_preset',
    'get_profile',
    'compute_visual_tokens',
    'FontGlyphMetrics',
    'MonospaceGlyphMetrics',
    'create_metrics',
    'TextLine',
    'Page',
    'PageSet',
    'layout_pages',
    'render_pages',
    'render_page_at_scale',
    'page_capacity_estimate',
    'write_page_set',
    'read_manifest',
    'build_manifest',
]
