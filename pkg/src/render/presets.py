"""
Rendering presets and encoder token profiles.

A preset fixes the page geometry of one compression level; an encoder
profile fixes how a vision encoder turns page pixels into visual tokens.
"""

import math
from dataclasses import dataclass
from typing import Dict


class RenderError(Exception):
    """Base exception for rendering failures."""
    pass


class InvalidDimensionError(RenderError):
    """Raised for non-positive or misaligned page dimensions."""
    pass


class UnknownPresetError(RenderError):
    """Raised when a preset or profile name is not registered."""
    pass


# Page widths must be multiples of the merged encoder block (16 px stride x 2x2 merge).
WIDTH_ALIGNMENT = 32


@dataclass(frozen=True)
class RenderPreset:
    """Geometry of one compression level."""
    name: str
    page_width: int
    page_height: int
    font_size: float
    line_spacing: float
    margin: int
    nominal_tokens_per_page: int

    def __post_init__(self):
        if self.page_width <= 0 or self.page_height <= 0:
            raise InvalidDimensionError(
                f"Preset {self.name}: page dimensions must be positive, got {self.page_width}x{self.page_height}"
            )
        if self.page_width % WIDTH_ALIGNMENT:
            raise InvalidDimensionError(
                f"Preset {self.name}: page width {self.page_width} is not a multiple of {WIDTH_ALIGNMENT}"
            )
        if self.font_size <= 0 or self.line_spacing <= 0 or self.margin < 0:
            raise InvalidDimensionError(f"Preset {self.name}: font size, line spacing and margin must be positive")

    @property
    def line_width(self) -> int:
        return self.page_width - 2 * self.margin

    @property
    def line_pitch(self) -> float:
        return self.font_size * self.line_spacing

    @property
    def lines_per_page(self) -> int:
        """Number of text lines that fit between the top and bottom margins."""
        usable = self.page_height - 2 * self.margin
        if usable < self.font_size or self.line_width <= 0:
            return 0
        return math.floor((usable - self.font_size) / self.line_pitch) + 1


@dataclass(frozen=True)
class EncoderProfile:
    """
    Visual-token tokenization of one encoder family.

    ``ceil_divide_then_merge`` counts ceil(H/s) * ceil(W/s) patches and
    merges ``merge_factor`` of them per token (rounded up);
    ``round_per_axis`` rounds H/s and W/s half-up independently, where the
    stride already includes the spatial merge.
    """
    name: str
    grid_stride: int
    merge_factor: int
    rounding: str

    def __post_init__(self):
        if self.rounding not in ("ceil_divide_then_merge", "round_per_axis"):
            raise RenderError(f"Unknown rounding rule: {self.rounding}")
        if self.grid_stride <= 0 or self.merge_factor <= 0:
            raise RenderError("Grid stride and merge factor must be positive")


DEFAULT_PROFILE = EncoderProfile(name="default", grid_stride=16, merge_factor=4,
                                 rounding="ceil_divide_then_merge")
# 14 px patches with 2x2 merge: 28 px per merged token per axis
GLM_PROFILE = EncoderProfile(name="glm", grid_stride=28, merge_factor=1, rounding="round_per_axis")

PROFILES: Dict[str, EncoderProfile] = {
    DEFAULT_PROFILE.name: DEFAULT_PROFILE,
    GLM_PROFILE.name: GLM_PROFILE,
}

PRESETS: Dict[str, RenderPreset] = {
    "5x": RenderPreset("5x", 256, 284, 8, 1.15, 7, 405),
    "10x": RenderPreset("10x", 192, 252, 6, 1.10, 6, 540),
    "15x": RenderPreset("15x", 128, 190, 5, 1.05, 5, 378),
}


def get_preset(name: str) -> RenderPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPresetError(f"Unknown preset '{name}'; available: {sorted(PRESETS)}")


def get_profile(name: str) -> EncoderProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise UnknownPresetError(f"Unknown encoder profile '{name}'; available: {sorted(PROFILES)}")


def _round_half_up_div(numerator: int, denominator: int) -> int:
    return (2 * numerator + denominator) // (2 * denominator)


def compute_visual_tokens(width: int, height: int, profile: EncoderProfile = DEFAULT_PROFILE) -> int:
    """
    Count the visual tokens an encoder produces for one image.

    Args:
        width: Image width in pixels
        height: Image height in pixels
        profile: Encoder tokenization profile

    Returns:
        Visual token count

    Raises:
        InvalidDimensionError: If either dimension is below 1
    """
    if width < 1 or height < 1:
        raise InvalidDimensionError(f"Image dimensions must be >= 1, got {width}x{height}")

    stride = profile.grid_stride
    if profile.rounding == "ceil_divide_then_merge":
        patches = math.ceil(height / stride) * math.ceil(width / stride)
        return math.ceil(patches / profile.merge_factor)

    rows = max(1, _round_half_up_div(height, stride))
    cols = max(1, _round_half_up_div(width, stride))
    return max(1, (rows * cols) // profile.merge_factor)
