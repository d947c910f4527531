"""
Text pagination and rasterization.

Source text is greedily word-wrapped to the preset's line width, lines are
stacked until the page height is exhausted, and each page records the
half-open character span of the source it covers. Spans of consecutive
pages partition ``[0, len(text))``.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

from PIL import Image, ImageDraw

from .metrics import GlyphMetrics, display_char, mean_advance
from .presets import (
    DEFAULT_PROFILE,
    EncoderProfile,
    InvalidDimensionError,
    RenderPreset,
    compute_visual_tokens,
)

# Initialize logger
logger = logging.getLogger("render")

_WORD = re.compile(r"\S+")


@dataclass(frozen=True)
class TextLine:
    """One drawn line: its source span and the text actually drawn."""
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class Page:
    """One rendered page; ``index`` is 1-based."""
    index: int
    width: int
    height: int
    char_span: Tuple[int, int]
    visual_tokens: int
    lines: Tuple[TextLine, ...] = field(default=(), repr=False)
    raster: Optional[Image.Image] = field(default=None, compare=False, repr=False)

    def text(self, source: str) -> str:
        """Exact slice of the source text covered by this page."""
        start, end = self.char_span
        return source[start:end]


@dataclass(frozen=True)
class PageSet:
    """Ordered pages of one document at one preset."""
    pages: Tuple[Page, ...]
    preset: RenderPreset
    source_char_count: int
    profile: EncoderProfile = DEFAULT_PROFILE

    def __len__(self) -> int:
        return len(self.pages)

    def __iter__(self) -> Iterator[Page]:
        return iter(self.pages)

    @property
    def page_count(self) -> int:
        return len(self.pages)

    @property
    def total_visual_tokens(self) -> int:
        return sum(page.visual_tokens for page in self.pages)

    def page(self, index: int) -> Page:
        """Return page ``index`` (1-based)."""
        if not 1 <= index <= len(self.pages):
            raise IndexError(f"Page index {index} outside [1, {len(self.pages)}]")
        return self.pages[index - 1]

    def without_rasters(self) -> "PageSet":
        return PageSet(
            pages=tuple(Page(p.index, p.width, p.height, p.char_span, p.visual_tokens, p.lines) for p in self.pages),
            preset=self.preset,
            source_char_count=self.source_char_count,
            profile=self.profile,
        )


def _text_width(text: str, metrics: GlyphMetrics, size: float) -> float:
    return sum(metrics.advance(ch, size) for ch in text)


def _wrap_paragraph(source: str, words: Sequence[Tuple[int, int]], max_width: float,
                    metrics: GlyphMetrics, size: float) -> List[TextLine]:
    space = metrics.advance(" ", size)
    lines: List[TextLine] = []
    parts: List[str] = []
    line_start = line_end = 0
    line_width = 0.0

    def flush():
        nonlocal parts, line_width
        if parts:
            lines.append(TextLine(line_start, line_end, " ".join(parts)))
        parts = []
        line_width = 0.0

    for word_start, word_end in words:
        word = "".join(display_char(ch) for ch in source[word_start:word_end])
        width = _text_width(word, metrics, size)

        if parts and line_width + space + width <= max_width:
            parts.append(word)
            line_width += space + width
            line_end = word_end
            continue
        flush()

        if width <= max_width:
            parts, line_width = [word], width
            line_start, line_end = word_start, word_end
            continue

        # Hard break at character granularity; the tail stays open for following words.
        chunk_start, chunk_width = 0, 0.0
        for offset, ch in enumerate(word):
            advance = metrics.advance(ch, size)
            if offset > chunk_start and chunk_width + advance > max_width:
                lines.append(TextLine(word_start + chunk_start, word_start + offset, word[chunk_start:offset]))
                chunk_start, chunk_width = offset, 0.0
            chunk_width += advance
        parts, line_width = [word[chunk_start:]], chunk_width
        line_start, line_end = word_start + chunk_start, word_end

    flush()
    return lines


def wrap_lines(text: str, max_width: float, metrics: GlyphMetrics, size: float) -> List[TextLine]:
    """
    Word-wrap source text into drawn lines.

    Newlines force a break; runs of blank lines collapse to a single blank
    line and trailing blank lines are dropped. Whitespace-only text yields
    one blank line.
    """
    lines: List[TextLine] = []
    pending_blank: Optional[TextLine] = None
    offset = 0
    for paragraph in text.split("\n"):
        words = [(m.start() + offset, m.end() + offset) for m in _WORD.finditer(paragraph)]
        if not words:
            if pending_blank is None:
                pending_blank = TextLine(offset, offset, "")
        else:
            if pending_blank is not None:
                lines.append(pending_blank)
                pending_blank = None
            lines.extend(_wrap_paragraph(text, words, max_width, metrics, size))
        offset += len(paragraph) + 1

    if not lines and pending_blank is not None:
        lines.append(pending_blank)
    return lines


def layout_pages(text: str, preset: RenderPreset, metrics: GlyphMetrics,
                 profile: EncoderProfile = DEFAULT_PROFILE) -> PageSet:
    """
    Paginate text without rasterizing.

    Produces the same spans, lines and token counts as ``render_pages``.

    Raises:
        InvalidDimensionError: If the preset leaves no printable area
    """
    if not text:
        return PageSet(pages=(), preset=preset, source_char_count=0, profile=profile)

    per_page = preset.lines_per_page
    if per_page == 0:
        raise InvalidDimensionError(f"Preset {preset.name} has no printable area")

    lines = wrap_lines(text, preset.line_width, metrics, preset.font_size)
    chunks = [tuple(lines[i:i + per_page]) for i in range(0, len(lines), per_page)]
    tokens = compute_visual_tokens(preset.page_width, preset.page_height, profile)

    starts = [0] + [chunk[0].start for chunk in chunks[1:]]
    ends = starts[1:] + [len(text)]
    pages = tuple(
        Page(index=k + 1, width=preset.page_width, height=preset.page_height,
             char_span=(starts[k], ends[k]), visual_tokens=tokens, lines=chunk)
        for k, chunk in enumerate(chunks)
    )
    logger.debug(f"Laid out {len(text)} chars into {len(pages)} pages at preset {preset.name}")
    return PageSet(pages=pages, preset=preset, source_char_count=len(text), profile=profile)


def _rasterize(lines: Sequence[TextLine], size: Tuple[int, int], margin: float,
               font_size: float, pitch: float, metrics: GlyphMetrics) -> Image.Image:
    image = Image.new("L", size, 255)
    draw = ImageDraw.Draw(image)
    for row, line in enumerate(lines):
        if line.text:
            metrics.draw_line(draw, (margin, margin + row * pitch), line.text, font_size)
    return image


def render_pages(text: str, preset: RenderPreset, metrics: GlyphMetrics,
                 profile: EncoderProfile = DEFAULT_PROFILE) -> PageSet:
    """
    Render source text into fixed-geometry grayscale pages.

    Args:
        text: Source text
        preset: Page geometry
        metrics: Glyph metrics source used for both wrapping and drawing
        profile: Encoder profile used for visual-token counts

    Returns:
        PageSet whose pages carry 8-bit grayscale rasters (black on white)
    """
    layout = layout_pages(text, preset, metrics, profile)
    pages = tuple(
        Page(page.index, page.width, page.height, page.char_span, page.visual_tokens, page.lines,
             raster=_rasterize(page.lines, (page.width, page.height), preset.margin,
                               preset.font_size, preset.line_pitch, metrics))
        for page in layout.pages
    )
    logger.info(f"Rendered {len(pages)} pages ({layout.total_visual_tokens} visual tokens) at preset {preset.name}")
    return PageSet(pages=pages, preset=preset, source_char_count=layout.source_char_count, profile=profile)


def render_page_at_scale(page: Page, preset: RenderPreset, metrics: GlyphMetrics, scale: float = 3.0,
                         min_pixels: int = 1, max_pixels: int = 4_194_304) -> Image.Image:
    """
    Re-render one page at a higher resolution for zoom-style expansion.

    The scale is reduced (or raised) so the pixel count stays within
    ``[min_pixels, max_pixels]``.
    """
    pixels = page.width * page.height * scale * scale
    if pixels > max_pixels:
        scale *= math.sqrt(max_pixels / pixels)
    elif pixels < min_pixels:
        scale *= math.sqrt(min_pixels / pixels)

    size = (max(1, int(page.width * scale)), max(1, int(page.height * scale)))
    return _rasterize(page.lines, size, preset.margin * scale, preset.font_size * scale,
                      preset.line_pitch * scale, metrics)


def page_capacity_estimate(preset: RenderPreset, metrics: GlyphMetrics) -> int:
    """
    Approximate characters per page from line geometry and mean glyph advance.

    Returns 0 when the preset has no printable area.
    """
    lines = preset.lines_per_page
    if lines == 0:
        return 0
    per_line = math.floor(preset.line_width / mean_advance(metrics, preset.font_size))
    return lines * per_line
