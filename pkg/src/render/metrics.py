"""
Glyph metrics sources.

Pagination needs an advance width for every character at a given pixel
size, and rasterization needs a way to draw a line of text. Both come from
the same object so layout and pixels never disagree.
"""

import logging
import threading
import unicodedata
from typing import Dict, Protocol, Tuple

from PIL import ImageDraw, ImageFont

logger = logging.getLogger("render")

SUBSTITUTE_GLYPH = "?"

# Mixed-case English prose used to estimate a mean advance width.
REFERENCE_TEXT = (
    "The quick brown fox jumps over the lazy dog. In 2011 the winner was trained "
    "in Ireland, and the race was run over a mile and a half at Epsom Downs. "
    "Most paragraphs mix short words with longer ones, numbers, commas and periods."
)


def display_char(ch: str) -> str:
    """Map characters without a drawable glyph to the substitute glyph."""
    if unicodedata.category(ch)[0] == "C":
        return SUBSTITUTE_GLYPH
    return ch


class GlyphMetrics(Protocol):
    name: str

    def advance(self, ch: str, size: float) -> float:
        ...

    def draw_line(self, draw: ImageDraw.ImageDraw, xy: Tuple[float, float], text: str, size: float) -> None:
        ...


def _load_default_font(size: int):
    try:
        return ImageFont.load_default(size=size)
    except TypeError:
        # Pillow < 10.1 has only the fixed bitmap font
        return ImageFont.load_default()


class FontGlyphMetrics:
    """
    Metrics and drawing backed by a TrueType font file.

    Falls back to Pillow's bundled default font when the file cannot be
    loaded. Advances are cached per (character, size).
    """

    def __init__(self, font_path: str = "DejaVuSans.ttf"):
        self.font_path = font_path
        self.name = f"font:{font_path}"
        self._fonts: Dict[int, object] = {}
        self._advances: Dict[Tuple[str, int], float] = {}
        self._lock = threading.RLock()

    def font(self, size: float):
        pixel_size = max(1, int(round(size)))
        with self._lock:
            font = self._fonts.get(pixel_size)
            if font is None:
                try:
                    font = ImageFont.truetype(self.font_path, pixel_size)
                except OSError:
                    logger.warning(f"Font {self.font_path} not found; using Pillow default font")
                    font = _load_default_font(pixel_size)
                self._fonts[pixel_size] = font
            return font

    def advance(self, ch: str, size: float) -> float:
        key = (ch, max(1, int(round(size))))
        with self._lock:
            width = self._advances.get(key)
            if width is None:
                width = float(self.font(size).getlength(display_char(ch)))
                self._advances[key] = width
            return width

    def draw_line(self, draw: ImageDraw.ImageDraw, xy: Tuple[float, float], text: str, size: float) -> None:
        with self._lock:
            draw.text(xy, text, fill=0, font=self.font(size))


class MonospaceGlyphMetrics:
    """
    Fixed-advance metrics: every glyph is ``advance_ratio`` em wide.

    Layout is platform independent; glyphs are drawn one per cell with
    Pillow's default font.
    """

    def __init__(self, advance_ratio: float = 0.42):
        if advance_ratio <= 0:
            raise ValueError("advance_ratio must be positive")
        self.advance_ratio = advance_ratio
        self.name = f"monospace:{advance_ratio}"
        self._fonts: Dict[int, object] = {}
        self._lock = threading.RLock()

    def advance(self, ch: str, size: float) -> float:
        return size * self.advance_ratio

    def draw_line(self, draw: ImageDraw.ImageDraw, xy: Tuple[float, float], text: str, size: float) -> None:
        pixel_size = max(1, int(round(size)))
        with self._lock:
            font = self._fonts.get(pixel_size)
            if font is None:
                font = self._fonts[pixel_size] = _load_default_font(pixel_size)
            x, y = xy
            step = self.advance(" ", size)
            for ch in text:
                if ch != " ":
                    draw.text((x, y), ch, fill=0, font=font)
                x += step


def mean_advance(metrics: GlyphMetrics, size: float, sample: str = REFERENCE_TEXT) -> float:
    return sum(metrics.advance(ch, size) for ch in sample) / len(sample)


def create_metrics(kind: str = "font", font_path: str = "DejaVuSans.ttf",
                   advance_ratio: float = 0.42) -> GlyphMetrics:
    """
    Build a glyph metrics source by name.

    Args:
        kind: ``font`` or ``monospace``
        font_path: TrueType file for ``font``
        advance_ratio: Em fraction per glyph for ``monospace``
    """
    if kind == "font":
        return FontGlyphMetrics(font_path)
    if kind == "monospace":
        return MonospaceGlyphMetrics(advance_ratio)
    raise ValueError(f"Unknown glyph metrics kind: {kind}")
