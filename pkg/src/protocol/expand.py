"""
The Expand tool.

Re-presents one compressed page in a form the reader can use: the exact
source text slice, OCR text of a high-resolution render, or the
high-resolution render itself.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Union

from PIL import Image

from src.common.endpoints import OcrEndpoint
from src.ledger.budget import ExpansionKind
from src.ledger.tokens import CharRatioTokenCounter, TokenCounter
from src.render.metrics import GlyphMetrics, MonospaceGlyphMetrics
from src.render.paginate import PageSet, render_page_at_scale
from src.render.presets import compute_visual_tokens

from .grammar import ToolCall

logger = logging.getLogger("protocol")

EXPAND_KINDS = ("source_text", "ocr_text", "image_zoom")

LEDGER_KIND = {
    "source_text": ExpansionKind.TEXT,
    "ocr_text": ExpansionKind.OCR_TEXT,
    "image_zoom": ExpansionKind.IMAGE,
}

INVALID_INDEX = "invalid image index"


class ExpandError(Exception):
    """Raised when an expansion cannot be configured (not for bad indices)."""
    pass


@dataclass(frozen=True)
class ExpandResponse:
    """One tool response; ``ok`` is False for out-of-range indices (cost 0)."""
    kind: str
    payload: Union[str, Image.Image]
    token_cost: int
    image_index: int
    ok: bool = True

    @property
    def ledger_kind(self) -> ExpansionKind:
        return LEDGER_KIND[self.kind]

    def message_content(self) -> Union[str, List[Dict[str, Any]]]:
        """Content of the tool message sent back to the model."""
        if isinstance(self.payload, Image.Image):
            return [
                {"type": "text", "text": f"Image {self.image_index} at full resolution:"},
                {"type": "image", "image": self.payload},
            ]
        return self.payload

    def transcript(self) -> str:
        """Text form for trajectory records; images become a placeholder."""
        if isinstance(self.payload, Image.Image):
            return f"Image {self.image_index} at full resolution:\n<image>"
        return self.payload


@dataclass
class Expander:
    """
    Expansion settings shared by every episode of a run.

    ``ocr`` is one client used as given; ``ocr_factory`` builds one client
    per worker thread so no HTTP session is shared between threads.
    """
    counter: TokenCounter = None
    metrics: Optional[GlyphMetrics] = None
    ocr: Optional[OcrEndpoint] = None
    ocr_factory: Optional[Callable[[], OcrEndpoint]] = None
    zoom_scale: float = 3.0
    min_pixels: int = 1
    max_pixels: int = 4_194_304

    def __post_init__(self):
        if self.counter is None:
            self.counter = CharRatioTokenCounter()
        if self.metrics is None:
            self.metrics = MonospaceGlyphMetrics()
        self._local = threading.local()

    def ocr_client(self) -> Optional[OcrEndpoint]:
        """OCR client for the calling thread."""
        if self.ocr is not None or self.ocr_factory is None:
            return self.ocr
        client = getattr(self._local, "ocr", None)
        if client is None:
            client = self._local.ocr = self.ocr_factory()
        return client

    def _high_resolution(self, page_set: PageSet, index: int) -> Image.Image:
        return render_page_at_scale(page_set.page(index), page_set.preset, self.metrics,
                                    scale=self.zoom_scale, min_pixels=self.min_pixels,
                                    max_pixels=self.max_pixels)

    def expand(self, page_set: PageSet, source_text: str, call: ToolCall, kind: str) -> ExpandResponse:
        """
        Expand the page a tool call selects.

        Args:
            page_set: Pages shown to the reader
            source_text: Document the pages were rendered from
            call: Parsed tool call
            kind: ``source_text``, ``ocr_text`` or ``image_zoom``

        Returns:
            ExpandResponse; an out-of-range index yields an ``invalid image
            index`` text response with ``ok=False``

        Raises:
            ExpandError: For unknown kinds or OCR without an endpoint
        """
        if kind not in EXPAND_KINDS:
            raise ExpandError(f"Unknown expand kind: {kind}")

        index = call.image_index
        if not 1 <= index <= page_set.page_count:
            logger.info(f"Expand({index}) out of range for {page_set.page_count} pages")
            message = (f"Error: {INVALID_INDEX} {index}; valid images are 1 to {page_set.page_count}."
                       if page_set.page_count else f"Error: {INVALID_INDEX} {index}; the document has no images.")
            return ExpandResponse(kind=kind, payload=message, token_cost=0, image_index=index, ok=False)

        if kind == "source_text":
            text = page_set.page(index).text(source_text)
            cost = max(1, self.counter.count(text))
            return ExpandResponse(kind=kind, payload=f"Text content of Image {index}:\n{text}",
                                  token_cost=cost, image_index=index)

        image = self._high_resolution(page_set, index)
        if kind == "image_zoom":
            cost = compute_visual_tokens(image.width, image.height, page_set.profile)
            return ExpandResponse(kind=kind, payload=image, token_cost=cost, image_index=index)

        ocr = self.ocr_client()
        if ocr is None:
            raise ExpandError("ocr_text expansion requires an OCR endpoint")
        text = ocr.read(image)
        cost = max(1, self.counter.count(text))
        return ExpandResponse(kind=kind, payload=f"Text content of Image {index}:\n{text}",
                              token_cost=cost, image_index=index)


def expand(page_set: PageSet, source_text: str, call: ToolCall, kind: str = "source_text",
           expander: Optional[Expander] = None) -> ExpandResponse:
    """Expand one page with default settings unless an Expander is given."""
    return (expander or Expander()).expand(page_set, source_text, call, kind)
