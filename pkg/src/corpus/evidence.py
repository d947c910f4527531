"""Map character-level answer spans onto rendered pages."""

import bisect
from typing import Sequence

from src.render.paginate import PageSet

from .samples import EvidenceMap, Span, SpanRangeError


def map_spans_to_pages(spans: Sequence[Span], pages: PageSet, sample_id: str = "") -> EvidenceMap:
    """
    Find every page whose char span intersects any answer span.

    Page spans tile the source text in order, so each span endpoint is
    located by bisection over page starts.

    Args:
        spans: Half-open character intervals into the source text
        pages: Pages rendered from that text
        sample_id: Identifier carried onto the result

    Returns:
        EvidenceMap over 1-based page indices

    Raises:
        SpanRangeError: If a span is empty or reaches outside the text
    """
    limit = pages.source_char_count
    starts = [page.char_span[0] for page in pages.pages]
    evidence = set()
    for start, end in spans:
        if start < 0 or end > limit or end <= start:
            raise SpanRangeError(f"{sample_id}: span ({start}, {end}) outside [0, {limit})")
        first = bisect.bisect_right(starts, start)
        last = bisect.bisect_right(starts, end - 1)
        for k in range(max(first, 1), last + 1):
            page_start, page_end = pages.pages[k - 1].char_span
            if page_start < end and start < page_end:
                evidence.add(k)
    return EvidenceMap(sample_id=sample_id, evidence_pages=frozenset(evidence), page_count=pages.page_count)
