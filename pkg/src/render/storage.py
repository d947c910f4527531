"""
Persistence of rendered pages.

Pages are written as ``{doc_id}/page_{k:04}.png`` with a ``manifest.json``
sidecar; PNG encoding happens only here.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Union

from src.common.models import PageManifest, PageRecord

from .paginate import PageSet
from .presets import RenderError

logger = logging.getLogger("render")

MANIFEST_NAME = "manifest.json"


def page_filename(index: int) -> str:
    return f"page_{index:04}.png"


def check_doc_id(doc_id: str) -> str:
    """Reject ids that are not a single plain directory name."""
    if not doc_id or doc_id in (".", "..") or "/" in doc_id or "\\" in doc_id or "\x00" in doc_id:
        raise RenderError(f"Document id {doc_id!r} cannot be used as a directory name")
    return doc_id


def build_manifest(page_set: PageSet, doc_id: str, source_tokens: Optional[int] = None,
                   with_files: bool = True) -> PageManifest:
    """Describe a page set for the sidecar manifest."""
    total = page_set.total_visual_tokens
    icr = round(source_tokens / total, 4) if source_tokens is not None and total > 0 else None
    return PageManifest(
        doc_id=doc_id,
        preset=page_set.preset.name,
        encoder_profile=page_set.profile.name,
        source_char_count=page_set.source_char_count,
        source_tokens=source_tokens,
        total_visual_tokens=total,
        icr=icr,
        pages=[
            PageRecord(index=page.index, width=page.width, height=page.height,
                       char_span=page.char_span, visual_tokens=page.visual_tokens,
                       file=page_filename(page.index) if with_files else None)
            for page in page_set.pages
        ],
    )


def write_page_set(page_set: PageSet, out_dir: Union[str, Path], doc_id: str,
                   source_tokens: Optional[int] = None) -> PageManifest:
    """
    Write page PNGs and the manifest for one document.

    Args:
        page_set: Rendered pages (pages without a raster are listed but not written)
        out_dir: Root output directory
        doc_id: Document identifier, used as the sub-directory name
        source_tokens: Optional token count N recorded with the ICR

    Returns:
        The manifest that was written

    Raises:
        RenderError: If doc_id is empty, a dot name or contains a path separator
    """
    doc_dir = Path(out_dir) / check_doc_id(doc_id)
    doc_dir.mkdir(parents=True, exist_ok=True)

    written = 0
    for page in page_set.pages:
        if page.raster is not None:
            page.raster.save(doc_dir / page_filename(page.index), format="PNG")
            written += 1

    manifest = build_manifest(page_set, doc_id, source_tokens, with_files=written > 0)
    (doc_dir / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    logger.debug(f"Wrote {written} page images and manifest for {doc_id} to {doc_dir}")
    return manifest


def read_manifest(path: Union[str, Path]) -> PageManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return PageManifest.model_validate(json.loads(path.read_text(encoding="utf-8")))
