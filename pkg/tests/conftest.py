"""
Pytest configuration and shared fixtures.

This module provides common test fixtures, configuration,
and utilities used across all test modules.
"""

import json
import logging
import random
import shutil
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List

import pytest

from src.common.endpoints import ScriptedEndpoint
from src.protocol.grammar import ToolCall
from src.render.metrics import MonospaceGlyphMetrics
from src.render.paginate import layout_pages, render_pages
from src.render.presets import PRESETS

# Short common words; every word fits on one line at every preset.
VOCABULARY = (
    "the of and to in is was for on that with as by at from his her they this which "
    "race horse season trainer jockey winner field track course mile furlong stakes "
    "owner breeder stable derby colt filly odds favourite result history record year "
    "summer spring autumn meeting crowd grand finish second third early later during "
    "after before while under over between through against around about another"
).split()

DERBY_QUESTION = "What was the French sounding winner of the 2011 Epsom Derby?"
DERBY_ANSWER = "Pour Moi"
DERBY_EVIDENCE_LINE = "Details of the winner, Pour Moi: trained in France."


def vocabulary_document(n_chars: int, seed: int = 0) -> str:
    """Seeded single-paragraph text of vocabulary words, cut at a word boundary near ``n_chars``."""
    rng = random.Random(seed)
    words: List[str] = []
    length = 0
    while length < n_chars:
        word = rng.choice(VOCABULARY)
        words.append(word)
        length += len(word) + 1
    return " ".join(words)[:n_chars].rsplit(" ", 1)[0]


def page_aligned_document(pages: int, lines_per_page: int, special: Dict[int, str] = None) -> str:
    """
    Document of short newline-separated lines that fills exactly ``pages`` pages.

    ``special`` maps a global line index to replacement text for that line.
    """
    special = special or {}
    lines = []
    for i in range(pages * lines_per_page):
        lines.append(special.get(i, f"Entry {i}: the meeting continued with a steady field."))
    return "\n".join(lines)


def derby_document() -> str:
    """29 pages at the 10x preset with the winner named on page 22."""
    per_page = PRESETS["10x"].lines_per_page
    return page_aligned_document(29, per_page, {21 * per_page + 10: DERBY_EVIDENCE_LINE})


def tool_call_reply(image: int, thought: str = "I should read this image.", tool: str = "read_text") -> str:
    return f"<think>{thought}</think>\n{ToolCall(tool, image).to_markup()}"


def final_reply(answer: str, thought: str = "I have what I need.") -> str:
    return f"<think>{thought}</think>\n{answer}"


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files."""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def monospace_metrics():
    """Platform-independent glyph metrics (0.42 em per glyph)."""
    return MonospaceGlyphMetrics()


@pytest.fixture
def preset_5x():
    return PRESETS["5x"]


@pytest.fixture
def preset_10x():
    return PRESETS["10x"]


@pytest.fixture
def small_document():
    """A few pages of text at every preset."""
    return vocabulary_document(6000, seed=7)


@pytest.fixture
def small_page_set(small_document, preset_5x, monospace_metrics):
    """Rendered 5x pages of ``small_document``."""
    return render_pages(small_document, preset_5x, monospace_metrics)


@pytest.fixture
def small_layout(small_document, preset_5x, monospace_metrics):
    """Layout (no rasters) of ``small_document`` at 5x."""
    return layout_pages(small_document, preset_5x, monospace_metrics)


@pytest.fixture
def scripted_endpoint():
    """Factory for scripted chat endpoints."""
    def make(replies=(), default_reply=None):
        script = replies if callable(replies) else list(replies)
        return ScriptedEndpoint(script, default_reply=default_reply)
    return make


@pytest.fixture
def derby_document_text():
    return derby_document()


@pytest.fixture(autouse=True)
def disable_logging():
    """Disable logging during tests to reduce noise."""
    logging.disable(logging.CRITICAL)
    yield
    logging.disable(logging.NOTSET)


# Configure pytest
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "unit: mark test as a unit test"
    )
    config.addinivalue_line(
        "markers", "integration: mark test as an integration test"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )
    config.addinivalue_line(
        "markers", "requires_network: mark test as requiring network access"
    )


# Test utilities
class TestUtils:
    """Utility functions for testing."""

    @staticmethod
    def write_jsonl(path: Path, records: Iterable[Dict[str, Any]]) -> Path:
        """Write records as JSONL."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record) + "\n")
        return path

    @staticmethod
    def read_jsonl(path: Path) -> List[Dict[str, Any]]:
        with path.open(encoding="utf-8") as handle:
            return [json.loads(line) for line in handle if line.strip()]

    @staticmethod
    def assert_path_exists(path: Path, should_exist: bool = True):
        """Assert that a path exists or doesn't exist."""
        if should_exist:
            assert path.exists(), f"Expected path to exist: {path}"
        else:
            assert not path.exists(), f"Expected path to not exist: {path}"

    @staticmethod
    def raw_sample(sample_id: str, document: str, answer: str, question: str = "Who won?",
                   **extra) -> Dict[str, Any]:
        """Raw JSONL record whose span is the first occurrence of ``answer``."""
        start = document.index(answer)
        record = {"id": sample_id, "question": question, "answers": [answer], "document": document,
                  "spans": [[start, start + len(answer)]]}
        record.update(extra)
        return record


@pytest.fixture
def test_utils():
    """Provide test utilities."""
    return TestUtils
