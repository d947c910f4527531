"""
Token counters.

The source token count N is measured by an injected counter. Without an
external tokenizer the default is one token per four characters, rounded up.
"""

import logging
import math
import threading
from typing import Protocol

logger = logging.getLogger("ledger")


class TokenCounter(Protocol):
    name: str

    def count(self, text: str) -> int:
        ...


class CharRatioTokenCounter:
    """ceil(len(text) / chars_per_token)."""

    def __init__(self, chars_per_token: int = 4):
        if chars_per_token < 1:
            raise ValueError("chars_per_token must be >= 1")
        self.chars_per_token = chars_per_token
        self.name = f"char{chars_per_token}"

    def count(self, text: str) -> int:
        return math.ceil(len(text) / self.chars_per_token)


class HuggingFaceTokenCounter:
    """
    Counter backed by a Hugging Face tokenizer.

    ``transformers`` is imported on first use so it stays an optional
    dependency.
    """

    def __init__(self, model_name: str):
        self.model_name = model_name
        self.name = f"hf:{model_name}"
        self._tokenizer = None
        self._lock = threading.Lock()

    def _load(self):
        with self._lock:
            if self._tokenizer is None:
                from transformers import AutoTokenizer

                logger.info(f"Loading tokenizer {self.model_name}")
                self._tokenizer = AutoTokenizer.from_pretrained(self.model_name)
        return self._tokenizer

    def count(self, text: str) -> int:
        if not text:
            return 0
        return len(self._load().encode(text, add_special_tokens=False))


def get_token_counter(name: str = "char4") -> TokenCounter:
    """
    Build a token counter from its configured name.

    Args:
        name: ``char<N>`` for the character-ratio counter, ``hf:<model>`` for a
            Hugging Face tokenizer

    Raises:
        ValueError: For unknown names
    """
    if name.startswith("hf:"):
        return HuggingFaceTokenCounter(name[3:])
    if name.startswith("char"):
        ratio = name[4:] or "4"
        if ratio.isdigit():
            return CharRatioTokenCounter(int(ratio))
    raise ValueError(f"Unknown tokenizer selection: {name}")
