"""
Tool-call grammar.

A model turn is either a tool call::

    <think>...</think>
    <tool_call>{"name": "read_text", "arguments": {"image": 22}}</tool_call>

or a final answer: the text after the last ``</think>``.
"""

import json
import logging
import re
from dataclasses import dataclass
from typing import Optional, Union

logger = logging.getLogger("protocol")

TOOL_NAMES = ("read_text", "zoom_in")

_TOOL_CALL_BLOCK = re.compile(r"<tool_call>(.*?)</tool_call>", re.DOTALL)
_THINK_BLOCK = re.compile(r"<think>(.*?)</think>", re.DOTALL)
THINK_CLOSE = "</think>"


class GrammarError(ValueError):
    """Raised when a ToolCall is constructed with invalid fields."""
    pass


@dataclass(frozen=True)
class ToolCall:
    tool_name: str
    image_index: int

    def __post_init__(self):
        if self.tool_name not in TOOL_NAMES:
            raise GrammarError(f"Unknown tool '{self.tool_name}'")
        if isinstance(self.image_index, bool) or not isinstance(self.image_index, int) or self.image_index < 1:
            raise GrammarError(f"Image index must be an integer >= 1, got {self.image_index!r}")

    def to_markup(self) -> str:
        """Canonical serialization of the call."""
        body = json.dumps({"name": self.tool_name, "arguments": {"image": self.image_index}})
        return f"<tool_call>{body}</tool_call>"


@dataclass(frozen=True)
class FinalAnswer:
    text: str


@dataclass(frozen=True)
class ParseError:
    message: str
    offending: str


ModelTurn = Union[ToolCall, FinalAnswer, ParseError]


def _decode_call(body: str) -> Optional[ToolCall]:
    try:
        data = json.loads(body.strip())
    except (ValueError, RecursionError):
        return None
    if not isinstance(data, dict):
        return None
    arguments = data.get("arguments")
    if not isinstance(arguments, dict) or "image" not in arguments:
        return None
    try:
        return ToolCall(tool_name=data.get("name"), image_index=arguments["image"])
    except GrammarError:
        return None


def final_answer_text(text: str) -> str:
    """
    Text after the last ``</think>``, stripped.

    When nothing follows the reasoning the whole reply is returned stripped.
    """
    position = text.rfind(THINK_CLOSE)
    tail = text[position + len(THINK_CLOSE):].strip() if position >= 0 else text.strip()
    return tail or text.strip()


def extract_reasoning(text: str) -> str:
    """Concatenate the contents of all ``<think>`` blocks verbatim."""
    return "\n".join(match.group(1) for match in _THINK_BLOCK.finditer(text))


def parse_model_turn(text: str) -> ModelTurn:
    """
    Classify one model reply.

    Args:
        text: Raw reply text

    Returns:
        The first well-formed ToolCall; otherwise ParseError when tool-call
        tags are present, or FinalAnswer when they are not
    """
    blocks = list(_TOOL_CALL_BLOCK.finditer(text))
    for position, block in enumerate(blocks):
        call = _decode_call(block.group(1))
        if call is not None:
            extra = len(blocks) - position - 1
            if extra:
                logger.warning(f"Ignoring {extra} tool_call block(s) after the first well-formed call")
            return call

    if blocks:
        return ParseError(message="malformed tool_call body", offending=blocks[0].group(0))
    if "<tool_call>" in text or "</tool_call>" in text:
        start = text.find("<tool_call>")
        offending = text[start:] if start >= 0 else text[:text.find("</tool_call>") + len("</tool_call>")]
        return ParseError(message="unbalanced tool_call tags", offending=offending)
    return FinalAnswer(final_answer_text(text))
