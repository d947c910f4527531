"""
Trajectory records.

A trajectory is the full multi-turn record of one episode: every model
reply, the tool call it made (if any), the tool response, the final answer,
the reader token ledger and a terminal status.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from src.ledger.budget import TokenLedger

from .grammar import ToolCall, extract_reasoning
from .prompts import user_turn_text


class TrajectoryStatus(Enum):
    ANSWERED = "answered"
    BUDGET_EXHAUSTED = "budget_exhausted"
    PROTOCOL_ERROR = "protocol_error"


class LossFlag(Enum):
    """Whether a message's tokens are trained on (model-produced) or only conditioned on."""
    MODEL_PRODUCED = "model"
    CONTEXT_ONLY = "context"


@dataclass
class Turn:
    index: int
    reply: str
    tool_call: Optional[ToolCall] = None
    tool_response: Optional[str] = None
    expanded: bool = False
    parse_error: Optional[str] = None

    @property
    def reasoning(self) -> str:
        return extract_reasoning(self.reply)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "reply": self.reply,
            "tool_call": ({"name": self.tool_call.tool_name, "image": self.tool_call.image_index}
                          if self.tool_call else None),
            "tool_response": self.tool_response,
            "expanded": self.expanded,
            "parse_error": self.parse_error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Turn":
        call = data.get("tool_call")
        return cls(
            index=data["index"],
            reply=data["reply"],
            tool_call=ToolCall(call["name"], call["image"]) if call else None,
            tool_response=data.get("tool_response"),
            expanded=data.get("expanded", False),
            parse_error=data.get("parse_error"),
        )


@dataclass
class Trajectory:
    sample_id: str
    question: str
    system_prompt: str
    page_count: int
    expand_kind: str
    ledger: TokenLedger
    turns: List[Turn] = field(default_factory=list)
    final_answer: Optional[str] = None
    status: TrajectoryStatus = TrajectoryStatus.PROTOCOL_ERROR
    error: Optional[str] = None
    error_type: Optional[str] = None
    dataset: str = "default"

    @property
    def tool_calls(self) -> List[ToolCall]:
        return [turn.tool_call for turn in self.turns if turn.tool_call is not None]

    @property
    def expanded_pages(self) -> List[int]:
        return [turn.tool_call.image_index for turn in self.turns if turn.expanded]

    @property
    def expand_calls(self) -> int:
        """Number of executed tool calls M; a call on the last allowed turn is recorded but not executed."""
        return sum(1 for turn in self.turns if turn.tool_call is not None and turn.tool_response is not None)

    def messages(self) -> List[Dict[str, Any]]:
        """
        Conversation with per-message loss flags.

        System, user and tool messages are context-only; assistant replies
        are model-produced.
        """
        context = LossFlag.CONTEXT_ONLY.value
        messages = [
            {"role": "system", "content": self.system_prompt, "loss": context},
            {"role": "user", "content": user_turn_text(self.page_count, self.question), "loss": context},
        ]
        for turn in self.turns:
            messages.append({"role": "assistant", "content": turn.reply, "loss": LossFlag.MODEL_PRODUCED.value})
            if turn.tool_response is not None:
                messages.append({"role": "tool", "content": turn.tool_response, "loss": context})
        return messages

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "dataset": self.dataset,
            "question": self.question,
            "system_prompt": self.system_prompt,
            "page_count": self.page_count,
            "expand_kind": self.expand_kind,
            "turns": [turn.to_dict() for turn in self.turns],
            "final_answer": self.final_answer,
            "status": self.status.value,
            "error": self.error,
            "error_type": self.error_type,
            "ledger": self.ledger.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Trajectory":
        return cls(
            sample_id=data["sample_id"],
            dataset=data.get("dataset", "default"),
            question=data["question"],
            system_prompt=data["system_prompt"],
            page_count=data["page_count"],
            expand_kind=data["expand_kind"],
            ledger=TokenLedger.from_dict(data["ledger"]),
            turns=[Turn.from_dict(turn) for turn in data.get("turns", [])],
            final_answer=data.get("final_answer"),
            status=TrajectoryStatus(data["status"]),
            error=data.get("error"),
            error_type=data.get("error_type"),
        )
