"""
LLM-as-judge answer grading.

The judge prompt asks for a single ``[[YES]]`` or ``[[NO]]``; the verdict
is taken only from that terminal token.
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import Sequence

from src.common.endpoints import ChatEndpoint

logger = logging.getLogger("scoring")

JUDGE_PROMPT_TEMPLATE = (
    "You are an expert evaluator. Determine if the model's answer correctly answers the question "
    "based on the gold answers.\n\n"
    "[QUESTION]\n\n{question}\n\n[/QUESTION]\n\n"
    "[GOLD ANSWERS]\n\n{gold_answers}\n\n[/GOLD ANSWERS]\n\n"
    "[MODEL ANSWER]\n\n{model_answer}\n\n[/MODEL ANSWER]\n\n"
    "Evaluation criteria:\n"
    "- The answer must convey the same core meaning as the gold answers\n"
    "- Partial matches should be marked incorrect\n"
    "- Additional correct information beyond gold answers is acceptable\n"
    "- Empty or off-topic responses are incorrect\n"
    "- Minor formatting differences (e.g., \"10:30 pm\" vs \"10:30 p.m.\") should be accepted\n\n"
    "Respond with ONLY [[YES]] if the model answer is correct, or [[NO]] if incorrect."
)

_TERMINAL_VERDICT = re.compile(r"\[\[(YES|NO)\]\]\W*$")


class ScoringError(Exception):
    """Base exception for scoring errors."""
    pass


class InvalidVerdictError(ScoringError):
    """Raised when a judge reply does not end in [[YES]] or [[NO]]."""
    pass


@dataclass(frozen=True)
class JudgeVerdict:
    correct: bool
    raw: str


@dataclass(frozen=True)
class RewardParams:
    answer_weight: float = 0.7
    tool_weight: float = 0.3

    def __post_init__(self):
        if not math.isclose(self.answer_weight + self.tool_weight, 1.0):
            raise ScoringError("Reward weights must sum to 1.0")


def judge_request(question: str, gold_answers: Sequence[str], model_answer: str) -> str:
    """Fill the judge template; gold answers are joined by newlines."""
    return JUDGE_PROMPT_TEMPLATE.format(
        question=question,
        gold_answers="\n".join(gold_answers),
        model_answer=model_answer,
    )


def parse_verdict(raw: str) -> JudgeVerdict:
    """
    Parse a judge reply.

    Raises:
        InvalidVerdictError: If the reply does not end in [[YES]] or [[NO]]
    """
    match = _TERMINAL_VERDICT.search(raw.strip())
    if match is None:
        raise InvalidVerdictError(f"No terminal verdict in judge reply: {raw[:120]!r}")
    return JudgeVerdict(correct=match.group(1) == "YES", raw=raw)


def judge_answer(question: str, gold_answers: Sequence[str], model_answer: str,
                 endpoint: ChatEndpoint) -> JudgeVerdict:
    """Send one judge request and parse the verdict."""
    prompt = judge_request(question, gold_answers, model_answer)
    raw = endpoint.complete([{"role": "user", "content": prompt}])
    verdict = parse_verdict(raw)
    logger.debug(f"Judge verdict: {'correct' if verdict.correct else 'incorrect'} for answer {model_answer[:60]!r}")
    return verdict


def reward(c: int, u: int, params: RewardParams = RewardParams()) -> float:
    """
    Answer-gated tool-use reward: answer_weight*c + tool_weight*c*u.

    Args:
        c: 1 if the answer is judged correct
        u: 1 if the trajectory used the Expand tool

    Raises:
        ScoringError: If c or u is not binary
    """
    if c not in (0, 1) or u not in (0, 1):
        raise ScoringError(f"c and u must be 0 or 1, got c={c}, u={u}")
    if not c:
        return 0.0
    return round(params.answer_weight + params.tool_weight * u, 12)
