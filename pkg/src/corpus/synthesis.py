"""
Synthetic trace requests and reply validation.

A synthesis model sees the question, the uncompressed text of each evidence
page and the gold answer, and writes one reply per turn. Tool responses in
the accepted trajectory are produced here from the real pages, never taken
from the synthesis output.
"""

import logging
import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

from src.ledger.budget import TokenLedger
from src.protocol.expand import Expander
from src.protocol.grammar import FinalAnswer, ToolCall, parse_model_turn
from src.protocol.prompts import READ_TEXT_SYSTEM_PROMPT
from src.protocol.trajectory import Trajectory, TrajectoryStatus, Turn
from src.render.paginate import PageSet

from .samples import InvalidSampleError, Sample, SynthesisRejected

logger = logging.getLogger("corpus")

TRACE_GENERATION_SYSTEM_PROMPT = (
    "You generate training data for a document QA model. Output ONLY the requested format with "
    "---RESPONSE{N}--- delimiters. Start your output directly with ---RESPONSE1---. No preamble.\n\n"
    "ROLEPLAY CONSTRAINT (CRITICAL): You are roleplaying a model that is solving the question from "
    "scratch by investigating the document. The <think> blocks must read as genuine first-person "
    "investigation of the image content. NEVER reference these prompt elements inside <think>: "
    "\"the answer\", \"the answer key\", \"the provided answer\", \"ground truth\", "
    "\"the prompt says/states/mentions/indicates/asks\", \"the question's premise\", \"the task says\", "
    "\"training data/example\", \"provided text snippets\", or any phrasing that implies you were told "
    "the answer or the correct image in advance. Treat the answer as something you DISCOVER by reading, "
    "not something you were given. Do not include \"wait, re-reading\" or \"there seems to be a mismatch\" "
    "style self-correction --- write the reasoning as if it landed correctly the first time.\n\n"
    "STYLE: Each <think> block is 3--5 sentences. After-zoom reasoning MUST quote or cite specific "
    "words/phrases from the tool_response text. Do not fabricate text that isn't in the tool_response."
)

_DELIMITER = re.compile(r"---RESPONSE(\d+)---")


@dataclass(frozen=True)
class SynthesisRequest:
    """Prompt bundle for one synthetic trace."""
    sample_id: str
    system_prompt: str
    user_prompt: str
    evidence_pages: Tuple[int, ...]
    page_count: int

    @property
    def expected_tool_calls(self) -> int:
        return len(self.evidence_pages)

    def messages(self) -> List[Dict[str, str]]:
        return [{"role": "system", "content": self.system_prompt},
                {"role": "user", "content": self.user_prompt}]

    def to_dict(self) -> Dict[str, object]:
        return {"sample_id": self.sample_id, "evidence_pages": list(self.evidence_pages),
                "page_count": self.page_count, "expected_tool_calls": self.expected_tool_calls,
                "messages": self.messages()}


def build_synthesis_request(sample: Sample, evidence_texts: Mapping[int, str], page_count: int,
                            answer: Optional[str] = None) -> SynthesisRequest:
    """
    Assemble the trace-generation request for a sample.

    Args:
        sample: Hard sample
        evidence_texts: Uncompressed text per evidence page (1-based index)
        page_count: Pages the reader will see
        answer: Gold answer to reach (first gold answer by default)

    Raises:
        InvalidSampleError: If the evidence set is empty or out of range
    """
    if not evidence_texts:
        raise InvalidSampleError(f"{sample.id}: no evidence pages to synthesize from")
    pages = tuple(sorted(evidence_texts))
    if pages[0] < 1 or pages[-1] > page_count:
        raise InvalidSampleError(f"{sample.id}: evidence pages {list(pages)} outside [1, {page_count}]")

    answer = answer or sample.gold_answers[0]
    calls = len(pages)
    evidence_block = "\n\n".join(f"[Image {k}]\n{evidence_texts[k]}" for k in pages)
    example_call = '<tool_call>{"name": "read_text", "arguments": {"image": N}}</tool_call>'
    user_prompt = (
        f"The document is shown as {page_count} images, numbered 1 to {page_count}.\n\n"
        f"Question: {sample.question}\n\n"
        f"Answer: {answer}\n\n"
        f"Relevant image contents:\n\n{evidence_block}\n\n"
        f"Write {calls + 1} responses. Responses 1 to {calls} each contain one <think> block followed by "
        f"exactly one {example_call}, reading images {', '.join(str(k) for k in pages)} in a sensible order. "
        f"Response {calls + 1} contains one <think> block followed by the final answer."
    )
    return SynthesisRequest(sample_id=sample.id, system_prompt=TRACE_GENERATION_SYSTEM_PROMPT,
                            user_prompt=user_prompt, evidence_pages=pages, page_count=page_count)


def split_responses(raw: str) -> List[str]:
    """
    Split a synthesis reply on ``---RESPONSE{N}---`` delimiters.

    Raises:
        SynthesisRejected: If delimiters are missing or not numbered 1..n
    """
    pieces = _DELIMITER.split(raw.strip())
    if len(pieces) < 3 or pieces[0].strip():
        raise SynthesisRejected("Reply does not start with ---RESPONSE1---")
    numbers = [int(n) for n in pieces[1::2]]
    if numbers != list(range(1, len(numbers) + 1)):
        raise SynthesisRejected(f"Response delimiters out of order: {numbers}")
    return [body.strip() for body in pieces[2::2]]


def parse_synthesized_trace(raw: str, request: SynthesisRequest, sample: Sample, page_set: PageSet,
                            expander: Optional[Expander] = None) -> Trajectory:
    """
    Validate a synthesis reply and build a training trajectory from it.

    The reply must hold exactly one tool call per evidence page, each on a
    distinct evidence page, followed by a final answer. Tool responses are
    produced by expanding the real pages.

    Raises:
        SynthesisRejected: If any check fails
    """
    expander = expander or Expander()
    responses = split_responses(raw)
    expected = request.expected_tool_calls
    if len(responses) != expected + 1:
        raise SynthesisRejected(f"{sample.id}: expected {expected + 1} responses, got {len(responses)}")

    trajectory = Trajectory(
        sample_id=sample.id, question=sample.question, system_prompt=READ_TEXT_SYSTEM_PROMPT,
        page_count=page_set.page_count, expand_kind="source_text",
        ledger=TokenLedger(source_tokens=sample.source_tokens or expander.counter.count(sample.document),
                           initial_visual_tokens=page_set.total_visual_tokens),
        dataset=sample.dataset,
    )
    seen = set()
    for turn_index, reply in enumerate(responses[:-1], start=1):
        call = parse_model_turn(reply)
        if not isinstance(call, ToolCall):
            raise SynthesisRejected(f"{sample.id}: response {turn_index} has no valid tool call")
        if call.image_index not in request.evidence_pages or call.image_index in seen:
            raise SynthesisRejected(f"{sample.id}: response {turn_index} reads image {call.image_index}, "
                                    f"not an unread evidence page")
        seen.add(call.image_index)
        response = expander.expand(page_set, sample.document, call, "source_text")
        trajectory.ledger.append(turn_index, response.ledger_kind, response.token_cost, call.image_index)
        trajectory.turns.append(Turn(index=turn_index, reply=reply, tool_call=call,
                                     tool_response=response.transcript(), expanded=True))

    final = parse_model_turn(responses[-1])
    if not isinstance(final, FinalAnswer) or not final.text:
        raise SynthesisRejected(f"{sample.id}: last response is not a final answer")
    trajectory.turns.append(Turn(index=len(responses), reply=responses[-1]))
    trajectory.final_answer = final.text
    trajectory.status = TrajectoryStatus.ANSWERED
    logger.debug(f"Accepted synthesized trace for {sample.id} with {expected} tool calls")
    return trajectory
