"""
Episode engine.

Runs the multi-turn selection-then-expansion loop against a chat endpoint.
Each turn the model either calls the Expand tool on one page or gives its
final answer; the engine parses the reply, executes at most one expansion,
updates the token ledger and feeds the tool response back.
"""

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

from src.common.endpoints import ChatEndpoint, EndpointAuthError, EndpointError
from src.common.models import EndpointConfig
from src.ledger.budget import TokenLedger
from src.render.paginate import PageSet
from src.render.presets import RenderPreset

from .expand import EXPAND_KINDS, ExpandError, Expander
from .grammar import FinalAnswer, ParseError, ToolCall, final_answer_text, parse_model_turn
from .prompts import (
    ANSWER_WITH_EVIDENCE_SYSTEM_PROMPT,
    SELECTION_SYSTEM_PROMPT,
    TOOL_NAME_BY_KIND,
    malformed_call_message,
    selection_question,
    system_prompt_for,
    user_message,
)
from .trajectory import Trajectory, TrajectoryStatus, Turn

# Initialize logger
logger = logging.getLogger("protocol")

DEFAULT_MAX_TURNS = 6


class EpisodeError(Exception):
    """Raised when an episode cannot start (bad configuration or unrendered pages)."""
    pass


@dataclass(frozen=True)
class EpisodeConfig:
    max_turns: int = DEFAULT_MAX_TURNS
    expand_kind: str = "source_text"
    preset: Optional[RenderPreset] = None
    endpoint: Optional[EndpointConfig] = None

    def __post_init__(self):
        if self.max_turns < 1:
            raise EpisodeError(f"max_turns must be >= 1, got {self.max_turns}")
        if self.expand_kind not in EXPAND_KINDS:
            raise EpisodeError(f"Unknown expand kind: {self.expand_kind}")


@dataclass(frozen=True)
class EpisodeJob:
    """One episode to run: a question over a rendered document."""
    sample_id: str
    question: str
    page_set: PageSet
    source_text: str
    source_tokens: Optional[int] = None
    dataset: str = "default"


def _page_images(page_set: PageSet) -> List[Any]:
    missing = [page.index for page in page_set.pages if page.raster is None]
    if missing:
        raise EpisodeError(f"Pages {missing[:5]} have no raster; render pages before running an episode")
    return [page.raster for page in page_set.pages]


def _record_endpoint_failure(trajectory: Trajectory, error: Exception) -> Trajectory:
    trajectory.status = TrajectoryStatus.PROTOCOL_ERROR
    trajectory.error = str(error)
    trajectory.error_type = "auth" if isinstance(error, EndpointAuthError) else "endpoint"
    logger.error(f"Episode {trajectory.sample_id} aborted after {len(trajectory.turns)} turns: {error}")
    return trajectory


def run_episode(page_set: PageSet, source_text: str, question: str, config: EpisodeConfig,
                endpoint: ChatEndpoint, expander: Optional[Expander] = None, *,
                sample_id: str = "", source_tokens: Optional[int] = None,
                dataset: str = "default") -> Trajectory:
    """
    Run one expansion episode.

    Args:
        page_set: Rendered pages of the document
        source_text: Document text the pages were rendered from
        question: Question to answer
        config: Turn cap and expansion kind
        endpoint: Chat endpoint producing model replies
        expander: Expansion settings (defaults apply when omitted)
        sample_id: Identifier recorded on the trajectory
        source_tokens: Injected N; counted from the source text when omitted
        dataset: Benchmark name recorded on the trajectory

    Returns:
        Trajectory with status answered, budget_exhausted or protocol_error
    """
    expander = expander or Expander()
    if source_tokens is None:
        source_tokens = expander.counter.count(source_text)

    system_prompt = system_prompt_for(config.expand_kind)
    trajectory = Trajectory(
        sample_id=sample_id,
        question=question,
        system_prompt=system_prompt,
        page_count=page_set.page_count,
        expand_kind=config.expand_kind,
        ledger=TokenLedger(source_tokens=source_tokens, initial_visual_tokens=page_set.total_visual_tokens),
        dataset=dataset,
    )
    messages: List[Dict[str, Any]] = [
        {"role": "system", "content": system_prompt},
        user_message(_page_images(page_set), question),
    ]
    tool_name = TOOL_NAME_BY_KIND[config.expand_kind]

    for turn_index in range(1, config.max_turns + 1):
        try:
            reply = endpoint.complete(list(messages))
        except EndpointError as e:
            return _record_endpoint_failure(trajectory, e)
        messages.append({"role": "assistant", "content": reply})
        parsed = parse_model_turn(reply)

        if isinstance(parsed, FinalAnswer):
            trajectory.turns.append(Turn(index=turn_index, reply=reply))
            trajectory.final_answer = parsed.text
            trajectory.status = TrajectoryStatus.ANSWERED
            logger.debug(f"Episode {sample_id} answered at turn {turn_index}")
            return trajectory

        if turn_index == config.max_turns:
            # The last turn's call is recorded but never executed.
            trajectory.turns.append(Turn(
                index=turn_index, reply=reply,
                tool_call=parsed if isinstance(parsed, ToolCall) else None,
                parse_error=parsed.message if isinstance(parsed, ParseError) else None,
            ))
            break

        if isinstance(parsed, ParseError):
            response_text = malformed_call_message(parsed.message, tool_name)
            trajectory.turns.append(Turn(index=turn_index, reply=reply, tool_response=response_text,
                                         parse_error=parsed.message))
            messages.append({"role": "tool", "content": response_text})
            logger.info(f"Episode {sample_id} turn {turn_index}: malformed tool call {parsed.offending[:80]!r}")
            continue

        if parsed.tool_name != tool_name:
            problem = f"unknown tool '{parsed.tool_name}'"
            response_text = malformed_call_message(problem, tool_name)
            trajectory.turns.append(Turn(index=turn_index, reply=reply, tool_response=response_text,
                                         parse_error=problem))
            messages.append({"role": "tool", "content": response_text})
            logger.info(f"Episode {sample_id} turn {turn_index}: called {parsed.tool_name} instead of {tool_name}")
            continue

        try:
            response = expander.expand(page_set, source_text, parsed, config.expand_kind)
        except EndpointError as e:
            trajectory.turns.append(Turn(index=turn_index, reply=reply, tool_call=parsed))
            return _record_endpoint_failure(trajectory, e)

        if response.ok:
            trajectory.ledger.append(turn_index, response.ledger_kind, response.token_cost, parsed.image_index)
        trajectory.turns.append(Turn(index=turn_index, reply=reply, tool_call=parsed,
                                     tool_response=response.transcript(), expanded=response.ok))
        messages.append({"role": "tool", "content": response.message_content()})

    trajectory.status = TrajectoryStatus.BUDGET_EXHAUSTED
    logger.info(f"Episode {sample_id} exhausted its {config.max_turns}-turn budget")
    return trajectory


def _run_job(job: EpisodeJob, config: EpisodeConfig, endpoint_factory: Callable[[], ChatEndpoint],
             expander: Expander, runner: Callable[..., Trajectory]) -> Trajectory:
    try:
        return runner(job.page_set, job.source_text, job.question, config, endpoint_factory(), expander,
                      sample_id=job.sample_id, source_tokens=job.source_tokens, dataset=job.dataset)
    except (EpisodeError, ExpandError) as e:
        logger.error(f"Episode {job.sample_id} failed to run: {e}")
        return Trajectory(
            sample_id=job.sample_id, question=job.question, system_prompt=system_prompt_for(config.expand_kind),
            page_count=job.page_set.page_count, expand_kind=config.expand_kind,
            ledger=TokenLedger(job.source_tokens or 0, job.page_set.total_visual_tokens),
            status=TrajectoryStatus.PROTOCOL_ERROR, error=str(e), error_type="internal", dataset=job.dataset,
        )
    except EndpointAuthError as e:
        # Raised while building the endpoint (missing secret)
        return _record_endpoint_failure(Trajectory(
            sample_id=job.sample_id, question=job.question, system_prompt=system_prompt_for(config.expand_kind),
            page_count=job.page_set.page_count, expand_kind=config.expand_kind,
            ledger=TokenLedger(job.source_tokens or 0, job.page_set.total_visual_tokens), dataset=job.dataset,
        ), e)


def run_episodes(jobs: Sequence[EpisodeJob], config: EpisodeConfig,
                 endpoint_factory: Callable[[], ChatEndpoint], expander: Optional[Expander] = None,
                 parallelism: int = 4, runner: Optional[Callable[..., Trajectory]] = None) -> List[Trajectory]:
    """
    Run many episodes with bounded parallelism, preserving input order.

    Each episode gets its own endpoint from ``endpoint_factory``; page sets
    are shared read-only.
    """
    if parallelism < 1:
        raise EpisodeError(f"parallelism must be >= 1, got {parallelism}")
    expander = expander or Expander()
    runner = runner or run_episode
    logger.info(f"Running {len(jobs)} episodes with parallelism {parallelism}")
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(_run_job, job, config, endpoint_factory, expander, runner) for job in jobs]
        return [future.result() for future in futures]


_FIRST_INTEGER = re.compile(r"\d+")


def _selected_index(reply: str) -> Optional[int]:
    match = _FIRST_INTEGER.search(final_answer_text(reply))
    return int(match.group(0)) if match else None


def probe_selection(page_set: PageSet, question: str, endpoint: ChatEndpoint) -> Optional[int]:
    """
    Ask an endpoint which page most likely holds the answer.

    Returns:
        The selected 1-based page index, or None when the reply names no
        page in range
    """
    messages = [
        {"role": "system", "content": SELECTION_SYSTEM_PROMPT},
        user_message(_page_images(page_set), selection_question(question)),
    ]
    index = _selected_index(endpoint.complete(messages))
    if index is None or not 1 <= index <= page_set.page_count:
        return None
    return index


def run_select_then_expand(page_set: PageSet, source_text: str, question: str, config: EpisodeConfig,
                           endpoint: ChatEndpoint, expander: Optional[Expander] = None, *,
                           sample_id: str = "", source_tokens: Optional[int] = None,
                           dataset: str = "default") -> Trajectory:
    """
    Prompting-only flow for endpoints never trained on the tool format.

    The endpoint first names one page, that page is expanded, and the
    endpoint then answers with the expanded content in context.
    """
    expander = expander or Expander()
    if source_tokens is None:
        source_tokens = expander.counter.count(source_text)
    images = _page_images(page_set)
    trajectory = Trajectory(
        sample_id=sample_id, question=question, system_prompt=SELECTION_SYSTEM_PROMPT,
        page_count=page_set.page_count, expand_kind=config.expand_kind,
        ledger=TokenLedger(source_tokens=source_tokens, initial_visual_tokens=page_set.total_visual_tokens),
        dataset=dataset,
    )

    try:
        selection_reply = endpoint.complete([
            {"role": "system", "content": SELECTION_SYSTEM_PROMPT},
            user_message(images, selection_question(question)),
        ])
        index = _selected_index(selection_reply)
        answer_messages: List[Dict[str, Any]] = [
            {"role": "system", "content": ANSWER_WITH_EVIDENCE_SYSTEM_PROMPT},
            user_message(images, question),
        ]
        turn = Turn(index=1, reply=selection_reply)
        if index is not None and index >= 1:
            call = ToolCall(TOOL_NAME_BY_KIND[config.expand_kind], index)
            response = expander.expand(page_set, source_text, call, config.expand_kind)
            if response.ok:
                trajectory.ledger.append(1, response.ledger_kind, response.token_cost, index)
                answer_messages.append({"role": "tool", "content": response.message_content()})
            turn = Turn(index=1, reply=selection_reply, tool_call=call,
                        tool_response=response.transcript(), expanded=response.ok)
        trajectory.turns.append(turn)

        answer_reply = endpoint.complete(answer_messages)
    except EndpointError as e:
        return _record_endpoint_failure(trajectory, e)

    trajectory.turns.append(Turn(index=2, reply=answer_reply))
    trajectory.final_answer = final_answer_text(answer_reply)
    trajectory.status = TrajectoryStatus.ANSWERED
    return trajectory


def probe_selections(jobs: Sequence[EpisodeJob], endpoint_factory: Callable[[], ChatEndpoint],
                     parallelism: int = 4) -> List[Optional[int]]:
    """
    Run the selection probe for every job, preserving input order.

    An endpoint failure leaves that job's selection as None.
    """
    if parallelism < 1:
        raise EpisodeError(f"parallelism must be >= 1, got {parallelism}")

    def probe(job: EpisodeJob) -> Optional[int]:
        try:
            return probe_selection(job.page_set, job.question, endpoint_factory())
        except EndpointError as e:
            logger.warning(f"Selection probe for {job.sample_id} failed: {e}")
            return None

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(probe, jobs))
