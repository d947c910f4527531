"""
Selective expansion protocol: tool-call grammar, the Expand tool, trajectory
records and the multi-turn episode engine.
"""

from .grammar import (
    ToolCall,
    FinalAnswer,
    ParseError,
    GrammarError,
    TOOL_NAMES,
    parse_model_turn,
    final_answer_text,
    extract_reasoning,
)
from .prompts import READ_TEXT_SYSTEM_PROMPT, ZOOM_IN_SYSTEM_PROMPT, system_prompt_for
from .expand import ExpandResponse, Expander, ExpandError, expand, INVALID_INDEX
from .trajectory import Trajectory, Turn, TrajectoryStatus, LossFlag
from .episode import (
    EpisodeConfig,
    EpisodeJob,
    EpisodeError,
    run_episode,
    run_episodes,
    run_select_then_expand,
    probe_selection,
    probe_selections,
)

__all__ = [
    'ToolCall',
    'FinalAnswer',
    'ParseError',
    'GrammarError',
    'TOOL_NAMES',
    'parse_model_turn',
    'final_answer_text',
    'extract_reasoning',
    'READ_TEXT_SYSTEM_PROMPT',
    'ZOOM_IN_SYSTEM_PROMPT',
    'system_prompt_for',
    'ExpandResponse',
    'Expander',
    'ExpandError',
    'expand',
    'INVALID_INDEX',
    'Trajectory',
    'Turn',
    'TrajectoryStatus',
    'LossFlag',
    'EpisodeConfig',
    'EpisodeJob',
    'EpisodeError',
    'run_episode',
    'run_episodes',
    'run_select_then_expand',
    'probe_selection',
    'probe_selections',
]
