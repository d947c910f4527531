"""
Scoring: judge prompts and verdict parsing, rewards, selection accuracy,
benchmark aggregates and judge agreement.
"""

from .judge import (
    JUDGE_PROMPT_TEMPLATE,
    JudgeVerdict,
    RewardParams,
    ScoringError,
    InvalidVerdictError,
    judge_request,
    parse_verdict,
    judge_answer,
    reward,
)
from .metrics import (
    AgreementStats,
    GoldAnswer,
    ScoredTrajectory,
    DatasetScore,
    BenchmarkReport,
    selection_hit,
    macro_average,
    agreement_stats,
    force_extract_answer,
    score_trajectories,
    budget_sweep,
)

__all__ = [
    'JUDGE_PROMPT_TEMPLATE',
    'JudgeVerdict',
    'RewardParams',
    'ScoringError',
    'InvalidVerdictError',
    'judge_request',
    'parse_verdict',
    'judge_answer',
    'reward',
    'AgreementStats',
    'GoldAnswer',
    'ScoredTrajectory',
    'DatasetScore',
    'BenchmarkReport',
    'selection_hit',
    'macro_average',
    'agreement_stats',
    'force_extract_answer',
    'score_trajectories',
    'budget_sweep',
]
