"""
Dataset construction: answer evidence through pagination, distractor padding,
hard-sample filtering, synthetic trace requests and SFT export.
"""

from src.protocol.trajectory import Trajectory, Turn, TrajectoryStatus, LossFlag

from .samples import (
    Sample,
    EvidenceMap,
    CorpusError,
    SpanRangeError,
    InvalidSampleError,
    SynthesisRejected,
    locate_answer_spans,
    load_samples,
    write_samples,
    load_distractor_pool,
)
from .evidence import map_spans_to_pages
from .padding import pad_with_distractors, ABOVE_CEILING
from .hardness import (
    Hardness,
    HardnessResult,
    FilterReport,
    classify_hardness,
    classify_samples,
    split_sft_rl,
)
from .synthesis import (
    TRACE_GENERATION_SYSTEM_PROMPT,
    SynthesisRequest,
    build_synthesis_request,
    parse_synthesized_trace,
)
from .export import ExportReport, export_sft_dataset, load_sft_dataset

__all__ = [
    'Trajectory',
    'Turn',
    'TrajectoryStatus',
    'LossFlag',
    'Sample',
    'EvidenceMap',
    'CorpusError',
    'SpanRangeError',
    'InvalidSampleError',
    'SynthesisRejected',
    'locate_answer_spans',
    'load_samples',
    'write_samples',
    'load_distractor_pool',
    'map_spans_to_pages',
    'pad_with_distractors',
    'ABOVE_CEILING',
    'Hardness',
    'HardnessResult',
    'FilterReport',
    'classify_hardness',
    'classify_samples',
    'split_sft_rl',
    'TRACE_GENERATION_SYSTEM_PROMPT',
    'SynthesisRequest',
    'build_synthesis_request',
    'parse_synthesized_trace',
    'ExportReport',
    'export_sft_dataset',
    'load_sft_dataset',
]
