"""
Sample and evidence types for dataset construction.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from src.common.models import RawSampleRecord

logger = logging.getLogger("corpus")

Span = Tuple[int, int]


class CorpusError(Exception):
    """Base exception for dataset construction errors."""
    pass


class SpanRangeError(CorpusError):
    """Raised when an answer span falls outside the document."""
    pass


class InvalidSampleError(CorpusError):
    """Raised when a sample cannot be used (no answer span, no evidence pages)."""
    pass


class SynthesisRejected(CorpusError):
    """Raised when a synthesized trace fails validation."""
    pass


def locate_answer_spans(document: str, answers: Sequence[str]) -> List[Span]:
    """Every case-insensitive occurrence of every answer in the document, in order."""
    haystack = document.lower()
    spans = set()
    for answer in answers:
        needle = answer.lower()
        if not needle:
            continue
        start = haystack.find(needle)
        while start != -1:
            spans.add((start, start + len(needle)))
            start = haystack.find(needle, start + 1)
    return sorted(spans)


@dataclass(frozen=True)
class Sample:
    """A question over a document with its gold answers and answer spans (half-open)."""
    id: str
    question: str
    gold_answers: Tuple[str, ...]
    document: str
    answer_spans: Tuple[Span, ...]
    hop_count: int = 1
    dataset: str = "default"
    source_tokens: Optional[int] = None
    warnings: Tuple[str, ...] = field(default=(), compare=False)

    def validate(self) -> "Sample":
        """
        Check that every span lies in the document and contains a gold answer.

        Raises:
            SpanRangeError: If a span is outside the document
            InvalidSampleError: If a span holds no gold answer or hop_count < 1
        """
        if self.hop_count < 1:
            raise InvalidSampleError(f"{self.id}: hop_count must be >= 1")
        if not self.gold_answers:
            raise InvalidSampleError(f"{self.id}: no gold answers")
        answers = [answer.lower() for answer in self.gold_answers]
        for start, end in self.answer_spans:
            if start < 0 or end > len(self.document) or end <= start:
                raise SpanRangeError(f"{self.id}: span ({start}, {end}) outside document of {len(self.document)} chars")
            piece = self.document[start:end].lower()
            if not any(answer in piece for answer in answers):
                raise InvalidSampleError(f"{self.id}: span ({start}, {end}) holds no gold answer: {piece[:60]!r}")
        return self

    def with_warning(self, warning: str) -> "Sample":
        return replace(self, warnings=self.warnings + (warning,))

    def to_record(self) -> RawSampleRecord:
        return RawSampleRecord(id=self.id, question=self.question, answers=list(self.gold_answers),
                               document=self.document, spans=list(self.answer_spans), dataset=self.dataset,
                               hop_count=self.hop_count, source_tokens=self.source_tokens)

    @classmethod
    def from_record(cls, record: RawSampleRecord) -> "Sample":
        """
        Build a validated sample from a raw JSONL record.

        Records without spans get every occurrence of a gold answer.

        Raises:
            InvalidSampleError: If no span can be found or a span is invalid
        """
        spans = list(record.spans) or locate_answer_spans(record.document, record.answers)
        if not spans:
            raise InvalidSampleError(f"{record.id}: no gold answer occurs in the document")
        sample = cls(
            id=record.id,
            question=record.question,
            gold_answers=tuple(record.answers),
            document=record.document,
            answer_spans=tuple(sorted(tuple(span) for span in spans)),
            hop_count=record.hop_count or 1,
            dataset=record.dataset,
            source_tokens=record.source_tokens,
        )
        return sample.validate()


@dataclass(frozen=True)
class EvidenceMap:
    """Pages (1-based) whose character span intersects an answer span."""
    sample_id: str
    evidence_pages: FrozenSet[int]
    page_count: int

    def __post_init__(self):
        bad = [k for k in self.evidence_pages if not 1 <= k <= self.page_count]
        if bad:
            raise CorpusError(f"{self.sample_id}: evidence pages {sorted(bad)} outside [1, {self.page_count}]")

    @property
    def ordered(self) -> List[int]:
        return sorted(self.evidence_pages)


def load_samples(path: Union[str, Path]) -> Tuple[List[Sample], List[str]]:
    """
    Read raw-sample JSONL.

    Returns:
        (valid samples, error messages for rejected lines)
    """
    samples: List[Sample] = []
    rejected: List[str] = []
    with Path(path).open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                samples.append(Sample.from_record(RawSampleRecord.model_validate_json(line)))
            except (ValidationError, CorpusError) as e:
                rejected.append(f"line {line_number}: {e}")
    if rejected:
        logger.warning(f"Rejected {len(rejected)} of {len(samples) + len(rejected)} samples in {path}")
    return samples, rejected


def write_samples(samples: Sequence[Sample], path: Union[str, Path]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for sample in samples:
            handle.write(sample.to_record().model_dump_json() + "\n")
    return len(samples)


def load_distractor_pool(path: Union[str, Path]) -> List[str]:
    """Distractor passages: one JSON string or ``{"text": ...}`` per line, or blank-line separated plain text."""
    path = Path(path)
    content = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        passages = []
        for line in content.splitlines():
            if line.strip():
                item = json.loads(line)
                passages.append(item["text"] if isinstance(item, dict) else str(item))
        return passages
    return [block.strip() for block in content.split("\n\n") if block.strip()]
