"""
Distractor padding.

Gold documents are grown to a sampled length inside the target token range
by placing distractor passages before and after them. The gold text stays
contiguous so answer spans only need a single offset.
"""

import logging
import random
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

from src.ledger.tokens import CharRatioTokenCounter, TokenCounter

from .samples import CorpusError, Sample

logger = logging.getLogger("corpus")

TARGET_FLOOR = 3000
TARGET_CEILING = 32000
SEPARATOR = "\n\n"
ABOVE_CEILING = "above_ceiling"


def _fit_prefix(text: str, budget_tokens: int, counter: TokenCounter) -> str:
    """Longest word-boundary prefix of ``text`` counting at most ``budget_tokens``."""
    if budget_tokens <= 0:
        return ""
    lo, hi = 0, len(text)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if counter.count(text[:mid]) <= budget_tokens:
            lo = mid
        else:
            hi = mid - 1
    prefix = text[:lo]
    if lo < len(text):
        cut = prefix.rfind(" ")
        if cut > 0:
            prefix = prefix[:cut]
    return prefix.rstrip()


def pad_with_distractors(sample: Sample, pool: Sequence[str],
                         target: Tuple[int, int] = (TARGET_FLOOR, TARGET_CEILING), seed: int = 0,
                         counter: Optional[TokenCounter] = None) -> Sample:
    """
    Pad a sample's document with distractor passages.

    A target length is drawn uniformly from the range, distractors are drawn
    from the pool (with replacement) until the document reaches it, and each
    distractor is placed before or after the gold text at random.

    Args:
        sample: Validated sample
        pool: Distractor passages
        target: Inclusive token range, within [3000, 32000]
        seed: Seed for every random choice
        counter: Token counter (char4 by default)

    Returns:
        Padded sample with re-offset answer spans; a sample already above
        the ceiling is returned unchanged with an ``above_ceiling`` warning

    Raises:
        CorpusError: On an invalid range or an empty pool
    """
    low, high = target
    if not TARGET_FLOOR <= low <= high <= TARGET_CEILING:
        raise CorpusError(f"Target range {target} must lie within [{TARGET_FLOOR}, {TARGET_CEILING}]")
    passages = [text.strip() for text in pool if text and text.strip()]
    if not passages:
        raise CorpusError("Distractor pool is empty")

    counter = counter or CharRatioTokenCounter()
    gold_tokens = counter.count(sample.document)
    if gold_tokens > high:
        logger.warning(f"Sample {sample.id} has {gold_tokens} tokens, above ceiling {high}; left unpadded")
        return sample.with_warning(ABOVE_CEILING)
    if gold_tokens >= high:
        return sample

    rng = random.Random(seed)
    goal = rng.randint(max(low, gold_tokens), high)
    before: List[str] = []
    after: List[str] = []

    def assembled() -> str:
        return SEPARATOR.join(before + [sample.document] + after)

    total = gold_tokens
    while total < goal:
        passage = rng.choice(passages)
        side = before if rng.random() < 0.5 else after
        position = rng.randint(0, len(side))
        side.insert(position, passage)
        total = counter.count(assembled())
        if total > high:
            del side[position]
            remaining = high - counter.count(assembled()) - counter.count(SEPARATOR)
            trimmed = _fit_prefix(passage, remaining, counter)
            if trimmed:
                side.insert(position, trimmed)
            total = counter.count(assembled())
            break

    document = assembled()
    offset = len(SEPARATOR.join(before + [""])) if before else 0
    spans = tuple((start + offset, end + offset) for start, end in sample.answer_spans)
    padded = replace(sample, document=document, answer_spans=spans, source_tokens=None)
    logger.debug(f"Padded {sample.id} from {gold_tokens} to {total} tokens with "
                 f"{len(before)} leading and {len(after)} trailing distractors")
    return padded.validate()
