"""
Hard-sample filtering.

Every generated sample gets one no-tool inference over its compressed pages.
Samples the model already answers correctly are easy and never reach SFT.
"""

import logging
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Sequence, Tuple

import pandas as pd

from src.common.endpoints import ChatEndpoint, EndpointError
from src.protocol.grammar import final_answer_text
from src.protocol.prompts import DIRECT_ANSWER_SYSTEM_PROMPT, user_message
from src.render.paginate import PageSet
from src.scoring.judge import InvalidVerdictError, judge_answer

from .samples import CorpusError, Sample

logger = logging.getLogger("corpus")


class Hardness(Enum):
    EASY = "easy"
    HARD = "hard"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class HardnessResult:
    sample_id: str
    dataset: str
    hardness: Hardness
    answer: str = ""
    error: str = ""


def classify_hardness(sample: Sample, page_set: PageSet, model: ChatEndpoint,
                      judge: ChatEndpoint) -> HardnessResult:
    """
    Classify one sample by single-turn, no-tool inference.

    Endpoint or verdict failures mark the sample unclassified.
    """
    if any(page.raster is None for page in page_set.pages):
        raise CorpusError(f"{sample.id}: pages must be rendered before classification")
    messages = [
        {"role": "system", "content": DIRECT_ANSWER_SYSTEM_PROMPT},
        user_message([page.raster for page in page_set.pages], sample.question),
    ]
    try:
        answer = final_answer_text(model.complete(messages))
        verdict = judge_answer(sample.question, sample.gold_answers, answer, judge)
    except (EndpointError, InvalidVerdictError) as e:
        logger.warning(f"Sample {sample.id} left unclassified: {e}")
        return HardnessResult(sample.id, sample.dataset, Hardness.UNCLASSIFIED, error=str(e))

    hardness = Hardness.EASY if verdict.correct else Hardness.HARD
    return HardnessResult(sample.id, sample.dataset, hardness, answer=answer)


@dataclass
class FilterReport:
    """Per-dataset counts of the hard filter; keep rate is hard / generated."""
    counts: Dict[str, Counter] = field(default_factory=dict)

    def add(self, dataset: str, hardness: Hardness, n: int = 1):
        self.counts.setdefault(dataset, Counter())[hardness] += n

    @classmethod
    def from_results(cls, results: Sequence[HardnessResult]) -> "FilterReport":
        report = cls()
        for result in results:
            report.add(result.dataset, result.hardness)
        return report

    def generated(self, dataset: str) -> int:
        return sum(self.counts.get(dataset, Counter()).values())

    def kept(self, dataset: str) -> int:
        return self.counts.get(dataset, Counter())[Hardness.HARD]

    def keep_rate(self, dataset: str) -> float:
        generated = self.generated(dataset)
        return round(100.0 * self.kept(dataset) / generated, 1) if generated else 0.0

    def total_keep_rate(self) -> float:
        generated = sum(self.generated(name) for name in self.counts)
        kept = sum(self.kept(name) for name in self.counts)
        return round(100.0 * kept / generated, 1) if generated else 0.0

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for name in sorted(self.counts):
            tally = self.counts[name]
            rows.append({"dataset": name, "generated": self.generated(name), "easy": tally[Hardness.EASY],
                         "hard": tally[Hardness.HARD], "unclassified": tally[Hardness.UNCLASSIFIED],
                         "keep_rate": self.keep_rate(name)})
        if rows:
            frame = pd.DataFrame(rows)
            total = {"dataset": "total", "generated": int(frame["generated"].sum()),
                     "easy": int(frame["easy"].sum()), "hard": int(frame["hard"].sum()),
                     "unclassified": int(frame["unclassified"].sum()), "keep_rate": self.total_keep_rate()}
            return pd.concat([frame, pd.DataFrame([total])], ignore_index=True)
        return pd.DataFrame(columns=["dataset", "generated", "easy", "hard", "unclassified", "keep_rate"])

    def to_dict(self) -> Dict[str, Dict[str, float]]:
        return {row["dataset"]: {key: row[key] for key in row if key != "dataset"}
                for row in self.to_frame().to_dict(orient="records")}


def classify_samples(items: Sequence[Tuple[Sample, PageSet]], model_factory: Callable[[], ChatEndpoint],
                     judge_factory: Callable[[], ChatEndpoint],
                     parallelism: int = 4) -> Tuple[List[HardnessResult], FilterReport]:
    """Classify many samples with bounded parallelism; results keep input order."""
    if parallelism < 1:
        raise CorpusError(f"parallelism must be >= 1, got {parallelism}")

    def run(item: Tuple[Sample, PageSet]) -> HardnessResult:
        sample, page_set = item
        try:
            return classify_hardness(sample, page_set, model_factory(), judge_factory())
        except EndpointError as e:
            logger.warning(f"Sample {sample.id} left unclassified: {e}")
            return HardnessResult(sample.id, sample.dataset, Hardness.UNCLASSIFIED, error=str(e))

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        results = list(pool.map(run, items))
    report = FilterReport.from_results(results)
    logger.info(f"Hard filter kept {sum(report.kept(n) for n in report.counts)} of {len(results)} samples "
                f"({report.total_keep_rate()}%)")
    return results, report


def split_sft_rl(hard: Sequence[Sample], easy: Sequence[Sample], seed: int = 0,
                 sft_fraction: float = 0.8) -> Tuple[List[Sample], List[Sample]]:
    """
    Seeded split: ``sft_fraction`` of hard samples go to SFT; the remaining
    hard samples join the easy ones in the RL pool.
    """
    if not 0.0 <= sft_fraction <= 1.0:
        raise CorpusError(f"sft_fraction must lie in [0, 1], got {sft_fraction}")
    shuffled = list(hard)
    random.Random(seed).shuffle(shuffled)
    cut = round(len(shuffled) * sft_fraction)
    return shuffled[:cut], shuffled[cut:] + list(easy)
