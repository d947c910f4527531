"""
Benchmark metrics: QA accuracy through the judge, selection accuracy,
macro-averages, compression rates and judge agreement.
"""

import logging
import re
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import pandas as pd

from src.common.endpoints import ChatEndpoint, EndpointError
from src.ledger.budget import UndefinedRatioError, aggregate_ecr
from src.protocol.grammar import final_answer_text
from src.protocol.trajectory import Trajectory, TrajectoryStatus

from .judge import InvalidVerdictError, ScoringError, judge_answer, reward

logger = logging.getLogger("scoring")

_TOOL_CALL_BLOCK = re.compile(r"<tool_call>.*?</tool_call>", re.DOTALL)


@dataclass(frozen=True)
class AgreementStats:
    raw_agreement: float
    kappa: Optional[float]


@dataclass(frozen=True)
class GoldAnswer:
    question: str
    gold_answers: Sequence[str]


def selection_hit(trajectory: Trajectory, evidence) -> bool:
    """True iff any successful expansion selected an evidence page."""
    return bool(set(trajectory.expanded_pages) & set(evidence.evidence_pages))


def macro_average(values: Sequence[float]) -> float:
    """
    Unweighted mean of per-dataset accuracies, to one decimal.

    Raises:
        ScoringError: On an empty list
    """
    if not values:
        raise ScoringError("Macro-average of an empty list")
    return round(sum(values) / len(values), 1)


def agreement_stats(verdicts_a: Sequence[bool], verdicts_b: Sequence[bool]) -> AgreementStats:
    """
    Raw agreement (percent) and two-rater Cohen's kappa.

    Kappa is None when chance agreement is 1 (both raters constant and equal).

    Raises:
        ScoringError: On empty or misaligned lists
    """
    if len(verdicts_a) != len(verdicts_b):
        raise ScoringError(f"Verdict lists differ in length: {len(verdicts_a)} vs {len(verdicts_b)}")
    n = len(verdicts_a)
    if n == 0:
        raise ScoringError("Agreement of empty verdict lists")

    a = [bool(v) for v in verdicts_a]
    b = [bool(v) for v in verdicts_b]
    p_o = sum(x == y for x, y in zip(a, b)) / n
    pa, pb = sum(a) / n, sum(b) / n
    p_e = pa * pb + (1 - pa) * (1 - pb)
    kappa = None if p_e == 1 else (p_o - p_e) / (1 - p_e)
    return AgreementStats(raw_agreement=100.0 * p_o, kappa=kappa)


def force_extract_answer(trajectory: Trajectory, budget: Optional[int] = None) -> Optional[str]:
    """
    Answer text available after at most ``budget`` tool calls.

    Without a budget an answered trajectory yields its final answer and a
    budget-exhausted one yields the post-think text of its last turn. With
    a budget m, a trajectory that made more than m calls yields the
    post-think text of the reply carrying call m.
    """
    if not trajectory.turns:
        return None
    calls = [turn for turn in trajectory.turns if turn.tool_call is not None]
    if budget is None or len(calls) <= budget:
        if trajectory.status == TrajectoryStatus.ANSWERED:
            return trajectory.final_answer
        reply = trajectory.turns[-1].reply
    else:
        reply = calls[budget - 1].reply if budget >= 1 else trajectory.turns[0].reply
    return final_answer_text(_TOOL_CALL_BLOCK.sub("", reply))


@dataclass
class ScoredTrajectory:
    sample_id: str
    dataset: str
    status: str
    answer: Optional[str]
    correct: Optional[bool]
    selection_hit: Optional[bool]
    expand_calls: int
    reward: Optional[float]
    invalid: bool = False


@dataclass
class DatasetScore:
    dataset: str
    count: int
    qa_acc: Optional[float]
    sel_acc: Optional[float]
    ecr: Optional[float]
    ecr_ratio_of_sums: Optional[float]
    avg_expand_calls: float
    invalid: int


@dataclass
class BenchmarkReport:
    datasets: List[DatasetScore] = field(default_factory=list)
    macro_qa_acc: Optional[float] = None
    macro_sel_acc: Optional[float] = None
    scored: List[ScoredTrajectory] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(score) for score in self.datasets])
        if not frame.empty:
            macro = {"dataset": "macro", "count": int(frame["count"].sum()),
                     "qa_acc": self.macro_qa_acc, "sel_acc": self.macro_sel_acc,
                     "ecr": None, "ecr_ratio_of_sums": None,
                     "avg_expand_calls": round(frame["avg_expand_calls"].mean(), 2),
                     "invalid": int(frame["invalid"].sum())}
            frame = pd.concat([frame, pd.DataFrame([macro])], ignore_index=True)
        return frame

    def to_text(self) -> str:
        frame = self.to_frame()
        return "(no trajectories)" if frame.empty else frame.to_string(index=False)


def _score_one(trajectory: Trajectory, gold: Optional[GoldAnswer], evidence,
               judge_factory: Optional[Callable[[], ChatEndpoint]], force_extract: bool) -> ScoredTrajectory:
    hit = selection_hit(trajectory, evidence) if evidence is not None and evidence.evidence_pages else None
    answer = trajectory.final_answer if trajectory.status == TrajectoryStatus.ANSWERED else None
    if answer is None and force_extract and trajectory.status == TrajectoryStatus.BUDGET_EXHAUSTED:
        answer = force_extract_answer(trajectory)

    scored = ScoredTrajectory(sample_id=trajectory.sample_id, dataset=trajectory.dataset,
                              status=trajectory.status.value, answer=answer, correct=None,
                              selection_hit=hit, expand_calls=trajectory.expand_calls, reward=None)
    if judge_factory is None:
        return scored
    if gold is None:
        scored.invalid = True
        logger.warning(f"No gold answers for {trajectory.sample_id}; excluded")
        return scored
    if answer is None:
        scored.correct = False
    else:
        try:
            scored.correct = judge_answer(gold.question, gold.gold_answers, answer, judge_factory()).correct
        except (InvalidVerdictError, EndpointError) as e:
            logger.warning(f"Judging {trajectory.sample_id} failed: {e}")
            scored.invalid = True
            return scored
    scored.reward = reward(int(scored.correct), int(trajectory.expand_calls > 0))
    return scored


def _percent(flags: List[bool]) -> Optional[float]:
    return round(100.0 * sum(flags) / len(flags), 1) if flags else None


def score_trajectories(trajectories: Sequence[Trajectory], gold: Mapping[str, GoldAnswer],
                       evidence: Mapping[str, object], judge_factory: Optional[Callable[[], ChatEndpoint]],
                       parallelism: int = 4, force_extract: bool = False) -> BenchmarkReport:
    """
    Judge trajectories and aggregate per-dataset metrics.

    Args:
        trajectories: Episode records
        gold: Question and gold answers per sample id
        evidence: Evidence pages per sample id (samples without evidence
            are left out of selection accuracy)
        judge_factory: Builds a judge endpoint per request; None skips
            judging and leaves qa_acc empty
        parallelism: Bound on concurrent judge calls
        force_extract: Judge budget-exhausted trajectories on their last
            post-think text instead of counting them incorrect

    Returns:
        BenchmarkReport with qa_acc, sel_acc, ecr (both aggregations),
        avg_expand_calls and invalid counts per dataset
    """
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        futures = [pool.submit(_score_one, t, gold.get(t.sample_id), evidence.get(t.sample_id),
                               judge_factory, force_extract) for t in trajectories]
        scored = [future.result() for future in futures]

    by_dataset: Dict[str, List[int]] = defaultdict(list)
    for position, trajectory in enumerate(trajectories):
        by_dataset[trajectory.dataset].append(position)

    report = BenchmarkReport(scored=scored)
    for dataset in sorted(by_dataset):
        positions = by_dataset[dataset]
        rows = [scored[i] for i in positions]
        valid = [row for row in rows if not row.invalid]
        try:
            ecr_aggregate = aggregate_ecr(trajectories[i].ledger for i in positions)
            ecr_mean, ecr_pooled = round(ecr_aggregate.mean_of_ratios, 2), round(ecr_aggregate.ratio_of_sums, 2)
        except UndefinedRatioError:
            ecr_mean = ecr_pooled = None
        report.datasets.append(DatasetScore(
            dataset=dataset,
            count=len(rows),
            qa_acc=_percent([row.correct for row in valid if row.correct is not None]),
            sel_acc=_percent([row.selection_hit for row in rows if row.selection_hit is not None]),
            ecr=ecr_mean,
            ecr_ratio_of_sums=ecr_pooled,
            avg_expand_calls=round(sum(row.expand_calls for row in rows) / len(rows), 2),
            invalid=len(rows) - len(valid),
        ))
        logger.info(f"Scored {dataset}: {report.datasets[-1]}")

    qa = [score.qa_acc for score in report.datasets if score.qa_acc is not None]
    sel = [score.sel_acc for score in report.datasets if score.sel_acc is not None]
    report.macro_qa_acc = macro_average(qa) if qa else None
    report.macro_sel_acc = macro_average(sel) if sel else None
    return report


def budget_sweep(trajectories: Sequence[Trajectory], gold: Mapping[str, GoldAnswer],
                 judge_factory: Callable[[], ChatEndpoint], budgets: Sequence[int],
                 parallelism: int = 4) -> pd.DataFrame:
    """
    Retroactive accuracy at each tool-call budget m.

    Trajectories that used more than m calls are judged on the answer
    force-extracted at call m.
    """
    rows = []
    for budget in budgets:
        def judge(trajectory: Trajectory) -> Optional[bool]:
            entry = gold.get(trajectory.sample_id)
            answer = force_extract_answer(trajectory, budget)
            if entry is None:
                return None
            if not answer:
                return False
            try:
                return judge_answer(entry.question, entry.gold_answers, answer, judge_factory()).correct
            except (InvalidVerdictError, EndpointError) as e:
                logger.warning(f"Budget {budget}: judging {trajectory.sample_id} failed: {e}")
                return None

        with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
            verdicts = list(pool.map(judge, trajectories))
        valid = [v for v in verdicts if v is not None]
        rows.append({"budget": budget, "qa_acc": _percent(valid), "judged": len(valid),
                     "invalid": len(verdicts) - len(valid)})
    return pd.DataFrame(rows)
