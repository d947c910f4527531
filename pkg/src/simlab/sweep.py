"""Benefit sweeps across compression rates and Monte-Carlo episode simulation."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from .decomposition import PolicySpec, RegimeCurve, SimlabError, check_probability, benefit, expected_error

logger = logging.getLogger("simlab")

CHUNK_TRIALS = 250_000


@dataclass(frozen=True)
class SweepResult:
    table: pd.DataFrame
    crossover_rate: Optional[float]


def sweep(curve: RegimeCurve, err_hit: float, err_miss: float) -> SweepResult:
    """
    Benefit at every grid rate.

    The crossover rate is the first grid rate at which benefit is positive
    after a non-positive one, or the first rate when benefit is positive
    throughout; None when benefit never turns positive.
    """
    rows = []
    for position, rate in enumerate(curve.rates):
        policy = curve.policy_at(position, err_hit, err_miss)
        rows.append({
            "rho": rate,
            "d_no": curve.d_no[position],
            "p_hit": policy.p_hit,
            "expected_error": expected_error(policy),
            "benefit": benefit(policy, curve.d_no[position]),
        })
    table = pd.DataFrame(rows, columns=["rho", "d_no", "p_hit", "expected_error", "benefit"])

    crossover = None
    positive = (table["benefit"] > 0).tolist()
    for position, is_positive in enumerate(positive):
        if is_positive and (position == 0 or not positive[position - 1]):
            crossover = float(table["rho"].iloc[position])
            break
    return SweepResult(table=table, crossover_rate=crossover)


@dataclass(frozen=True)
class SimulationResult:
    trials: int
    no_tool_error: float
    with_tool_error: float
    hit_rate: float

    @property
    def empirical_benefit(self) -> float:
        return self.no_tool_error - self.with_tool_error


def _simulate_chunk(seed_seq: np.random.SeedSequence, trials: int, policy: PolicySpec, d_no: float):
    rng = np.random.default_rng(seed_seq)
    no_tool_errors = rng.random(trials) < d_no
    hits = rng.random(trials) < policy.p_hit
    error_prob = np.where(hits, policy.err_hit, policy.err_miss)
    with_tool_errors = rng.random(trials) < error_prob
    return int(no_tool_errors.sum()), int(with_tool_errors.sum()), int(hits.sum())


def simulate_episodes(policy: PolicySpec, d_no: float, trials: int, seed: int = 0,
                      parallelism: int = 1) -> SimulationResult:
    """
    Monte-Carlo realization of the decomposition.

    Trials are split into fixed-size chunks, each with its own child of the
    seed sequence, so results do not depend on ``parallelism``.

    Raises:
        SimlabError: If trials < 1 or d_no is not a probability
    """
    if trials < 1:
        raise SimlabError(f"trials must be >= 1, got {trials}")
    check_probability("d_no", d_no)

    sizes = [CHUNK_TRIALS] * (trials // CHUNK_TRIALS)
    if trials % CHUNK_TRIALS:
        sizes.append(trials % CHUNK_TRIALS)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        totals = list(pool.map(lambda job: _simulate_chunk(job[0], job[1], policy, d_no), zip(children, sizes)))

    no_tool, with_tool, hits = (sum(column) for column in zip(*totals))
    result = SimulationResult(trials=trials, no_tool_error=no_tool / trials,
                              with_tool_error=with_tool / trials, hit_rate=hits / trials)
    logger.debug(f"Simulated {trials} episodes: {result}")
    return result
