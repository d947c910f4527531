"""
Closed-form error decomposition for selective expansion.

A policy hits (expands every evidence page) with probability ``p_hit``;
its error is ``err_hit`` on a hit and ``err_miss`` otherwise. Against a
no-tool reader with error ``d_no`` the expected gain of expansion is

    benefit = p_hit * (d_no - err_hit) - (1 - p_hit) * (err_miss - d_no)

which equals ``d_no - expected_error(policy)`` exactly. ``err_miss`` is
the average over partial-retrieval cases for multi-hop questions.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger("simlab")


class SimlabError(ValueError):
    """Raised for probabilities outside [0, 1] or malformed curves."""
    pass


def check_probability(name: str, value: float):
    if not 0.0 <= value <= 1.0:
        raise SimlabError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class PolicySpec:
    p_hit: float
    err_hit: float
    err_miss: float

    def __post_init__(self):
        check_probability("p_hit", self.p_hit)
        check_probability("err_hit", self.err_hit)
        check_probability("err_miss", self.err_miss)


def expected_error(policy: PolicySpec) -> float:
    return policy.p_hit * policy.err_hit + (1.0 - policy.p_hit) * policy.err_miss


def benefit(policy: PolicySpec, d_no: float) -> float:
    check_probability("d_no", d_no)
    p = policy.p_hit
    return p * (d_no - policy.err_hit) - (1.0 - p) * (policy.err_miss - d_no)


@dataclass(frozen=True)
class RegimeCurve:
    """
    No-tool error and selection accuracy measured at a grid of compression rates.

    Curves are data: values are only defined at grid points.
    """
    rates: Tuple[float, ...]
    d_no: Tuple[float, ...]
    p_hit: Tuple[float, ...]

    def __post_init__(self):
        if not (len(self.rates) == len(self.d_no) == len(self.p_hit)):
            raise SimlabError("rates, d_no and p_hit must have equal length")
        if not self.rates:
            raise SimlabError("A regime curve needs at least one rate")
        if np.any(np.diff(self.rates) <= 0):
            raise SimlabError(f"Rates must be strictly increasing: {list(self.rates)}")
        for value in (*self.d_no, *self.p_hit):
            check_probability("curve value", value)

    @classmethod
    def from_arrays(cls, rates: Sequence[float], d_no: Sequence[float], p_hit: Sequence[float]) -> "RegimeCurve":
        return cls(tuple(float(v) for v in rates), tuple(float(v) for v in d_no), tuple(float(v) for v in p_hit))

    @classmethod
    def from_measured_points(cls, rates: Sequence[float], qa_accuracy_pct: Sequence[float],
                             selection_accuracy_pct: Sequence[float]) -> "RegimeCurve":
        """Curve from no-tool QA accuracy and selection accuracy, both in percent."""
        return cls.from_arrays(
            rates,
            [round(1.0 - acc / 100.0, 12) for acc in qa_accuracy_pct],
            [round(acc / 100.0, 12) for acc in selection_accuracy_pct],
        )

    def policy_at(self, position: int, err_hit: float, err_miss: float) -> PolicySpec:
        return PolicySpec(self.p_hit[position], err_hit, err_miss)


def load_curve_csv(path: Union[str, Path]) -> RegimeCurve:
    """
    Read a curve from CSV with columns ``rho``, ``d_no`` and ``p_hit``.

    Raises:
        SimlabError: On missing columns or invalid values
    """
    frame = pd.read_csv(path)
    missing = {"rho", "d_no", "p_hit"} - set(frame.columns)
    if missing:
        raise SimlabError(f"Curve file {path} lacks columns {sorted(missing)}")
    if frame[["rho", "d_no", "p_hit"]].isna().any().any():
        raise SimlabError(f"Curve file {path} has empty cells")
    curve = RegimeCurve.from_arrays(frame["rho"], frame["d_no"], frame["p_hit"])
    logger.info(f"Loaded regime curve with {len(curve.rates)} rates from {path}")
    return curve
