"""
Closed-form and Monte-Carlo evaluation of selective-expansion benefit
across compression regimes.
"""

from .decomposition import (
    PolicySpec,
    RegimeCurve,
    SimlabError,
    expected_error,
    benefit,
    load_curve_csv,
)
from .sweep import SweepResult, SimulationResult, sweep, simulate_episodes

__all__ = [
    'PolicySpec',
    'RegimeCurve',
    'SimlabError',
    'expected_error',
    'benefit',
    'load_curve_csv',
    'SweepResult',
    'SimulationResult',
    'sweep',
    'simulate_episodes',
]
