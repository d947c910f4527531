"""
Unit tests for the error decomposition, benefit sweeps and Monte-Carlo
episode simulation.
"""

import numpy as np
import pytest

from src.simlab.decomposition import (
    PolicySpec,
    RegimeCurve,
    SimlabError,
    benefit,
    expected_error,
    load_curve_csv,
)
from src.simlab.sweep import simulate_episodes, sweep

MEASURED_RATES = [5, 10, 15]
MEASURED_QA = [31.3, 21.0, 18.1]
MEASURED_SEL = [76.8, 71.0, 52.1]


class TestDecomposition:
    """Test cases for the closed-form decomposition."""

    @pytest.mark.unit
    def test_expected_error(self):
        """p*err_hit + (1-p)*err_miss."""
        assert expected_error(PolicySpec(0.5, 0.1, 0.6)) == pytest.approx(0.35)

    @pytest.mark.unit
    @pytest.mark.parametrize("p,err_hit,err_miss,d_no", [(0.5, 0.1, 0.6, 0.4), (0.9, 0.2, 0.95, 0.7),
                                                         (0.0, 0.0, 1.0, 0.3), (1.0, 0.3, 0.3, 0.3)])
    def test_benefit_identity(self, p, err_hit, err_miss, d_no):
        """Benefit equals d_no minus expected error."""
        policy = PolicySpec(p, err_hit, err_miss)
        assert benefit(policy, d_no) == pytest.approx(d_no - expected_error(policy))

    @pytest.mark.unit
    def test_perfect_selection_gain(self):
        """With p_hit = 1 the gain is d_no - err_hit."""
        assert benefit(PolicySpec(1.0, 0.25, 0.9), 0.79) == pytest.approx(0.54)

    @pytest.mark.unit
    @pytest.mark.parametrize("args", [(1.2, 0.1, 0.1), (0.5, -0.1, 0.1), (0.5, 0.1, 2.0)])
    def test_invalid_probabilities(self, args):
        with pytest.raises(SimlabError):
            PolicySpec(*args)

    @pytest.mark.unit
    def test_invalid_d_no(self):
        with pytest.raises(SimlabError):
            benefit(PolicySpec(0.5, 0.1, 0.2), 1.5)

    @pytest.mark.unit
    def test_identity_over_random_policies(self):
        """d_no - expected_error equals benefit for many random valid tuples."""
        rng = np.random.default_rng(0)
        for p, err_hit, err_miss, d_no in rng.random((10_000, 4)):
            policy = PolicySpec(float(p), float(err_hit), float(err_miss))
            assert abs(float(d_no) - expected_error(policy) - benefit(policy, float(d_no))) <= 1e-12


class TestRegimeCurve:
    """Test cases for regime curves."""

    @pytest.mark.unit
    def test_from_measured_points(self):
        """Accuracies in percent convert to error and hit probabilities."""
        curve = RegimeCurve.from_measured_points(MEASURED_RATES, MEASURED_QA, MEASURED_SEL)
        assert curve.d_no == (0.687, 0.79, 0.819)
        assert curve.p_hit == (0.768, 0.71, 0.521)

    @pytest.mark.unit
    @pytest.mark.parametrize("rates,d_no,p_hit", [
        ([5, 10], [0.5], [0.5, 0.5]),
        ([], [], []),
        ([10, 5], [0.5, 0.5], [0.5, 0.5]),
        ([5, 5], [0.5, 0.5], [0.5, 0.5]),
        ([5], [1.5], [0.5]),
    ])
    def test_invalid_curves(self, rates, d_no, p_hit):
        with pytest.raises(SimlabError):
            RegimeCurve.from_arrays(rates, d_no, p_hit)

    @pytest.mark.unit
    def test_load_curve_csv(self, temp_dir):
        path = temp_dir / "curve.csv"
        path.write_text("rho,d_no,p_hit\n5,0.687,0.768\n10,0.79,0.71\n")
        curve = load_curve_csv(path)
        assert curve.rates == (5.0, 10.0)
        assert curve.p_hit == (0.768, 0.71)

    @pytest.mark.unit
    def test_load_curve_csv_errors(self, temp_dir):
        missing = temp_dir / "missing.csv"
        missing.write_text("rho,d_no\n5,0.5\n")
        with pytest.raises(SimlabError):
            load_curve_csv(missing)

        holes = temp_dir / "holes.csv"
        holes.write_text("rho,d_no,p_hit\n5,,0.5\n")
        with pytest.raises(SimlabError):
            load_curve_csv(holes)


class TestSweep:
    """Test cases for benefit sweeps."""

    @pytest.mark.unit
    def test_measured_points_all_positive(self):
        """Expansion helps at every measured rate; crossover is the first rate."""
        curve = RegimeCurve.from_measured_points(MEASURED_RATES, MEASURED_QA, MEASURED_SEL)
        result = sweep(curve, err_hit=0.25, err_miss=0.9)
        assert list(result.table.columns) == ["rho", "d_no", "p_hit", "expected_error", "benefit"]
        assert (result.table["benefit"] > 0).all()
        assert result.table["benefit"].tolist() == pytest.approx([0.2862, 0.3515, 0.25765])
        assert result.crossover_rate == 5

    @pytest.mark.unit
    def test_crossover_after_negative(self):
        """The crossover is the first positive rate after a non-positive one."""
        curve = RegimeCurve.from_arrays([1, 2, 3], [0.1, 0.3, 0.6], [0.9, 0.9, 0.9])
        result = sweep(curve, err_hit=0.2, err_miss=0.9)
        assert result.table["benefit"].tolist() == pytest.approx([-0.17, 0.03, 0.33])
        assert result.crossover_rate == 2

    @pytest.mark.unit
    def test_no_crossover(self):
        curve = RegimeCurve.from_arrays([1, 2], [0.1, 0.1], [0.5, 0.5])
        assert sweep(curve, err_hit=0.2, err_miss=0.9).crossover_rate is None


class TestSimulation:
    """Test cases for Monte-Carlo simulation."""

    @pytest.mark.unit
    def test_converges_to_closed_form(self):
        """The empirical benefit approaches the analytic one."""
        policy = PolicySpec(0.71, 0.25, 0.9)
        result = simulate_episodes(policy, d_no=0.79, trials=200_000, seed=3)
        assert result.trials == 200_000
        assert result.hit_rate == pytest.approx(0.71, abs=0.01)
        assert result.empirical_benefit == pytest.approx(benefit(policy, 0.79), abs=0.01)

    @pytest.mark.unit
    def test_independent_of_parallelism(self):
        """Chunked seeding makes results identical for any worker count."""
        policy = PolicySpec(0.5, 0.1, 0.6)
        serial = simulate_episodes(policy, d_no=0.4, trials=600_001, seed=7, parallelism=1)
        threaded = simulate_episodes(policy, d_no=0.4, trials=600_001, seed=7, parallelism=3)
        assert serial == threaded

    @pytest.mark.unit
    def test_invalid_arguments(self):
        with pytest.raises(SimlabError):
            simulate_episodes(PolicySpec(0.5, 0.1, 0.6), d_no=0.4, trials=0)
        with pytest.raises(SimlabError):
            simulate_episodes(PolicySpec(0.5, 0.1, 0.6), d_no=-0.1, trials=10)

    @pytest.mark.unit
    @pytest.mark.slow
    def test_million_trials_within_three_sigma(self):
        """Both error rates land within three binomial standard deviations."""
        policy = PolicySpec(0.768, 0.25, 0.9)
        d_no = 0.687
        trials = 1_000_000
        result = simulate_episodes(policy, d_no=d_no, trials=trials, seed=11, parallelism=4)

        expected_with = expected_error(policy)
        assert abs(result.no_tool_error - d_no) <= 3 * np.sqrt(d_no * (1 - d_no) / trials)
        assert abs(result.with_tool_error - expected_with) <= 3 * np.sqrt(expected_with * (1 - expected_with) / trials)
