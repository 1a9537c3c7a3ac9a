import math

import numpy as np
import pytest

from relaxplay import (
    AdmissibilityScenario,
    CheckReport,
    DecompositionScenario,
    DiscrepancyScenario,
    FeatureDistribution,
    FiniteClass,
    ThresholdClass,
    check_admissibility,
    check_decomposition,
    check_fact2,
    check_sensitivity,
    default_binary_generator,
    default_sensitivity_generator,
    discrepancy_probe,
    estimate_rademacher,
    standard_checks,
)


class TestCheckReport:
    def test_line_rendering(self):
        assert "PASS" in CheckReport("x", 3, True, -0.1).line()
        assert "FAIL" in CheckReport("x", 3, False, 0.1).line()
        assert "REPORT" in CheckReport("x", 3, None, 0.0).line()


class TestRademacher:
    def test_two_round_binary_exact(self):
        # constants {0,1}: sup_h (eps1 + eps2) h = max(0, eps1 + eps2);
        # exhaustive mean over the 4 sign patterns = (2 + 0 + 0 + 0)/4 = 0.5
        cls = FiniteClass.from_constants([0.0, 1.0])
        mean, se = estimate_rademacher(
            cls, [0.3, 0.7], 0, np.random.default_rng(0), exhaustive=True
        )
        assert mean == pytest.approx(0.5)
        assert se == 0.0

    def test_singleton_is_zero(self):
        cls = FiniteClass.from_constants([0.5])
        mean, se = estimate_rademacher(
            cls, [0.1, 0.9], 0, np.random.default_rng(0), exhaustive=True
        )
        # sup over a single h: E[ (eps1 + eps2) * 0.5 ] = 0
        assert mean == pytest.approx(0.0)

    def test_mc_consistent_with_exhaustive(self):
        cls = ThresholdClass()
        feats = [0.2, 0.4, 0.6, 0.8]
        exact, _ = estimate_rademacher(cls, feats, 0, np.random.default_rng(1), exhaustive=True)
        mc, se = estimate_rademacher(cls, feats, 800, np.random.default_rng(2))
        assert abs(mc - exact) <= 3 * se + 1e-9


class TestAdmissibility:
    def _scenario(self, **kw):
        return AdmissibilityScenario(
            cls=FiniteClass.from_constants([0.0, 1.0]),
            env=FeatureDistribution.discrete([0.2, 0.8], [0.5, 0.5]),
            horizon=2,
            pool_features=[0.2, 0.8],
            histories=((), ((0.2, 1.0),)),
            **kw,
        )

    def test_passes_on_clean_fixture(self):
        rep = check_admissibility(self._scenario(), 300, np.random.default_rng(0))
        assert rep.passed is True
        assert rep.instances == 2

    def test_corrupted_prediction_fails(self):
        rep = check_admissibility(
            self._scenario(predict_offset=0.45), 1200, np.random.default_rng(0)
        )
        assert rep.passed is False
        assert rep.worst_margin > 0


class TestSensitivity:
    def test_default_generator_passes(self):
        rep = check_sensitivity(
            default_sensitivity_generator(), 40, np.random.default_rng(3)
        )
        assert rep.passed is True
        assert rep.instances == 40


class TestFact2:
    def test_default_generator_passes(self):
        rep = check_fact2(default_binary_generator(), 100, np.random.default_rng(4))
        assert rep.passed is True
        assert rep.worst_margin <= 1e-9


class TestDecomposition:
    def _scenario(self, **kw):
        return DecompositionScenario(
            cls=FiniteClass.from_constants([0.0, 1.0]),
            env=FeatureDistribution.discrete([0.3, 0.7], [0.5, 0.5]),
            horizon=3,
            pool_features=[0.3, 0.7, 0.5],
            inner_mc=16,
            **kw,
        )

    def test_passes_on_clean_fixture(self):
        rep = check_decomposition(self._scenario(), 60, np.random.default_rng(5))
        assert rep.passed is True

    def test_negated_initial_term_fails(self):
        rep = check_decomposition(
            self._scenario(rtilde_scale=-1.0), 60, np.random.default_rng(5)
        )
        assert rep.passed is False


class TestDiscrepancy:
    def test_report_only(self):
        rep = discrepancy_probe(
            DiscrepancyScenario(
                cls=ThresholdClass(),
                env=FeatureDistribution.uniform(),
                horizon=3,
                pool_features=[0.2, 0.4, 0.6, 0.8],
            ),
            40,
            np.random.default_rng(6),
        )
        assert rep.passed is None
        assert "rows" in rep.details


class TestStandardChecks:
    def test_battery_runs_and_passes(self):
        reports = standard_checks(seed=0, mc_samples=48)
        assert len(reports) >= 4
        for rep in reports:
            assert rep.passed in (True, None)
