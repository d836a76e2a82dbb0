import math
import unittest
from unittest.mock import Mock

from exceptions import (
    ModelError,
    NonMonotoneDerivativeError,
    RatioUnattainableError,
    RootNotBracketedError,
)
from models.domain_models import DistributionRole, DistributionSpec, ModelParams
from services.optimizer_service import LimitOptimizerService
from services.report_service import TABLE_ARRIVAL_RATES, TABLE_MEAN_MARKS, ReportService


def calibrated_params():
    return ModelParams(
        gamma_interchange=0.0054,
        nu_funding=0.0007,
        period_days=30.0,
        mark_dist=DistributionSpec.gamma(2.8946, 0.0769),
        arrival_dist=DistributionSpec.exponential(0.6451, DistributionRole.INTER_ARRIVAL),
    )


class TestFreezeOptimum(unittest.TestCase):
    def setUp(self):
        self.optimizer = LimitOptimizerService()

    def test_table_one_corner(self):
        result = self.optimizer.optimal_limit_freeze(ReportService.cell_params(1.0, 20.0))
        self.assertAlmostEqual(result.limit_star, 798.2180, delta=0.01)
        self.assertTrue(result.root_bracketed)
        self.assertFalse(result.fallback_used)
        self.assertEqual(result.method, "bisection")
        self.assertLess(result.residual, 1e-5)

    def test_table_one_interior_cell(self):
        result = self.optimizer.optimal_limit_freeze(ReportService.cell_params(3.0, 60.0))
        self.assertAlmostEqual(result.limit_star, 6377.5726193557, delta=0.10)

    def test_calibrated_customer(self):
        result = self.optimizer.optimal_limit_freeze(calibrated_params())
        self.assertAlmostEqual(result.limit_star, 973.81, delta=1.0)
        self.assertGreater(result.profit_at_star, 0.0)

    def test_degenerate_economics_report_lower_bound(self):
        params = ModelParams(0.0054, 0.006, 30.0, DistributionSpec.exponential(0.05),
                             DistributionSpec.exponential(1.0, DistributionRole.INTER_ARRIVAL))
        result = self.optimizer.optimal_limit_freeze(params)
        self.assertEqual(result.limit_star, 0.0)
        self.assertFalse(result.root_bracketed)
        self.assertTrue(result.at_boundary)

    def test_no_down_crossing_gives_boundary_optimum(self):
        params = ReportService.cell_params(1.0, 20.0).with_limit_set(0.0, 100.0)
        result = self.optimizer.optimal_limit_freeze(params)
        self.assertEqual(result.limit_star, 100.0)
        self.assertFalse(result.root_bracketed)
        with self.assertRaises(RootNotBracketedError):
            self.optimizer.optimal_limit_freeze(params, strict=True)


class TestFallbackSearch(unittest.TestCase):
    def setUp(self):
        self.params = ReportService.cell_params(1.0, 20.0).with_limit_set(0.0, 100.0)
        ratio = self.params.funding_ratio
        self.balance = Mock()
        # derivative that wiggles around the target several times
        self.balance.balance_derivative.side_effect = lambda q: ratio + 0.1 * math.sin(q.limit / 5.0)
        self.balance.expected_profit.side_effect = lambda q, policy=None: -(q.limit - 47.0) ** 2
        self.balance.decline_probability.return_value = 0.1
        self.optimizer = LimitOptimizerService(self.balance)

    def test_golden_section_fallback(self):
        result = self.optimizer.optimal_limit_freeze(self.params)
        self.assertTrue(result.fallback_used)
        self.assertEqual(result.method, "golden_section")
        self.assertAlmostEqual(result.limit_star, 47.0, places=3)

    def test_strict_mode_raises(self):
        with self.assertRaises(NonMonotoneDerivativeError):
            self.optimizer.optimal_limit_freeze(self.params, strict=True)


class TestNoisyDerivativeTail(unittest.TestCase):
    def setUp(self):
        self.params = ReportService.cell_params(1.0, 20.0).with_limit_set(0.0, 1000.0)
        self.balance = Mock()
        self.balance.balance_derivative.side_effect = lambda q: self.derivative(q.limit)
        self.balance.expected_profit.side_effect = lambda q, policy=None: -(q.limit - 82.0) ** 2
        self.balance.decline_probability.return_value = 0.1
        self.optimizer = LimitOptimizerService(self.balance)

    @staticmethod
    def derivative(limit):
        x = limit / 20.0
        clean = x * math.exp(1.0 - x)
        # inversion noise around zero far right of the peak
        return clean + 7e-6 * math.sin(limit) if clean < 1e-6 else clean

    def test_noise_below_floor_keeps_bisection(self):
        result = self.optimizer.optimal_limit_freeze(self.params)
        self.assertEqual(result.method, "bisection")
        self.assertFalse(result.fallback_used)
        self.assertAlmostEqual(self.derivative(result.limit_star), self.params.funding_ratio, delta=1e-6)

    def test_strict_mode_accepts_noise_below_floor(self):
        result = self.optimizer.optimal_limit_freeze(self.params, strict=True)
        self.assertEqual(result.method, "bisection")


class TestNewsvendorAndBounds(unittest.TestCase):
    def setUp(self):
        self.optimizer = LimitOptimizerService()

    def test_table_three_corner(self):
        result = self.optimizer.newsvendor_limit(ReportService.cell_params(1.0, 20.0))
        self.assertAlmostEqual(result.limit_star, 776.78, delta=0.05)
        self.assertAlmostEqual(result.decline_prob_at_star, 0.0007 / 0.0054, delta=1e-6)

    def test_ratio_unattainable(self):
        params = ModelParams(0.0054, 0.0007, 30.0, DistributionSpec.exponential(0.05),
                             DistributionSpec.exponential(0.001, DistributionRole.INTER_ARRIVAL))
        with self.assertRaises(RatioUnattainableError):
            self.optimizer.newsvendor_limit(params)

    def test_calibrated_bounds(self):
        bounds = self.optimizer.retrial_bounds(calibrated_params())
        self.assertAlmostEqual(bounds.lower, 947.83, delta=1.0)
        self.assertAlmostEqual(bounds.upper, 973.81, delta=1.0)
        self.assertGreater(bounds.gap, 0.0)

    def test_bounds_ordered_on_table_cell(self):
        bounds = self.optimizer.retrial_bounds(ReportService.cell_params(2.0, 40.0))
        self.assertLess(bounds.lower, bounds.upper)


class TestEvaluateAndRevise(unittest.TestCase):
    def setUp(self):
        self.optimizer = LimitOptimizerService()
        self.params = calibrated_params()

    def test_revised_limit_rounds_to_best_multiple(self):
        self.assertEqual(self.optimizer.revised_limit(self.params, 973.81), 1000.0)
        self.assertEqual(self.optimizer.revised_limit(self.params, 1500.0), 1500.0)

    def test_evaluate_revised_limit(self):
        report = self.optimizer.evaluate_limit(self.params, 1000.0)
        self.assertAlmostEqual(report.decline_probability, 0.0857, delta=2e-3)
        self.assertLessEqual(report.expected_balance, report.expected_min)
        self.assertAlmostEqual(report.expected_profit, 0.0054 * report.expected_balance - 0.7, places=10)

    def test_optimum_beats_original_limit(self):
        optimal = self.optimizer.optimal_limit_freeze(self.params)
        original = self.optimizer.evaluate_limit(self.params, 5000.0)
        self.assertGreater(optimal.profit_at_star, original.expected_profit)

    def test_evaluate_needs_positive_limit(self):
        with self.assertRaises(ModelError):
            self.optimizer.evaluate_limit(self.params, 0.0)

class TestFreezeOptimumOverTableGrid(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.optimizer = LimitOptimizerService()
        cls.cells = {}
        for lam in TABLE_ARRIVAL_RATES:
            for mean_mark in TABLE_MEAN_MARKS:
                params = ReportService.cell_params(lam, mean_mark)
                cls.cells[(lam, mean_mark)] = (params,
                                               cls.optimizer.optimal_limit_freeze(params),
                                               cls.optimizer.newsvendor_limit(params))

    def test_every_cell_is_solved_by_bisection(self):
        for key, (_, freeze, _) in self.cells.items():
            with self.subTest(cell=key):
                self.assertEqual(freeze.method, "bisection")
                self.assertFalse(freeze.fallback_used)
                self.assertTrue(freeze.root_bracketed)
                self.assertFalse(freeze.at_boundary)

    def test_first_order_condition_residual(self):
        for key, (_, freeze, _) in self.cells.items():
            with self.subTest(cell=key):
                self.assertLessEqual(freeze.residual, 1e-8)

    def test_strict_mode_accepts_clean_cells(self):
        for key in ((2.0, 20.0), (5.0, 100.0)):
            params = self.cells[key][0]
            result = self.optimizer.optimal_limit_freeze(params, strict=True)
            self.assertEqual(result.limit_star, self.cells[key][1].limit_star)

    def test_newsvendor_limit_lies_below_freeze_limit(self):
        for key, (_, freeze, newsvendor) in self.cells.items():
            with self.subTest(cell=key):
                self.assertLess(newsvendor.limit_star, freeze.limit_star)

    def test_optimum_beats_fifty_dollars_either_side(self):
        for key, (params, freeze, _) in self.cells.items():
            with self.subTest(cell=key):
                for step in (-50.0, 50.0):
                    nearby = self.optimizer.evaluate_limit(params, freeze.limit_star + step)
                    self.assertGreaterEqual(freeze.profit_at_star, nearby.expected_profit)

    def test_newsvendor_hits_critical_ratio(self):
        for key, (params, _, newsvendor) in self.cells.items():
            with self.subTest(cell=key):
                self.assertAlmostEqual(newsvendor.decline_prob_at_star, 1.0 - params.critical_ratio, delta=1e-8)


class TestScalingPurchaseSizes(unittest.TestCase):
    """Scaling every purchase by alpha scales both optimal limits by alpha."""

    ALPHAS = (0.5, 2.0, 10.0)

    @classmethod
    def setUpClass(cls):
        cls.optimizer = LimitOptimizerService()
        cls.bases = [
            ReportService.cell_params(1.0, 20.0),
            ReportService.cell_params(3.0, 60.0),
            ReportService.cell_params(5.0, 100.0),
            calibrated_params(),
            ModelParams(0.0054, 0.0007, 30.0, DistributionSpec.gamma(2.0, 0.04),
                        DistributionSpec.exponential(2.0, DistributionRole.INTER_ARRIVAL),
                        interest_free_days=25.0, limit_set_hi=20000.0),
        ]

    def test_freeze_limit_scales(self):
        for i, base in enumerate(self.bases):
            reference = self.optimizer.optimal_limit_freeze(base)
            for alpha in self.ALPHAS:
                with self.subTest(base=i, alpha=alpha):
                    scaled = self.optimizer.optimal_limit_freeze(base.scaled(alpha))
                    self.assertLessEqual(abs(scaled.limit_star / (alpha * reference.limit_star) - 1.0), 1e-6)
                    self.assertAlmostEqual(scaled.decline_prob_at_star, reference.decline_prob_at_star,
                                           delta=1e-8)

    def test_newsvendor_limit_scales(self):
        for i, base in enumerate(self.bases):
            reference = self.optimizer.newsvendor_limit(base)
            for alpha in self.ALPHAS:
                with self.subTest(base=i, alpha=alpha):
                    scaled = self.optimizer.newsvendor_limit(base.scaled(alpha))
                    self.assertLessEqual(abs(scaled.limit_star / (alpha * reference.limit_star) - 1.0), 1e-6)
                    self.assertAlmostEqual(scaled.decline_prob_at_star, reference.decline_prob_at_star,
                                           delta=1e-8)


if __name__ == '__main__':
    unittest.main()
