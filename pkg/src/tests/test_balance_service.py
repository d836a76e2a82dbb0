import math
import unittest
from unittest.mock import Mock

from exceptions import ModelError, UnsupportedPolicyForAnalyticError
from models.domain_models import (
    BalanceQuery,
    DistributionRole,
    DistributionSpec,
    EulerConfig,
    ModelParams,
    PolicyKind,
)
from services.balance_service import BalanceModelService
from services.inversion_service import EulerInversionService

TABLE_ONE_OPTIMUM = 798.2180


def table_params(arrival_rate=1.0, mean_mark=20.0):
    return ModelParams(
        gamma_interchange=0.0054,
        nu_funding=0.0007,
        period_days=30.0,
        mark_dist=DistributionSpec.exponential(1.0 / mean_mark),
        arrival_dist=DistributionSpec.exponential(arrival_rate, DistributionRole.INTER_ARRIVAL),
        limit_set_hi=6000.0,
    )


class TestBalanceModelService(unittest.TestCase):
    def setUp(self):
        self.service = BalanceModelService()
        self.params = table_params()

    def test_limit_that_never_binds(self):
        balance = self.service.expected_balance(BalanceQuery(self.params, 5000.0))
        self.assertAlmostEqual(balance, 600.0, delta=0.01)

    def test_first_order_condition_at_table_optimum(self):
        derivative = self.service.balance_derivative(BalanceQuery(self.params, TABLE_ONE_OPTIMUM))
        self.assertAlmostEqual(derivative, self.params.funding_ratio, delta=1e-4)

    def test_decline_probability_at_table_optimum(self):
        p = self.service.decline_probability(BalanceQuery(self.params, TABLE_ONE_OPTIMUM))
        self.assertAlmostEqual(p, 0.1059, delta=5e-4)

    def test_zero_limit(self):
        q = BalanceQuery(self.params, 0.0)
        self.assertEqual(self.service.expected_balance(q), 0.0)
        self.assertEqual(self.service.expected_min(q), 0.0)
        self.assertEqual(self.service.expected_profit(q), 0.0)
        self.assertAlmostEqual(self.service.decline_probability(q), 1 - math.exp(-30.0), places=12)
        with self.assertRaises(ModelError):
            self.service.balance_derivative(q)

    def test_balances_are_bounded_and_ordered(self):
        for limit in (100.0, 600.0, 1200.0):
            q = BalanceQuery(self.params, limit)
            freeze = self.service.expected_balance(q)
            truncation = self.service.expected_min(q)
            self.assertGreaterEqual(freeze, 0.0)
            self.assertLessEqual(freeze, truncation + 1e-4)
            self.assertLessEqual(truncation, limit)

    def test_profit_uses_policy_balance(self):
        q = BalanceQuery(self.params, 600.0)
        freeze = self.service.expected_profit(q, PolicyKind.FREEZE)
        truncation = self.service.expected_profit(q, PolicyKind.NEWSVENDOR_TRUNCATION)
        self.assertAlmostEqual(freeze, 0.0054 * self.service.expected_balance(q) - 0.0007 * 600.0, places=12)
        self.assertGreaterEqual(truncation, freeze)

    def test_retrial_has_no_closed_form(self):
        with self.assertRaises(UnsupportedPolicyForAnalyticError):
            self.service.expected_profit(BalanceQuery(self.params, 600.0), PolicyKind.RETRIAL)

    def test_scaling_marks_and_limit(self):
        q = BalanceQuery(self.params, 700.0)
        q_scaled = BalanceQuery(self.params.scaled(2.0), 1400.0)
        self.assertAlmostEqual(self.service.expected_balance(q_scaled) / self.service.expected_balance(q),
                               2.0, places=8)
        self.assertAlmostEqual(self.service.decline_probability(q_scaled),
                               self.service.decline_probability(q), places=9)

    def test_longer_query_horizon_raises_decline_probability(self):
        base = self.service.decline_probability(BalanceQuery(self.params, 700.0))
        longer = self.service.decline_probability(BalanceQuery(self.params, 700.0, horizon=45.0))
        self.assertGreater(longer, base)

    def test_unexpected_inversion_failure_is_wrapped(self):
        inverter = Mock()
        inverter.invert.side_effect = ZeroDivisionError("boom")
        service = BalanceModelService(inverter)
        with self.assertRaises(ModelError):
            service.expected_balance(BalanceQuery(self.params, 600.0))

class TestInversionSettings(unittest.TestCase):
    def setUp(self):
        self.params = table_params(5.0, 100.0)
        self.spend = self.params.expected_spend

    def services(self, n_terms):
        return BalanceModelService(EulerInversionService(EulerConfig(n_terms=n_terms)))

    def test_terms_grow_with_distance_from_origin(self):
        service = BalanceModelService()
        near = service.euler_config(BalanceQuery(table_params(), TABLE_ONE_OPTIMUM))
        far = service.euler_config(BalanceQuery(self.params, 10 * self.spend))
        self.assertEqual(near.n_terms, 15)
        self.assertGreater(far.n_terms, 100)
        self.assertEqual(far.a, near.a)

    def test_terms_do_not_depend_on_purchase_scale(self):
        service = BalanceModelService()
        base = service.euler_config(BalanceQuery(self.params, 3 * self.spend))
        scaled = service.euler_config(BalanceQuery(self.params.scaled(0.2), 0.6 * self.spend))
        self.assertEqual(base.n_terms, scaled.n_terms)

    def test_doubling_terms_leaves_results_unchanged(self):
        single, double = self.services(15), self.services(30)
        for fraction in (0.05, 0.25, 0.5, 0.8, 1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 3.2143, 5.0, 10.0):
            q = BalanceQuery(self.params, fraction * self.spend)
            with self.subTest(limit=q.limit):
                b1, b2 = single.expected_balance(q), double.expected_balance(q)
                self.assertLessEqual(abs(b1 - b2), 1e-7 * max(1.0, b2))
                self.assertAlmostEqual(single.decline_probability(q), double.decline_probability(q), delta=1e-7)
                self.assertAlmostEqual(single.balance_derivative(q), double.balance_derivative(q), delta=1e-7)


if __name__ == '__main__':
    unittest.main()
