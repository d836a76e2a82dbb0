from dataclasses import replace
from typing import Optional
import logging
import math

from exceptions import ModelError, TransLimError, UnsupportedPolicyForAnalyticError
from models.domain_models import BalanceQuery, EulerConfig, ModelParams, PolicyKind
from services.inversion_service import EulerInversionService
from services.transform_service import TransformService

# Get loggers
app_logger = logging.getLogger('app')
error_logger = logging.getLogger('error')

# Limits further than this many standard deviations of A(T) from the origin
# get EULER terms in proportion to the distance
STD_DEVS_PER_TERM_BLOCK = 6.0


class BalanceModelService:
    """Real-domain model quantities obtained by inverting the closed-form transforms."""

    def __init__(self, inverter: Optional[EulerInversionService] = None,
                 transforms: Optional[TransformService] = None):
        self.inverter = inverter or EulerInversionService()
        self.transforms = transforms or TransformService()
        app_logger.info("BalanceModelService initialized")

    def euler_config(self, q: BalanceQuery) -> EulerConfig:
        """Inverter settings for one query.

        The spend distribution has width sd(A(T)); resolving it at a limit l
        takes a number of terms growing with l / sd(A(T)).
        """
        base = self.inverter.config
        spread = self.transforms.spend_std_dev(q.params, q.horizon)
        blocks = q.limit / (STD_DEVS_PER_TERM_BLOCK * spread) if spread > 0 else 0.0
        if blocks <= 1.0:
            return base
        return replace(base, n_terms=int(math.ceil(base.n_terms * blocks)))

    def _invert(self, transform, q: BalanceQuery) -> float:
        try:
            return self.inverter.invert(transform, q.limit, self.euler_config(q))
        except TransLimError:
            raise
        except Exception as e:
            error_msg = f"Failed to invert {transform.name} at limit {q.limit}: {str(e)}"
            error_logger.error(error_msg, exc_info=True)
            raise ModelError(error_msg)

    def expected_balance(self, q: BalanceQuery) -> float:
        """E[B_l(T)] under the freeze policy, clipped to [0, l]."""
        if q.limit == 0:
            return 0.0
        value = self._invert(self.transforms.expectation_transform(q.params, q.horizon), q)
        return min(max(value, 0.0), q.limit)

    def balance_derivative(self, q: BalanceQuery) -> float:
        """dE[B_l(T)]/dl from its own transform, clipped to [0, 1]."""
        if q.limit == 0:
            raise ModelError("balance_derivative needs a positive limit")
        value = self._invert(self.transforms.derivative_transform(q.params, q.horizon), q)
        return min(max(value, 0.0), 1.0)

    def decline_probability(self, q: BalanceQuery) -> float:
        """P(A(T) > l), the chance an attempted purchase is declined in the period."""
        if q.limit == 0:
            lam = self.transforms.poisson_rate(q.params)
            return -math.expm1(-lam * q.horizon)
        params = q.params
        if q.horizon != params.horizon:
            params = _with_horizon(params, q.horizon)
        value = self._invert(self.transforms.aggregate_tail(params), q)
        return min(max(value, 0.0), 1.0)

    def expected_min(self, q: BalanceQuery) -> float:
        """E[min(A(T), l)], the newsvendor expected balance."""
        if q.limit == 0:
            return 0.0
        params = q.params
        if q.horizon != params.horizon:
            params = _with_horizon(params, q.horizon)
        value = self._invert(self.transforms.min_expectation(params), q)
        return min(max(value, 0.0), q.limit)

    def expected_profit(self, q: BalanceQuery, policy: PolicyKind = PolicyKind.FREEZE) -> float:
        """gamma * E[balance] - nu * l for the freeze or newsvendor-truncation policy."""
        if policy is PolicyKind.RETRIAL:
            error_msg = "The retrial policy has no closed-form balance; use the simulator"
            error_logger.error(error_msg)
            raise UnsupportedPolicyForAnalyticError(error_msg)
        if policy is PolicyKind.FREEZE:
            balance = self.expected_balance(q)
        else:
            balance = self.expected_min(q)
        return q.params.gamma_interchange * balance - q.params.nu_funding * q.limit


def _with_horizon(params: ModelParams, horizon: float) -> ModelParams:
    return replace(params, period_days=horizon, interest_free_days=0.0)
