from typing import List, Optional, Tuple
import logging
import math

import numpy as np
from scipy import optimize

from exceptions import (
    ModelError,
    NonMonotoneDerivativeError,
    RatioUnattainableError,
    RootNotBracketedError,
)
from models.domain_models import (
    BalanceQuery,
    BoundsResult,
    LimitReport,
    ModelParams,
    OptimizationResult,
    PolicyKind,
)
from services.balance_service import BalanceModelService

# Get loggers
app_logger = logging.getLogger('app')
error_logger = logging.getLogger('error')

# Scan points closer than this to zero are moved off the origin
ORIGIN_OFFSET = 1e-9
# Rise allowed between neighbouring scan points past the derivative peak
MONOTONE_SLACK = 1e-6
# Derivative values below this fraction of nu/gamma are inversion noise around zero
NOISE_FLOOR_FRACTION = 1e-4


class LimitOptimizerService:
    """Optimal limits under the freeze policy and the newsvendor model.

    The freeze-policy derivative dE[B_l(T)]/dl starts at 0, climbs to
    about 1 and decays to 0, so the first-order condition
    dE[B_l(T)]/dl = nu/gamma is solved on its single down-crossing.
    """

    def __init__(self, balance_service: Optional[BalanceModelService] = None,
                 scan_points: int = 32, xtol: float = 1e-6, max_iter: int = 200):
        self.balance = balance_service or BalanceModelService()
        self.scan_points = scan_points
        self.xtol = xtol
        self.max_iter = max_iter
        app_logger.info("LimitOptimizerService initialized")

    # -- helpers ---------------------------------------------------------

    def _derivative(self, params: ModelParams, limit: float) -> float:
        return self.balance.balance_derivative(BalanceQuery(params, limit))

    def _profit(self, params: ModelParams, limit: float,
                policy: PolicyKind = PolicyKind.FREEZE) -> float:
        return self.balance.expected_profit(BalanceQuery(params, limit), policy)

    def _scan_grid(self, params: ModelParams) -> np.ndarray:
        grid = np.linspace(params.limit_set_lo, params.limit_set_hi, self.scan_points)
        if grid[0] <= 0:
            grid[0] = params.limit_set_hi * ORIGIN_OFFSET
        return grid

    def _result(self, params: ModelParams, limit: float, iterations: int, residual: float,
                method: str, policy: PolicyKind = PolicyKind.FREEZE, **flags) -> OptimizationResult:
        q = BalanceQuery(params, limit)
        return OptimizationResult(
            limit_star=limit,
            profit_at_star=self.balance.expected_profit(q, policy),
            decline_prob_at_star=self.balance.decline_probability(q),
            iterations=iterations,
            residual=residual,
            method=method,
            **flags,
        )

    def _bisect(self, f, a: float, b: float) -> Tuple[float, int]:
        fa = f(a)
        if fa == 0:
            return a, 0
        root, info = optimize.bisect(f, a, b, xtol=self.xtol, maxiter=self.max_iter,
                                     full_output=True, disp=False)
        if not info.converged:
            app_logger.warning(f"Bisection stopped after {info.iterations} iterations without converging")
        return root, info.iterations

    def _best_boundary(self, params: ModelParams, candidates: List[float]) -> float:
        return max(candidates, key=lambda limit: self._profit(params, limit))

    @staticmethod
    def _decreasing_past_peak(derivs: np.ndarray, peak: int, ratio: float) -> bool:
        # values under the floor are read as the floor, so noise around zero never counts as a rise
        tail = np.maximum(derivs[peak:], NOISE_FLOOR_FRACTION * ratio)
        return bool(np.all(np.diff(tail) <= MONOTONE_SLACK))

    # -- freeze policy ---------------------------------------------------

    def optimal_limit_freeze(self, params: ModelParams, strict: bool = False) -> OptimizationResult:
        """Profit-maximising limit when the first declined purchase freezes the card.

        With ``strict`` the unbracketed and non-monotone cases raise instead of
        falling back to a boundary optimum or a golden-section search.
        """
        ratio = params.funding_ratio
        lo, hi = params.limit_set_lo, params.limit_set_hi
        app_logger.info(f"Solving freeze-policy optimum on ({lo}, {hi}] with nu/gamma={ratio:.8f}")

        if params.is_degenerate:
            app_logger.warning("nu >= gamma: expected profit decreases in the limit, reporting the lower bound")
            return self._result(params, lo, 0, math.nan, "boundary",
                                root_bracketed=False, at_boundary=True)

        grid = self._scan_grid(params)
        derivs = np.array([self._derivative(params, x) for x in grid])
        excess = derivs - ratio
        crossings = [i for i in range(len(grid) - 1) if excess[i] >= 0 > excess[i + 1]]
        peak = int(np.argmax(derivs))
        monotone = self._decreasing_past_peak(derivs, peak, ratio)
        app_logger.debug(f"Derivative scan peak {derivs[peak]:.6f} at {grid[peak]:.4f}, crossings {crossings}")

        if not crossings:
            error_msg = (f"First-order condition has no down-crossing in ({lo}, {hi}]; "
                         f"derivative range [{derivs.min():.6g}, {derivs.max():.6g}]")
            if strict:
                error_logger.error(error_msg)
                raise RootNotBracketedError(error_msg)
            app_logger.warning(f"RootNotBracketed: {error_msg}; reporting boundary optimum")
            limit = self._best_boundary(params, [lo, hi])
            return self._result(params, limit, 0, abs(self._derivative_or_nan(params, limit) - ratio),
                                "boundary", root_bracketed=False, at_boundary=True)

        if len(crossings) > 1 or not monotone:
            error_msg = f"Balance derivative is not decreasing past its peak (crossings at {crossings})"
            if strict:
                error_logger.error(error_msg)
                raise NonMonotoneDerivativeError(error_msg)
            app_logger.warning(f"NonMonotoneDerivative: {error_msg}; using golden-section search")
            return self._golden_fallback(params, grid)

        i = crossings[0]
        root, iterations = self._bisect(lambda x: self._derivative(params, x) - ratio, grid[i], grid[i + 1])
        residual = abs(self._derivative(params, root) - ratio)

        interior_profit = self._profit(params, root)
        boundary = self._best_boundary(params, [lo, hi])
        if self._profit(params, boundary) > interior_profit:
            app_logger.info(f"Boundary limit {boundary} beats interior root {root:.6f}")
            return self._result(params, boundary, iterations, residual, "bisection", at_boundary=True)

        app_logger.info(f"Freeze-policy optimum {root:.10f} after {iterations} iterations (residual {residual:.2e})")
        return self._result(params, root, iterations, residual, "bisection")

    def _derivative_or_nan(self, params: ModelParams, limit: float) -> float:
        if limit <= 0:
            return math.nan
        return self._derivative(params, limit)

    def _golden_fallback(self, params: ModelParams, grid: np.ndarray) -> OptimizationResult:
        profits = np.array([self._profit(params, x) for x in grid])
        j = int(np.argmax(profits))
        if j == 0 or j == len(grid) - 1:
            limit = params.limit_set_lo if j == 0 and self._profit(params, params.limit_set_lo) >= profits[0] else grid[j]
            return self._result(params, limit, 0, math.nan, "golden_section",
                                fallback_used=True, at_boundary=True)
        try:
            res = optimize.minimize_scalar(lambda x: -self._profit(params, x),
                                           bracket=(grid[j - 1], grid[j], grid[j + 1]),
                                           method='golden')
            limit = float(min(max(res.x, params.limit_set_lo), params.limit_set_hi))
            iterations = int(res.nit)
        except ValueError as e:
            app_logger.warning(f"Golden-section bracket rejected ({e}); keeping best scanned limit")
            limit, iterations = float(grid[j]), 0
        residual = abs(self._derivative(params, limit) - params.funding_ratio)
        return self._result(params, limit, iterations, residual, "golden_section", fallback_used=True)

    # -- newsvendor ------------------------------------------------------

    def newsvendor_limit(self, params: ModelParams) -> OptimizationResult:
        """Smallest limit with P(A(T) <= l) >= (gamma - nu)/gamma, the critical ratio."""
        ratio = 1.0 - params.critical_ratio
        lam = self.balance.transforms.poisson_rate(params)
        p_positive = -math.expm1(-lam * params.horizon)
        if p_positive <= ratio:
            error_msg = (f"P(A(T) > 0) = {p_positive:.6g} does not exceed nu/gamma = {ratio:.6g}; "
                         f"the newsvendor optimum is a zero limit")
            error_logger.error(error_msg)
            raise RatioUnattainableError(error_msg)

        def excess(limit: float) -> float:
            return self.balance.decline_probability(BalanceQuery(params, limit)) - ratio

        scale = max(params.limit_set_hi, params.expected_spend)
        a = scale * ORIGIN_OFFSET
        b = scale
        for _ in range(64):
            if excess(b) < 0:
                break
            b *= 2.0
        else:
            error_msg = f"Decline probability never falls below {ratio} up to limit {b}"
            error_logger.error(error_msg)
            raise RootNotBracketedError(error_msg)

        root, iterations = self._bisect(excess, a, b)
        residual = abs(excess(root))
        limit = min(max(root, params.limit_set_lo), params.limit_set_hi)
        at_boundary = limit != root
        if at_boundary:
            app_logger.warning(f"Newsvendor quantile {root:.4f} lies outside the limit set, clipped to {limit}")
        app_logger.info(f"Newsvendor limit {root:.10f} at critical ratio {params.critical_ratio:.6f} "
                        f"after {iterations} iterations")
        return self._result(params, limit, iterations, residual, "bisection",
                            policy=PolicyKind.NEWSVENDOR_TRUNCATION, at_boundary=at_boundary)

    # -- bounds and evaluation ------------------------------------------

    def retrial_bounds(self, params: ModelParams) -> BoundsResult:
        """Newsvendor limit below and freeze-policy limit above the retrial-policy optimum."""
        lower = self.newsvendor_limit(params)
        upper = self.optimal_limit_freeze(params)
        if lower.limit_star > upper.limit_star:
            app_logger.warning(
                f"Newsvendor limit {lower.limit_star:.6f} exceeds freeze limit {upper.limit_star:.6f}")
        return BoundsResult(lower=lower.limit_star, upper=upper.limit_star,
                            lower_result=lower, upper_result=upper)

    def evaluate_limit(self, params: ModelParams, limit: float) -> LimitReport:
        """Expected balances, freeze-policy profit and decline probability at one limit."""
        if not math.isfinite(limit) or limit <= 0:
            raise ModelError(f"evaluate_limit needs a positive limit, got {limit}")
        q = BalanceQuery(params, limit)
        return LimitReport(
            limit=limit,
            expected_balance=self.balance.expected_balance(q),
            expected_min=self.balance.expected_min(q),
            expected_profit=self.balance.expected_profit(q, PolicyKind.FREEZE),
            decline_probability=self.balance.decline_probability(q),
        )

    def revised_limit(self, params: ModelParams, limit: float, multiple: float = 500.0) -> float:
        """Neighbouring multiple of ``multiple`` with the higher expected profit."""
        if multiple <= 0:
            raise ModelError(f"rounding multiple must be positive, got {multiple}")
        floor = math.floor(limit / multiple) * multiple
        if math.isclose(floor, limit):
            return floor
        candidates = [c for c in (floor, floor + multiple) if c > 0]
        best = max(candidates, key=lambda c: self.evaluate_limit(params, c).expected_profit)
        app_logger.info(f"Revised limit for {limit:.2f} in multiples of {multiple:g}: {best:.2f}")
        return best
