"""Closed-form Laplace transforms of the transactor balance model.

All evaluators accept a complex scalar or a numpy array of complex
arguments and return a value of the same shape. Scalar inputs return a
Python ``complex``.
"""
import logging

import numpy as np

from exceptions import (
    ArgumentOutsideRegionError,
    DivergentGeometricTermError,
    InvalidSpecError,
    NonPositiveTimeError,
    PoleAtOriginError,
    UnsupportedLawError,
)
from models.domain_models import (
    DistributionKind,
    DistributionRole,
    DistributionSpec,
    ModelParams,
    TransformFn,
)

# Get loggers
app_logger = logging.getLogger('app')
error_logger = logging.getLogger('error')


def _to_array(s):
    return np.asarray(s, dtype=complex)


def _out(value, like):
    if np.ndim(like) == 0:
        return complex(value)
    return value


def _check_region(sigma: float, s: np.ndarray, label: str) -> None:
    if np.any(s.real <= sigma):
        error_msg = f"{label}: argument with real part <= abscissa {sigma}"
        error_logger.error(error_msg)
        raise ArgumentOutsideRegionError(error_msg)


def _check_nonzero(s: np.ndarray, label: str) -> None:
    if np.any(s == 0):
        error_msg = f"{label}: evaluated at the pole s = 0"
        error_logger.error(error_msg)
        raise PoleAtOriginError(error_msg)


def _check_time(t: float) -> None:
    if not np.isfinite(t) or t < 0:
        raise NonPositiveTimeError(f"time must be finite and >= 0, got {t}")


def _transform(spec: DistributionSpec, s: np.ndarray) -> np.ndarray:
    # principal branch of (rate / (rate + s)) ** shape
    if spec.kind is DistributionKind.DETERMINISTIC:
        return np.exp(-spec.value * s)
    return np.exp(-spec.shape * np.log1p(s / spec.rate))


def _one_minus_transform(spec: DistributionSpec, s: np.ndarray) -> np.ndarray:
    if spec.kind is DistributionKind.DETERMINISTIC:
        return -np.expm1(-spec.value * s)
    return -np.expm1(-spec.shape * np.log1p(s / spec.rate))


def _log_derivative(spec: DistributionSpec, s: np.ndarray) -> np.ndarray:
    """d/ds log f(s)."""
    if spec.kind is DistributionKind.DETERMINISTIC:
        return np.full_like(s, -spec.value)
    return -spec.shape / (spec.rate + s)


class TransformService:
    """Distribution and model transforms, plus the ``TransformFn`` builders the inverter consumes.

    The model transforms need Poisson arrivals; the balance transforms
    also need a continuous mark law.
    """

    def __init__(self):
        app_logger.info("TransformService initialized")

    # -- distribution transforms ----------------------------------------

    def distribution_transform(self, spec: DistributionSpec, s):
        """Laplace-Stieltjes transform of a distribution, any role."""
        arr = _to_array(s)
        _check_region(spec.sigma, arr, spec.describe())
        return _out(_transform(spec, arr), s)

    def mark_transform(self, spec: DistributionSpec, theta):
        """f(theta) for the purchase-size law."""
        if spec.role is not DistributionRole.MARK:
            raise InvalidSpecError(f"{spec.describe()} is not a mark distribution")
        return self.distribution_transform(spec, theta)

    def arrival_transform(self, spec: DistributionSpec, omega):
        """g(omega) for the inter-purchase time law."""
        if spec.role is not DistributionRole.INTER_ARRIVAL:
            raise InvalidSpecError(f"{spec.describe()} is not an inter-arrival distribution")
        return self.distribution_transform(spec, omega)

    # -- model transforms -----------------------------------------------

    def tail_triple_transform(self, params: ModelParams, theta, omega, psi):
        """Triple transform of the tail function S_l(y, t) over (l, t, y)."""
        th, om, ps = np.broadcast_arrays(_to_array(theta), _to_array(omega), _to_array(psi))
        for label, arr in (("theta", th), ("omega", om), ("psi", ps)):
            _check_nonzero(arr, f"tail_triple_transform[{label}]")
        _check_region(params.mark_dist.sigma, th, "tail_triple_transform[theta]")
        _check_region(params.mark_dist.sigma, th + ps, "tail_triple_transform[theta+psi]")
        _check_region(params.arrival_dist.sigma, om, "tail_triple_transform[omega]")

        g = _transform(params.arrival_dist, om)
        f_theta = _transform(params.mark_dist, th)
        f_shift = _transform(params.mark_dist, th + ps)
        ratio = g * f_shift
        if np.any(np.abs(ratio) >= 1.0):
            error_msg = "tail_triple_transform: |g(omega) f(theta+psi)| >= 1, geometric series diverges"
            error_logger.error(error_msg)
            raise DivergentGeometricTermError(error_msg)

        value = g * (f_theta - f_shift) / (th * om * ps * (1.0 - ratio))
        if np.ndim(theta) == 0 and np.ndim(omega) == 0 and np.ndim(psi) == 0:
            return complex(value)
        return value

    def poisson_rate(self, params: ModelParams) -> float:
        """Arrival rate; the closed forms below need Poisson arrivals."""
        if params.arrival_dist.kind is not DistributionKind.EXPONENTIAL:
            error_msg = (f"Closed-form transforms need exponential inter-arrival times, "
                         f"got {params.arrival_dist.describe()}")
            error_logger.error(error_msg)
            raise UnsupportedLawError(error_msg)
        return params.arrival_dist.rate

    def spend_std_dev(self, params: ModelParams, t: float) -> float:
        """Standard deviation of A(t), the compound Poisson spend up to t."""
        return float(np.sqrt(self.poisson_rate(params) * t * params.mark_dist.second_moment))

    def _require_continuous_marks(self, params: ModelParams) -> None:
        if params.mark_dist.kind is DistributionKind.DETERMINISTIC:
            error_msg = "Balance transforms need a continuous mark law; lattice marks make E[B] a step function"
            error_logger.error(error_msg)
            raise UnsupportedLawError(error_msg)

    def _geometric_factor(self, params: ModelParams, t: float, theta: np.ndarray) -> np.ndarray:
        """(1 - exp{lambda t (f - 1)}) / (1 - f), the omega -> t inversion of the renewal sum."""
        lam = self.poisson_rate(params)
        one_minus_f = _one_minus_transform(params.mark_dist, theta)
        return -np.expm1(-lam * t * one_minus_f) / one_minus_f

    def expectation_transform_theta(self, params: ModelParams, t: float, theta):
        """Transform over the limit of E[B_l(t)] under the freeze policy."""
        self._require_continuous_marks(params)
        _check_time(t)
        arr = _to_array(theta)
        _check_nonzero(arr, "expectation_transform_theta")
        _check_region(params.mark_dist.sigma, arr, "expectation_transform_theta")

        spec = params.mark_dist
        minus_f_prime = -_log_derivative(spec, arr) * _transform(spec, arr)
        value = minus_f_prime / arr * self._geometric_factor(params, t, arr)
        return _out(value, theta)

    def expectation_derivative_transform_theta(self, params: ModelParams, t: float, theta):
        """Transform over the limit of dE[B_l(t)]/dl; theta times the expectation transform."""
        self._require_continuous_marks(params)
        _check_time(t)
        arr = _to_array(theta)
        _check_nonzero(arr, "expectation_derivative_transform_theta")
        _check_region(params.mark_dist.sigma, arr, "expectation_derivative_transform_theta")

        spec = params.mark_dist
        minus_f_prime = -_log_derivative(spec, arr) * _transform(spec, arr)
        value = minus_f_prime * self._geometric_factor(params, t, arr)
        return _out(value, theta)

    def aggregate_tail_transform(self, params: ModelParams, psi):
        """Transform of P(A(T) > l) over l, compound Poisson A with the model's mark law."""
        lam = self.poisson_rate(params)
        arr = _to_array(psi)
        _check_nonzero(arr, "aggregate_tail_transform")
        _check_region(params.mark_dist.sigma, arr, "aggregate_tail_transform")

        one_minus_f = _one_minus_transform(params.mark_dist, arr)
        value = -np.expm1(-lam * params.horizon * one_minus_f) / arr
        return _out(value, psi)

    def min_expectation_transform(self, params: ModelParams, theta):
        """Transform over l of E[min(A(T), l)]."""
        arr = _to_array(theta)
        value = self.aggregate_tail_transform(params, arr) / arr
        return _out(value, theta)

    # -- TransformFn builders used by the inversion layer ---------------

    def expectation_transform(self, params: ModelParams, t: float) -> TransformFn:
        app_logger.debug(f"Building expectation transform at t={t}")
        return TransformFn(lambda s: self.expectation_transform_theta(params, t, s), sigma=0.0,
                           name="expected_balance")

    def derivative_transform(self, params: ModelParams, t: float) -> TransformFn:
        app_logger.debug(f"Building derivative transform at t={t}")
        return TransformFn(lambda s: self.expectation_derivative_transform_theta(params, t, s), sigma=0.0,
                           name="balance_derivative")

    def aggregate_tail(self, params: ModelParams) -> TransformFn:
        return TransformFn(lambda s: self.aggregate_tail_transform(params, s), sigma=params.mark_dist.sigma,
                           name="decline_probability")

    def min_expectation(self, params: ModelParams) -> TransformFn:
        return TransformFn(lambda s: self.min_expectation_transform(params, s), sigma=0.0,
                           name="expected_min")
