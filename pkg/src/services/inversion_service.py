from typing import List, Optional, Sequence
import logging
import math

import numpy as np
from scipy.special import comb

from exceptions import (
    AbscissaViolationError,
    InversionError,
    NonFiniteTransformValueError,
    NonPositiveTimeError,
)
from models.domain_models import EulerConfig, TransformFn

# Get loggers
app_logger = logging.getLogger('app')
error_logger = logging.getLogger('error')

# Inverted values below this magnitude are oscillation noise
ZERO_CUTOFF = 1e-12


class EulerInversionService:
    """Laplace transform inversion by the EULER algorithm.

    The Bromwich integral is discretised by the trapezoidal rule into an
    alternating Fourier series, whose partial sums s_n ... s_{n+m} are
    binomially averaged (Euler summation).
    """

    def __init__(self, config: Optional[EulerConfig] = None):
        self.config = config or EulerConfig()
        self._weights_cache = {}
        app_logger.info(
            f"EulerInversionService initialized (A={self.config.a}, "
            f"n={self.config.n_terms}, m={self.config.m_avg})")

    def _weights(self, m: int) -> np.ndarray:
        if m not in self._weights_cache:
            self._weights_cache[m] = comb(m, np.arange(m + 1)) / 2.0 ** m
        return self._weights_cache[m]

    def invert(self, transform: TransformFn, t: float, config: Optional[EulerConfig] = None) -> float:
        """Return f(t) for the function whose Laplace transform is ``transform``."""
        cfg = config or self.config
        if not math.isfinite(t) or t <= 0:
            error_msg = f"Cannot invert {transform.name} at t={t}: time must be positive"
            error_logger.error(error_msg)
            raise NonPositiveTimeError(error_msg)

        shift = cfg.a / (2.0 * t)
        if transform.sigma >= shift:
            error_msg = (f"Bromwich line A/(2t)={shift:g} is not right of the abscissa "
                         f"{transform.sigma:g} of {transform.name}")
            error_logger.error(error_msg)
            raise AbscissaViolationError(error_msg)

        n_total = cfg.n_terms + cfg.m_avg
        k = np.arange(n_total + 1)
        nodes = (cfg.a + 2j * np.pi * k) / (2.0 * t)
        values = np.asarray(transform(nodes), dtype=complex)
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            error_msg = f"{transform.name} returned a non-finite value at node {nodes[bad]} (t={t})"
            error_logger.error(error_msg)
            raise NonFiniteTransformValueError(error_msg)

        terms = np.where(k % 2 == 0, 1.0, -1.0) * values.real
        terms[0] *= 0.5
        partial_sums = np.cumsum(terms) * (math.exp(cfg.a / 2.0) / t)
        result = float(self._weights(cfg.m_avg) @ partial_sums[cfg.n_terms:])

        if abs(result) < ZERO_CUTOFF:
            return 0.0
        return result

    def invert_batch(self, transform: TransformFn, ts: Sequence[float],
                     config: Optional[EulerConfig] = None) -> List[float]:
        """Element-wise ``invert``; a failure is re-raised with its index."""
        results = []
        for index, t in enumerate(ts):
            try:
                results.append(self.invert(transform, t, config))
            except InversionError as e:
                error_logger.error(f"invert_batch failed at index {index}: {e}")
                raise type(e)(f"index {index}: {e}", index=index) from e
        return results
