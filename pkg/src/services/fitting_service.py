from typing import Iterable, List, Optional, Sequence
import logging
import math

import numpy as np
from scipy import special, stats

from config.settings import DEFAULT_CLUSTER_WINDOW_SECS, DEFAULT_EXCLUDED_REASONS
from exceptions import (
    EmptySeriesAfterFilterError,
    IngestError,
    InsufficientDataError,
    NoConvergenceError,
    NonPositiveValueError,
)
from models.domain_models import (
    DistributionSpec,
    FitReport,
    GammaFit,
    KsResult,
    ParameterEstimate,
    PurchaseSeries,
    TransactionRecord,
    TransactionStatus,
)

# Get loggers
app_logger = logging.getLogger('app')
error_logger = logging.getLogger('error')

SECONDS_PER_DAY = 86400.0
MIN_GAMMA_OBSERVATIONS = 10


class FittingService:
    """Turns transaction records into a purchase series and fits its laws."""

    def __init__(self, newton_tol: float = 1e-10, newton_max_iter: int = 100):
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        app_logger.info("FittingService initialized")

    def prepare_series(self, records: Iterable[TransactionRecord],
                       category_filter: Optional[str] = None,
                       exclusions: Sequence[str] = DEFAULT_EXCLUDED_REASONS,
                       cluster_window: float = DEFAULT_CLUSTER_WINDOW_SECS) -> PurchaseSeries:
        """Filter, cluster and rescale records into (days, dollars) purchases.

        Approved purchases are kept, as are declined attempts whose reason
        is not in ``exclusions`` (they still reveal demand). A purchase
        within ``cluster_window`` seconds of the previous member of its
        cluster joins that cluster; the cluster keeps its first time and
        the summed value.
        """
        if cluster_window < 0 or not math.isfinite(cluster_window):
            raise IngestError(f"cluster_window must be a non-negative number of seconds, got {cluster_window}")
        excluded = {reason.lower() for reason in exclusions}

        kept = []
        for r in records:
            if category_filter is not None and r.merchant_category != category_filter:
                continue
            if r.amount <= 0:
                continue
            if r.status is TransactionStatus.DECLINED and (r.decline_reason or "").lower() in excluded:
                continue
            kept.append(r)
        if not kept:
            error_msg = (f"No purchases left after filtering (category={category_filter!r}, "
                         f"exclusions={sorted(excluded)})")
            error_logger.error(error_msg)
            raise EmptySeriesAfterFilterError(error_msg)
        kept.sort(key=lambda r: r.timestamp)

        starts: List[float] = []
        values: List[float] = []
        last = None
        merged = 0
        for r in kept:
            if last is not None and cluster_window > 0 and r.timestamp - last <= cluster_window:
                values[-1] += r.amount
                merged += 1
            else:
                starts.append(r.timestamp)
                values.append(r.amount)
            last = r.timestamp

        times = (np.asarray(starts) - starts[0]) / SECONDS_PER_DAY
        app_logger.info(f"Prepared series of {len(values)} purchases from {len(kept)} records "
                        f"({merged} merged into clusters)")
        return PurchaseSeries(times=times, values=np.asarray(values, dtype=float), clusters_merged=merged)

    def fit_interarrival(self, series: PurchaseSeries) -> ParameterEstimate:
        """Exponential rate from the reciprocal mean gap."""
        times = np.asarray(series.times, dtype=float)
        if times.size < 2:
            error_msg = f"Need at least 2 purchases to estimate an arrival rate, got {times.size}"
            error_logger.error(error_msg)
            raise InsufficientDataError(error_msg)
        gaps = np.diff(times)
        mean_gap = float(gaps.mean())
        if mean_gap <= 0:
            error_msg = "All purchases share one timestamp; the arrival rate is undefined"
            error_logger.error(error_msg)
            raise InsufficientDataError(error_msg)
        rate = 1.0 / mean_gap
        std_err = rate / math.sqrt(gaps.size)
        app_logger.info(f"Arrival rate {rate:.6f} +/- {std_err:.6f} per day from {gaps.size} gaps")
        return ParameterEstimate(rate, std_err)

    def fit_gamma_mle(self, values: Sequence[float]) -> GammaFit:
        """Maximum-likelihood Gamma(shape, rate) fit with observed-information standard errors."""
        x = np.asarray(values, dtype=float)
        n = x.size
        if n < MIN_GAMMA_OBSERVATIONS:
            error_msg = f"Need at least {MIN_GAMMA_OBSERVATIONS} values for a Gamma fit, got {n}"
            error_logger.error(error_msg)
            raise InsufficientDataError(error_msg)
        if np.any(~np.isfinite(x)) or np.any(x <= 0):
            error_msg = "Gamma fit needs finite positive values"
            error_logger.error(error_msg)
            raise NonPositiveValueError(error_msg)

        mean = float(x.mean())
        mean_log = float(np.log(x).mean())
        s = math.log(mean) - mean_log
        if not s > 0:
            error_msg = "Values have no spread on the log scale; the shape estimate diverges"
            error_logger.error(error_msg)
            raise NoConvergenceError(error_msg)

        # profile equation log k - digamma(k) = s
        k = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
        for iteration in range(1, self.newton_max_iter + 1):
            f = math.log(k) - special.digamma(k) - s
            df = 1.0 / k - special.polygamma(1, k)
            step = f / df
            k_new = k - step
            if k_new <= 0:
                k_new = k / 2.0
            app_logger.debug(f"Gamma shape Newton step {iteration}: k={k_new:.12g}")
            if abs(k_new - k) <= self.newton_tol:
                k = k_new
                break
            k = k_new
        else:
            error_msg = f"Gamma shape iteration did not converge in {self.newton_max_iter} steps (k={k})"
            error_logger.error(error_msg)
            raise NoConvergenceError(error_msg)

        rate = k / mean
        log_likelihood = float(n * (k * math.log(rate) - special.gammaln(k))
                               + (k - 1.0) * np.log(x).sum() - rate * x.sum())
        information = n * np.array([[special.polygamma(1, k), -1.0 / rate],
                                    [-1.0 / rate, k / rate ** 2]])
        cov = np.linalg.inv(information)
        fit = GammaFit(
            shape=ParameterEstimate(float(k), float(math.sqrt(cov[0, 0]))),
            rate=ParameterEstimate(float(rate), float(math.sqrt(cov[1, 1]))),
            iterations=iteration,
            log_likelihood=log_likelihood,
            n_obs=n,
        )
        app_logger.info(f"Gamma fit shape={fit.shape.value:.6f}+/-{fit.shape.std_err:.6f} "
                        f"rate={fit.rate.value:.6f}+/-{fit.rate.std_err:.6f} ({iteration} iterations)")
        return fit

    def ks_test(self, values: Sequence[float], fitted: DistributionSpec) -> KsResult:
        """Two-sided one-sample Kolmogorov-Smirnov test with the asymptotic p-value.

        Parameters estimated from the same data make the p-value conservative.
        """
        x = np.sort(np.asarray(values, dtype=float))
        n = x.size
        if n < 1:
            raise InsufficientDataError("Kolmogorov-Smirnov test needs at least one value")
        cdf = np.asarray(fitted.cdf(x), dtype=float)
        i = np.arange(1, n + 1)
        d_plus = float(np.max(i / n - cdf))
        d_minus = float(np.max(cdf - (i - 1) / n))
        statistic = max(d_plus, d_minus)
        p_value = float(stats.kstwobign.sf(math.sqrt(n) * statistic))
        app_logger.info(f"KS statistic {statistic:.6f}, p-value {p_value:.4f} (n={n})")
        return KsResult(statistic=statistic, p_value=p_value, n_obs=n)

    def fit_report(self, series: PurchaseSeries) -> FitReport:
        """Arrival rate, Gamma marks and KS check for one prepared series."""
        arrival = self.fit_interarrival(series)
        gamma = self.fit_gamma_mle(series.values)
        ks = self.ks_test(series.values, gamma.to_spec())
        return FitReport(
            lambda_hat=arrival.value,
            lambda_se=arrival.std_err,
            shape_hat=gamma.shape.value,
            shape_se=gamma.shape.std_err,
            rate_hat=gamma.rate.value,
            rate_se=gamma.rate.std_err,
            ks_d=ks.statistic,
            ks_p=ks.p_value,
            n_obs=len(series),
        )
