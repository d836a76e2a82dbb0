import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy import stats

from exceptions import ConfigurationError, InvalidSpecError


class DistributionKind(enum.Enum):
    EXPONENTIAL = "exponential"
    GAMMA = "gamma"
    DETERMINISTIC = "deterministic"


class DistributionRole(enum.Enum):
    MARK = "mark"
    INTER_ARRIVAL = "inter_arrival"


class PolicyKind(enum.Enum):
    FREEZE = "freeze"
    RETRIAL = "retrial"
    NEWSVENDOR_TRUNCATION = "truncation"


class TransactionStatus(enum.Enum):
    APPROVED = "approved"
    DECLINED = "declined"


class OutputFormat(enum.Enum):
    JSON = "json"
    CSV = "csv"
    PRETTY = "pretty"


class TableKind(enum.Enum):
    OPTIMAL = "optimal"
    DECLINE = "decline"
    NEWSVENDOR = "newsvendor"
    DIFFERENCES = "differences"


def _positive(name: str, value: Optional[float]) -> None:
    if value is None or not math.isfinite(value) or value <= 0:
        raise InvalidSpecError(f"{name} must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class DistributionSpec:
    """Parametric law of purchase sizes (marks) or inter-purchase times.

    Gamma laws use the rate parameterisation: mean = shape / rate and
    Laplace transform (rate / (rate + s)) ** shape. Exponential is the
    shape-1 case.
    """
    kind: DistributionKind
    role: DistributionRole
    rate: Optional[float] = None
    shape: float = 1.0
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind is DistributionKind.DETERMINISTIC:
            _positive("value", self.value)
            return
        _positive("rate", self.rate)
        _positive("shape", self.shape)
        if self.kind is DistributionKind.EXPONENTIAL and self.shape != 1.0:
            raise InvalidSpecError("Exponential laws have shape 1")

    @classmethod
    def exponential(cls, rate: float, role: DistributionRole = DistributionRole.MARK) -> "DistributionSpec":
        return cls(DistributionKind.EXPONENTIAL, role, rate=rate)

    @classmethod
    def gamma(cls, shape: float, rate: float, role: DistributionRole = DistributionRole.MARK) -> "DistributionSpec":
        return cls(DistributionKind.GAMMA, role, rate=rate, shape=shape)

    @classmethod
    def deterministic(cls, value: float, role: DistributionRole = DistributionRole.MARK) -> "DistributionSpec":
        return cls(DistributionKind.DETERMINISTIC, role, value=value)

    @property
    def sigma(self) -> float:
        """Abscissa of convergence of the Laplace transform."""
        if self.kind is DistributionKind.DETERMINISTIC:
            return -math.inf
        return -self.rate

    @property
    def mean(self) -> float:
        if self.kind is DistributionKind.DETERMINISTIC:
            return self.value
        return self.shape / self.rate

    @property
    def second_moment(self) -> float:
        """E[X^2]."""
        if self.kind is DistributionKind.DETERMINISTIC:
            return self.value ** 2
        return self.shape * (self.shape + 1.0) / self.rate ** 2

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is DistributionKind.DETERMINISTIC:
            return (x >= self.value).astype(float)
        if self.kind is DistributionKind.EXPONENTIAL:
            return stats.expon.cdf(x, scale=1.0 / self.rate)
        return stats.gamma.cdf(x, a=self.shape, scale=1.0 / self.rate)

    def scaled(self, alpha: float) -> "DistributionSpec":
        """The law of alpha * X."""
        _positive("alpha", alpha)
        if self.kind is DistributionKind.DETERMINISTIC:
            return replace(self, value=self.value * alpha)
        return replace(self, rate=self.rate / alpha)

    def describe(self) -> str:
        if self.kind is DistributionKind.DETERMINISTIC:
            return f"Deterministic({self.value:g})"
        if self.kind is DistributionKind.EXPONENTIAL:
            return f"Exponential(rate={self.rate:g})"
        return f"Gamma(shape={self.shape:g}, rate={self.rate:g})"


@dataclass(frozen=True)
class ModelParams:
    """Economic and stochastic parameters of one transactor.

    The interest-free period is folded into the statement period once,
    here; everything downstream reads ``horizon``.
    """
    gamma_interchange: float
    nu_funding: float
    period_days: float
    mark_dist: DistributionSpec
    arrival_dist: DistributionSpec
    interest_free_days: float = 0.0
    limit_set_lo: float = 0.0
    limit_set_hi: float = 5000.0
    horizon: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.gamma_interchange < 1:
            raise InvalidSpecError(f"gamma_interchange must lie in (0, 1), got {self.gamma_interchange}")
        if not 0 < self.nu_funding < 1:
            raise InvalidSpecError(f"nu_funding must lie in (0, 1), got {self.nu_funding}")
        _positive("period_days", self.period_days)
        if not math.isfinite(self.interest_free_days) or self.interest_free_days < 0:
            raise InvalidSpecError(f"interest_free_days must be >= 0, got {self.interest_free_days}")
        if not (0 <= self.limit_set_lo < self.limit_set_hi and math.isfinite(self.limit_set_hi)):
            raise InvalidSpecError(
                f"limit set must satisfy 0 <= lo < hi, got ({self.limit_set_lo}, {self.limit_set_hi}]")
        if self.mark_dist.role is not DistributionRole.MARK:
            raise InvalidSpecError("mark_dist must have the Mark role")
        if self.arrival_dist.role is not DistributionRole.INTER_ARRIVAL:
            raise InvalidSpecError("arrival_dist must have the InterArrival role")
        object.__setattr__(self, "horizon", self.period_days + self.interest_free_days)

    @property
    def funding_ratio(self) -> float:
        """nu / gamma, the target of the first-order condition."""
        return self.nu_funding / self.gamma_interchange

    @property
    def critical_ratio(self) -> float:
        return (self.gamma_interchange - self.nu_funding) / self.gamma_interchange

    @property
    def is_degenerate(self) -> bool:
        """Funding costs at least the interchange earned: profit falls with the limit."""
        return self.nu_funding >= self.gamma_interchange

    @property
    def expected_spend(self) -> float:
        """E[A(T)]; exact for Poisson arrivals, renewal-rate approximation otherwise."""
        return self.horizon / self.arrival_dist.mean * self.mark_dist.mean

    def scaled(self, alpha: float) -> "ModelParams":
        """Marks and the limit set scaled by alpha."""
        return replace(self,
                       mark_dist=self.mark_dist.scaled(alpha),
                       limit_set_lo=self.limit_set_lo * alpha,
                       limit_set_hi=self.limit_set_hi * alpha)

    def with_limit_set(self, lo: float, hi: float) -> "ModelParams":
        return replace(self, limit_set_lo=lo, limit_set_hi=hi)

    @classmethod
    def from_fit_report(cls, report: "FitReport", gamma_interchange: float, nu_funding: float,
                        period_days: float, interest_free_days: float = 0.0,
                        limit_set_lo: float = 0.0, limit_set_hi: float = 5000.0) -> "ModelParams":
        return cls(
            gamma_interchange=gamma_interchange,
            nu_funding=nu_funding,
            period_days=period_days,
            interest_free_days=interest_free_days,
            limit_set_lo=limit_set_lo,
            limit_set_hi=limit_set_hi,
            mark_dist=DistributionSpec.gamma(report.shape_hat, report.rate_hat),
            arrival_dist=DistributionSpec.exponential(report.lambda_hat, DistributionRole.INTER_ARRIVAL),
        )


@dataclass(frozen=True)
class TransformFn:
    """A Laplace transform as a vectorised complex evaluator plus its abscissa."""
    evaluate: Callable[[np.ndarray], np.ndarray]
    sigma: float
    name: str = "transform"

    def __call__(self, s):
        return self.evaluate(s)


@dataclass(frozen=True)
class EulerConfig:
    a: float = 18.4
    n_terms: int = 15
    m_avg: int = 11

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise ConfigurationError(f"EULER parameter A must be positive, got {self.a}")
        if self.n_terms < 1 or self.m_avg < 1:
            raise ConfigurationError(
                f"EULER needs n_terms >= 1 and m_avg >= 1, got {self.n_terms}, {self.m_avg}")


@dataclass(frozen=True)
class BalanceQuery:
    params: ModelParams
    limit: float
    horizon: Optional[float] = None

    def __post_init__(self):
        if not math.isfinite(self.limit) or self.limit < 0:
            raise InvalidSpecError(f"limit must be finite and >= 0, got {self.limit}")
        if self.horizon is None:
            object.__setattr__(self, "horizon", self.params.horizon)
        elif not math.isfinite(self.horizon) or self.horizon <= 0:
            raise InvalidSpecError(f"horizon must be positive, got {self.horizon}")


@dataclass(frozen=True)
class LimitReport:
    limit: float
    expected_balance: float
    expected_min: float
    expected_profit: float
    decline_probability: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "limit": self.limit,
            "expected_balance": self.expected_balance,
            "expected_min": self.expected_min,
            "expected_profit": self.expected_profit,
            "decline_probability": self.decline_probability,
        }


@dataclass(frozen=True)
class OptimizationResult:
    limit_star: float
    profit_at_star: float
    decline_prob_at_star: float
    iterations: int
    residual: float
    method: str
    root_bracketed: bool = True
    fallback_used: bool = False
    at_boundary: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "limit_star": self.limit_star,
            "profit_at_star": self.profit_at_star,
            "decline_prob_at_star": self.decline_prob_at_star,
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
            "root_bracketed": self.root_bracketed,
            "fallback_used": self.fallback_used,
            "at_boundary": self.at_boundary,
        }


@dataclass(frozen=True)
class BoundsResult:
    """Newsvendor limit below, freeze-policy limit above; the retrial optimum lies between."""
    lower: float
    upper: float
    lower_result: Optional[OptimizationResult] = None
    upper_result: Optional[OptimizationResult] = None

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": self.lower, "upper": self.upper, "gap": self.gap}


@dataclass(frozen=True)
class SimReport:
    policy: PolicyKind
    limit: float
    mean_balance: float
    std_err: float
    decline_frequency: float
    mean_undershoot_given_exceed: Optional[float]
    replications: int
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "policy": self.policy.value,
            "limit": self.limit,
            "mean_balance": self.mean_balance,
            "std_err": self.std_err,
            "decline_frequency": self.decline_frequency,
            "mean_undershoot_given_exceed": self.mean_undershoot_given_exceed,
            "replications": self.replications,
            "seed": self.seed,
        }


@dataclass
class PathBalances:
    """End-of-period balances per simulated path, on common random numbers."""
    freeze: np.ndarray
    retrial: np.ndarray
    truncation: np.ndarray
    aggregate: np.ndarray

    def for_policy(self, policy: PolicyKind) -> np.ndarray:
        if policy is PolicyKind.FREEZE:
            return self.freeze
        if policy is PolicyKind.RETRIAL:
            return self.retrial
        return self.truncation


@dataclass(frozen=True)
class SchemaConfig:
    """CSV column names of a transaction extract."""
    account_id: str = "account_id"
    timestamp: str = "ts"
    amount: str = "amount"
    merchant_category: str = "mcc_category"
    status: str = "status"
    decline_reason: str = "decline_reason"
    timezone: str = "UTC"

    def required_columns(self) -> List[str]:
        return [self.account_id, self.timestamp, self.amount, self.merchant_category, self.status]


@dataclass(frozen=True)
class TransactionRecord:
    account_id: str
    timestamp: float
    amount: float
    merchant_category: str
    status: TransactionStatus
    decline_reason: Optional[str] = None


@dataclass
class TransactionBatch:
    """Parsed records in timestamp order plus the rows that failed to parse."""
    records: List[TransactionRecord]
    errors: List[Exception] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class PurchaseSeries:
    times: np.ndarray  # days since the first purchase
    values: np.ndarray  # dollars
    clusters_merged: int = 0

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class ParameterEstimate:
    value: float
    std_err: float


@dataclass(frozen=True)
class GammaFit:
    shape: ParameterEstimate
    rate: ParameterEstimate
    iterations: int
    log_likelihood: float
    n_obs: int

    def to_spec(self) -> DistributionSpec:
        return DistributionSpec.gamma(self.shape.value, self.rate.value)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n_obs: int


@dataclass(frozen=True)
class FitReport:
    lambda_hat: float
    lambda_se: float
    shape_hat: float
    shape_se: float
    rate_hat: float
    rate_se: float
    ks_d: float
    ks_p: float
    n_obs: int

    FIELDS = ("lambda_hat", "lambda_se", "shape_hat", "shape_se",
              "rate_hat", "rate_se", "ks_d", "ks_p", "n_obs")

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in self.FIELDS}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FitReport":
        missing = [name for name in cls.FIELDS if name not in data]
        if missing:
            raise InvalidSpecError(f"Fit report is missing fields: {', '.join(missing)}")
        values = {name: float(data[name]) for name in cls.FIELDS}
        values["n_obs"] = int(data["n_obs"])
        return cls(**values)


@dataclass
class TableGrid:
    """One 5x5 reproduction grid: rows by arrival rate, columns by mean purchase."""
    kind: TableKind
    arrival_rates: List[float]
    mean_marks: List[float]
    values: List[List[float]]
    failures: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "table": self.kind.value,
            "arrival_rates": self.arrival_rates,
            "mean_marks": self.mean_marks,
            "values": [[None if math.isnan(v) else v for v in row] for row in self.values],
            "failures": self.failures,
        }


@dataclass
class RunConfig:
    """Everything one CLI invocation needs, resolved from flags and settings."""
    command: str
    params: ModelParams
    seed: int
    replications: int
    output_format: OutputFormat = OutputFormat.JSON
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    options: Dict[str, Any] = field(default_factory=dict)
