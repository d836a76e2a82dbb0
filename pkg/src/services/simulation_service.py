from dataclasses import dataclass
from typing import Iterator, List, Sequence
import logging
import math

import numpy as np

from exceptions import (
    EmptyGridError,
    InvalidReplicationsError,
    SimulationError,
    UnsupportedDistributionError,
)
from models.domain_models import (
    DistributionKind,
    DistributionSpec,
    ModelParams,
    PathBalances,
    PolicyKind,
    SimReport,
    TransactionRecord,
    TransactionStatus,
)

# Get loggers
app_logger = logging.getLogger('app')
error_logger = logging.getLogger('error')

SECONDS_PER_DAY = 86400.0
# 2011-01-01T00:00:00Z
DEFAULT_EPOCH_START = 1293840000
# declines that series preparation drops by default
SYNTHETIC_DECLINE_REASONS = ("pos_error", "incorrect_pin")


def _standard_exponential(spec: DistributionSpec, rng: np.random.Generator, size) -> np.ndarray:
    return rng.standard_exponential(size)


def _standard_gamma(spec: DistributionSpec, rng: np.random.Generator, size) -> np.ndarray:
    return rng.standard_gamma(spec.shape, size)


def _unit(spec: DistributionSpec, rng: np.random.Generator, size) -> np.ndarray:
    return np.ones(size)


# Unit-scale samplers; draws are rescaled afterwards so that scaling a law
# rescales the sample path without changing the random stream.
_SAMPLERS = {
    DistributionKind.EXPONENTIAL: _standard_exponential,
    DistributionKind.GAMMA: _standard_gamma,
    DistributionKind.DETERMINISTIC: _unit,
}


@dataclass
class _PathChunk:
    """Marks of one block of paths, zeroed past the horizon."""
    marks: np.ndarray  # (paths, slots)
    cumulative: np.ndarray  # running purchase total per slot

    @property
    def aggregate(self) -> np.ndarray:
        return self.cumulative[:, -1]

    def freeze(self, limit: float) -> np.ndarray:
        exceeded = self.cumulative > limit
        any_exceeded = exceeded.any(axis=1)
        first = np.argmax(exceeded, axis=1)
        before = np.concatenate([np.zeros((self.cumulative.shape[0], 1)), self.cumulative[:, :-1]], axis=1)
        at_first = before[np.arange(before.shape[0]), first]
        return np.where(any_exceeded, at_first, self.aggregate)

    def retrial(self, limit: float) -> np.ndarray:
        balance = np.zeros(self.marks.shape[0])
        for j in range(self.marks.shape[1]):
            candidate = balance + self.marks[:, j]
            balance = np.where(candidate <= limit, candidate, balance)
        return balance

    def truncation(self, limit: float) -> np.ndarray:
        return np.minimum(self.aggregate, limit)

    def balances(self, limit: float, policy: PolicyKind) -> np.ndarray:
        if policy is PolicyKind.FREEZE:
            return self.freeze(limit)
        if policy is PolicyKind.RETRIAL:
            return self.retrial(limit)
        return self.truncation(limit)


class _RunningMoments:
    """Mergeable count / mean / sum of squared deviations."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, values: np.ndarray) -> None:
        n_b = values.size
        if n_b == 0:
            return
        mean_b = float(values.mean())
        m2_b = float(((values - mean_b) ** 2).sum())
        n = self.n + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / n
        self.m2 += m2_b + delta * delta * self.n * n_b / n
        self.n = n

    @property
    def std_err(self) -> float:
        if self.n < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.n - 1) / self.n)


class PolicySimulationService:
    """Monte-Carlo simulator of the marked point process under the limit policies.

    Paths are generated in chunks; chunk ``c`` draws from
    ``Philox(key=seed).jumped(c)`` so results depend only on the seed and
    the replication count. All policies and all limits evaluated in one
    call share the same paths.
    """

    def __init__(self, chunk_size: int = 65536):
        if chunk_size < 1:
            raise SimulationError(f"chunk_size must be positive, got {chunk_size}")
        self.chunk_size = chunk_size
        app_logger.info(f"PolicySimulationService initialized (chunk_size={chunk_size})")

    # -- random source ---------------------------------------------------

    @staticmethod
    def _generator(seed: int, chunk: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=seed).jumped(chunk))

    @staticmethod
    def _draw(spec: DistributionSpec, rng: np.random.Generator, size) -> np.ndarray:
        sampler = _SAMPLERS.get(spec.kind)
        if sampler is None:
            error_msg = f"No sampler for {spec.describe()}"
            error_logger.error(error_msg)
            raise UnsupportedDistributionError(error_msg)
        unit = sampler(spec, rng, size)
        if spec.kind is DistributionKind.DETERMINISTIC:
            return unit * spec.value
        return unit / spec.rate

    # -- validation ------------------------------------------------------

    @staticmethod
    def _validate(params: ModelParams, replications: int, seed: int) -> None:
        if isinstance(replications, bool) or not isinstance(replications, (int, np.integer)) or replications < 1:
            error_msg = f"replications must be a positive integer, got {replications!r}"
            error_logger.error(error_msg)
            raise InvalidReplicationsError(error_msg)
        if not isinstance(seed, (int, np.integer)) or seed < 0:
            error_msg = f"seed must be a non-negative integer, got {seed!r}"
            error_logger.error(error_msg)
            raise SimulationError(error_msg)
        for spec in (params.mark_dist, params.arrival_dist):
            if spec.kind not in _SAMPLERS:
                error_msg = f"No sampler for {spec.describe()}"
                error_logger.error(error_msg)
                raise UnsupportedDistributionError(error_msg)

    # -- path generation -------------------------------------------------

    def _initial_slots(self, params: ModelParams) -> int:
        expected = params.horizon / params.arrival_dist.mean
        return int(math.ceil(expected + 6.0 * math.sqrt(expected) + 10.0))

    def _sample_chunk(self, params: ModelParams, rng: np.random.Generator, size: int) -> _PathChunk:
        horizon = params.horizon
        slots = self._initial_slots(params)
        gaps = self._draw(params.arrival_dist, rng, (size, slots))
        marks = self._draw(params.mark_dist, rng, (size, slots))
        times = np.cumsum(gaps, axis=1)
        # extend until every path has an arrival past the horizon
        while np.any(times[:, -1] <= horizon):
            extra = max(slots // 2, 1)
            more_gaps = self._draw(params.arrival_dist, rng, (size, extra))
            more_marks = self._draw(params.mark_dist, rng, (size, extra))
            times = np.concatenate([times, times[:, -1:] + np.cumsum(more_gaps, axis=1)], axis=1)
            marks = np.concatenate([marks, more_marks], axis=1)
            app_logger.debug(f"Extended path block to {times.shape[1]} slots")
        within = np.where(times <= horizon, marks, 0.0)
        return _PathChunk(marks=within, cumulative=np.cumsum(within, axis=1))

    def _chunks(self, params: ModelParams, replications: int, seed: int) -> Iterator[_PathChunk]:
        for chunk, start in enumerate(range(0, replications, self.chunk_size)):
            size = min(self.chunk_size, replications - start)
            yield self._sample_chunk(params, self._generator(seed, chunk), size)

    # -- operations ------------------------------------------------------

    def simulate_policy(self, params: ModelParams, limit: float, policy: PolicyKind,
                        replications: int, seed: int) -> SimReport:
        """Mean end-of-period balance of ``policy`` at ``limit`` with its standard error."""
        self._validate(params, replications, seed)
        if not math.isfinite(limit) or limit <= 0:
            error_msg = f"simulate_policy needs a positive limit, got {limit}"
            error_logger.error(error_msg)
            raise SimulationError(error_msg)
        app_logger.info(f"Simulating {policy.value} policy at limit {limit} ({replications} paths, seed {seed})")

        moments = _RunningMoments()
        exceeded = 0
        undershoot_total = 0.0
        for chunk in self._chunks(params, replications, seed):
            balances = chunk.balances(limit, policy)
            moments.add(balances)
            over = chunk.aggregate > limit
            exceeded += int(over.sum())
            undershoot_total += float((limit - balances[over]).sum())

        undershoot = undershoot_total / exceeded if exceeded else None
        report = SimReport(
            policy=policy,
            limit=limit,
            mean_balance=moments.mean,
            std_err=moments.std_err,
            decline_frequency=exceeded / replications,
            mean_undershoot_given_exceed=undershoot,
            replications=replications,
            seed=seed,
        )
        app_logger.info(f"Simulated mean balance {report.mean_balance:.6f} +/- {report.std_err:.6f}")
        return report

    def simulate_aggregate_tail(self, params: ModelParams, limit: float,
                                replications: int, seed: int) -> float:
        """Empirical frequency of {A(T) > limit}."""
        self._validate(params, replications, seed)
        if not math.isfinite(limit) or limit < 0:
            error_msg = f"simulate_aggregate_tail needs a non-negative limit, got {limit}"
            error_logger.error(error_msg)
            raise SimulationError(error_msg)
        exceeded = sum(int((chunk.aggregate > limit).sum())
                       for chunk in self._chunks(params, replications, seed))
        return exceeded / replications

    def estimate_retrial_optimum(self, params: ModelParams, grid: Sequence[float],
                                 replications: int, seed: int) -> float:
        """Grid point maximising the simulated retrial-policy profit, on common paths."""
        self._validate(params, replications, seed)
        limits = np.asarray(list(grid), dtype=float)
        if limits.size == 0:
            error_msg = "estimate_retrial_optimum needs a non-empty limit grid"
            error_logger.error(error_msg)
            raise EmptyGridError(error_msg)
        if np.any(np.diff(limits) < 0) or np.any(limits <= 0):
            error_msg = "limit grid must be sorted and positive"
            error_logger.error(error_msg)
            raise SimulationError(error_msg)

        totals = np.zeros(limits.size)
        for chunk in self._chunks(params, replications, seed):
            for i, limit in enumerate(limits):
                totals[i] += chunk.retrial(limit).sum()
        profits = params.gamma_interchange * totals / replications - params.nu_funding * limits
        best = int(np.argmax(profits))
        app_logger.info(f"Retrial optimum over {limits.size} grid points: {limits[best]} (profit {profits[best]:.6f})")
        return float(limits[best])

    def simulate_balances(self, params: ModelParams, limit: float,
                          replications: int, seed: int) -> PathBalances:
        """Per-path balances of every policy and A(T), on the same paths."""
        self._validate(params, replications, seed)
        parts = {"freeze": [], "retrial": [], "truncation": [], "aggregate": []}
        for chunk in self._chunks(params, replications, seed):
            parts["freeze"].append(chunk.freeze(limit))
            parts["retrial"].append(chunk.retrial(limit))
            parts["truncation"].append(chunk.truncation(limit))
            parts["aggregate"].append(chunk.aggregate.copy())
        return PathBalances(**{name: np.concatenate(values) for name, values in parts.items()})

    def synthesize_transactions(self, params: ModelParams, days: float, seed: int,
                                account_id: str = "synthetic-0001",
                                merchant_category: str = "groceries",
                                start_epoch: int = DEFAULT_EPOCH_START,
                                decline_rate: float = 0.0,
                                split_rate: float = 0.0) -> List[TransactionRecord]:
        """Transaction stream of one customer over ``days``.

        Each purchase of the model becomes an approved record. With
        probability ``split_rate`` a purchase is recorded as two approved
        records twenty minutes apart whose amounts add up to it; with
        probability ``decline_rate`` a declined attempt follows it.
        """
        if days <= 0:
            raise SimulationError(f"days must be positive, got {days}")
        self._validate(params, 1, seed)
        rng = self._generator(seed, 0)

        times = []
        t = float(self._draw(params.arrival_dist, rng, 1)[0])
        while t <= days:
            times.append(t)
            t += float(self._draw(params.arrival_dist, rng, 1)[0])
        amounts = np.round(self._draw(params.mark_dist, rng, len(times)), 2)

        records = []
        for t, amount in zip(times, amounts):
            if amount <= 0:
                continue
            ts = float(start_epoch + round(t * SECONDS_PER_DAY))
            if split_rate > 0 and amount >= 1.0 and rng.random() < split_rate:
                first = round(float(amount) * float(rng.uniform(0.2, 0.8)), 2)
                records.append(TransactionRecord(account_id, ts, first, merchant_category,
                                                 TransactionStatus.APPROVED))
                records.append(TransactionRecord(account_id, ts + 1200.0, round(float(amount) - first, 2),
                                                 merchant_category, TransactionStatus.APPROVED))
            else:
                records.append(TransactionRecord(account_id, ts, float(amount), merchant_category,
                                                 TransactionStatus.APPROVED))
            if decline_rate > 0 and rng.random() < decline_rate:
                reason = SYNTHETIC_DECLINE_REASONS[int(rng.integers(len(SYNTHETIC_DECLINE_REASONS)))]
                records.append(TransactionRecord(account_id, ts + 60.0, float(amount), merchant_category,
                                                 TransactionStatus.DECLINED, reason))

        records.sort(key=lambda r: r.timestamp)
        app_logger.info(f"Synthesized {len(records)} transactions over {days} days")
        return records
