from typing import Any, Dict, List, Optional, Sequence
import csv
import io
import json
import logging
import math
import os

from config.settings import DEFAULT_GAMMA, DEFAULT_NU, DEFAULT_PERIOD_DAYS
from exceptions import TransLimError
from models.domain_models import (
    DistributionRole,
    DistributionSpec,
    LimitReport,
    ModelParams,
    TableGrid,
    TableKind,
)
from services.optimizer_service import LimitOptimizerService

# Get loggers
app_logger = logging.getLogger('app')
error_logger = logging.getLogger('error')

TABLE_ARRIVAL_RATES = [1.0, 2.0, 3.0, 4.0, 5.0]
TABLE_MEAN_MARKS = [20.0, 40.0, 60.0, 80.0, 100.0]
# each table cell searches (0, LIMIT_SET_SPEND_MULTIPLE * E[A(T)]]
LIMIT_SET_SPEND_MULTIPLE = 10.0


def _clean(value: Any) -> Any:
    """NaN and infinities become None; nested containers are cleaned recursively."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _flatten(row: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in row.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "NaN" if math.isnan(value) else repr(value)
    return str(value)


class ReportService:
    """Table reproduction grids, comparison rows and JSON/CSV rendering."""

    def __init__(self, optimizer: Optional[LimitOptimizerService] = None):
        self.optimizer = optimizer or LimitOptimizerService()
        app_logger.info("ReportService initialized")

    # -- tables ----------------------------------------------------------

    @staticmethod
    def cell_params(arrival_rate: float, mean_mark: float,
                    gamma_interchange: float = DEFAULT_GAMMA, nu_funding: float = DEFAULT_NU,
                    period_days: float = DEFAULT_PERIOD_DAYS) -> ModelParams:
        """Exponential-mark parameters of one grid cell with its own limit set."""
        spend = arrival_rate * period_days * mean_mark
        return ModelParams(
            gamma_interchange=gamma_interchange,
            nu_funding=nu_funding,
            period_days=period_days,
            mark_dist=DistributionSpec.exponential(1.0 / mean_mark),
            arrival_dist=DistributionSpec.exponential(arrival_rate, DistributionRole.INTER_ARRIVAL),
            limit_set_hi=LIMIT_SET_SPEND_MULTIPLE * spend,
        )

    def _cell_value(self, kind: TableKind, params: ModelParams) -> float:
        if kind is TableKind.OPTIMAL:
            return self.optimizer.optimal_limit_freeze(params).limit_star
        if kind is TableKind.DECLINE:
            return self.optimizer.optimal_limit_freeze(params).decline_prob_at_star
        if kind is TableKind.NEWSVENDOR:
            return self.optimizer.newsvendor_limit(params).limit_star
        freeze = self.optimizer.optimal_limit_freeze(params).limit_star
        return freeze - self.optimizer.newsvendor_limit(params).limit_star

    def build_table(self, kind: TableKind,
                    arrival_rates: Sequence[float] = TABLE_ARRIVAL_RATES,
                    mean_marks: Sequence[float] = TABLE_MEAN_MARKS,
                    gamma_interchange: float = DEFAULT_GAMMA, nu_funding: float = DEFAULT_NU,
                    period_days: float = DEFAULT_PERIOD_DAYS) -> TableGrid:
        """Grid of ``kind`` values; a failing cell is NaN and its error is listed."""
        app_logger.info(f"Building {kind.value} table over {len(arrival_rates)}x{len(mean_marks)} cells")
        values, failures = [], []
        for lam in arrival_rates:
            row = []
            for mean_mark in mean_marks:
                try:
                    params = self.cell_params(lam, mean_mark, gamma_interchange, nu_funding, period_days)
                    row.append(float(self._cell_value(kind, params)))
                except TransLimError as e:
                    error_logger.error(f"{kind.value} cell (lambda={lam}, mean={mean_mark}) failed: {e}")
                    failures.append(f"lambda={lam:g}, mean_mark={mean_mark:g}: {type(e).__name__}: {e}")
                    row.append(math.nan)
            values.append(row)
        return TableGrid(kind=kind, arrival_rates=list(arrival_rates), mean_marks=list(mean_marks),
                         values=values, failures=failures)

    # -- calibration comparison -----------------------------------------

    def comparison_rows(self, params: ModelParams, limits: Dict[str, float]) -> List[Dict[str, Any]]:
        """One evaluate_limit row per labelled limit, e.g. original / optimal / revised."""
        rows = []
        for label, limit in limits.items():
            report: LimitReport = self.optimizer.evaluate_limit(params, limit)
            rows.append({"label": label, **report.to_dict()})
        return rows

    # -- rendering -------------------------------------------------------

    @staticmethod
    def to_json(payload: Any) -> str:
        return json.dumps(_clean(payload), indent=2, allow_nan=False)

    @staticmethod
    def rows_to_csv(rows: List[Dict[str, Any]]) -> str:
        flat = [_flatten(row) for row in rows]
        fieldnames: List[str] = []
        for row in flat:
            fieldnames.extend(k for k in row if k not in fieldnames)
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        for row in flat:
            writer.writerow({k: _csv_cell(row.get(k)) for k in fieldnames})
        return buffer.getvalue()

    @staticmethod
    def table_to_csv(grid: TableGrid) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(["arrival_rate"] + [f"mean_mark_{m:g}" for m in grid.mean_marks])
        for lam, row in zip(grid.arrival_rates, grid.values):
            writer.writerow([_csv_cell(float(lam))] + [_csv_cell(v) for v in row])
        return buffer.getvalue()

    @staticmethod
    def export(text: str, filepath: str) -> None:
        """Write rendered output to ``filepath`` as UTF-8."""
        app_logger.info(f"Writing report to {filepath}")
        directory = os.path.dirname(filepath)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(filepath, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
