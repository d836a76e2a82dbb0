import argparse
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

# Add src to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config.logging_config import enable_console_logging, setup_logging
from config.settings import (
    DEFAULT_ARRIVAL_RATE,
    DEFAULT_CLUSTER_WINDOW_SECS,
    DEFAULT_EXCLUDED_REASONS,
    DEFAULT_GAMMA,
    DEFAULT_INTEREST_FREE_DAYS,
    DEFAULT_LIMIT_HI,
    DEFAULT_LIMIT_LO,
    DEFAULT_MARK_RATE,
    DEFAULT_MARK_SHAPE,
    DEFAULT_NU,
    DEFAULT_PERIOD_DAYS,
    DEFAULT_ROUND_TO,
    Settings,
    get_settings,
)
from exceptions import (
    DataFileNotFoundError,
    FileEncodingError,
    RatioUnattainableError,
    SchemaMismatchError,
    TransLimError,
    UsageError,
)
from models.domain_models import (
    DistributionRole,
    DistributionSpec,
    EulerConfig,
    ModelParams,
    OutputFormat,
    PolicyKind,
    RunConfig,
    SchemaConfig,
    TableKind,
)
from repositories.transaction_repository import CsvTransactionRepository, JsonFitReportRepository
from services.balance_service import BalanceModelService
from services.fitting_service import FittingService
from services.inversion_service import EulerInversionService
from services.optimizer_service import LimitOptimizerService
from services.report_service import ReportService
from services.simulation_service import PolicySimulationService
from utils.logger import get_access_logger, get_app_logger, log_failure
from utils.ui_utils import UIHelper

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

USAGE_ERRORS = (UsageError, DataFileNotFoundError, FileEncodingError, SchemaMismatchError, OSError)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse parser that raises instead of exiting."""

    def error(self, message):
        raise UsageError(message)


class TransLimCLI:
    """Command-line front end: parses flags, wires the services, renders results."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        setup_logging(self.settings.log_dir, self.settings.log_level)

        self.app_logger = get_app_logger()
        self.access_logger = get_access_logger()

        inverter = EulerInversionService(
            EulerConfig(self.settings.euler_a, self.settings.euler_n, self.settings.euler_m))
        self.optimizer = LimitOptimizerService(BalanceModelService(inverter))
        self.simulator = PolicySimulationService()
        self.fitting = FittingService()
        self.reports = ReportService(self.optimizer)
        self.fit_reports = JsonFitReportRepository()

    # -- argument handling -----------------------------------------------

    def build_parser(self) -> argparse.ArgumentParser:
        parser = _ArgumentParser(prog="translim",
                                 description="Profit-maximising credit limits for transactor accounts")
        parser.add_argument("-v", "--verbose", action="store_true", help="echo the application log on stderr")
        sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_ArgumentParser)
        sub.required = True

        common = _ArgumentParser(add_help=False)
        econ = common.add_argument_group("economics")
        econ.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="interchange rate per dollar")
        econ.add_argument("--nu", type=float, default=DEFAULT_NU, help="funding cost per dollar of limit")
        econ.add_argument("--period", type=float, default=DEFAULT_PERIOD_DAYS, help="spending period in days")
        econ.add_argument("--interest-free", type=float, default=DEFAULT_INTEREST_FREE_DAYS,
                          help="interest-free days after the period")
        econ.add_argument("--limit-lo", type=float, default=DEFAULT_LIMIT_LO)
        econ.add_argument("--limit-hi", type=float, default=DEFAULT_LIMIT_HI)
        customer = common.add_argument_group("customer")
        customer.add_argument("--lambda", dest="arrival_rate", type=float, default=DEFAULT_ARRIVAL_RATE,
                              help="purchases per day")
        customer.add_argument("--mark-dist", choices=["exp", "gamma"], default="gamma")
        customer.add_argument("--mark-rate", type=float, default=DEFAULT_MARK_RATE, help="per dollar")
        customer.add_argument("--mark-shape", type=float, default=DEFAULT_MARK_SHAPE)
        customer.add_argument("--fit-report", help="FitReport JSON supplying lambda and the Gamma marks")
        output = common.add_argument_group("output")
        output.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.JSON.value)
        output.add_argument("--output", help="write to this file instead of stdout")

        fit = sub.add_parser("fit", parents=[common], help="fit arrival and purchase laws from a CSV")
        fit.add_argument("--input", required=True, help="transaction CSV")
        fit.add_argument("--category", help="merchant category to keep")
        fit.add_argument("--cluster-window-secs", type=float, default=DEFAULT_CLUSTER_WINDOW_SECS)
        fit.add_argument("--exclude-reason", action="append", help="decline reason to drop (repeatable)")
        fit.add_argument("--timezone", default="UTC", help="zone of ISO timestamps without offset")

        optimize = sub.add_parser("optimize", parents=[common], help="optimal, newsvendor and revised limits")
        optimize.add_argument("--original-limit", type=float, help="current limit (default: --limit-hi)")
        optimize.add_argument("--round-to", type=float, default=DEFAULT_ROUND_TO)

        evaluate = sub.add_parser("evaluate", parents=[common], help="model quantities at one limit")
        evaluate.add_argument("--limit", type=float, required=True)

        sub.add_parser("bounds", parents=[common], help="newsvendor and freeze bounds on the retrial optimum")

        simulate = sub.add_parser("simulate", parents=[common], help="Monte-Carlo policy simulation")
        simulate.add_argument("--limit", type=float, required=True)
        simulate.add_argument("--policy", choices=[p.value for p in PolicyKind], default=PolicyKind.FREEZE.value)
        simulate.add_argument("--seed", type=int, default=self.settings.seed)
        simulate.add_argument("--reps", type=int, default=self.settings.replications)

        tables = sub.add_parser("tables", parents=[common], help="5x5 grids over arrival rate and mean purchase")
        tables.add_argument("which", choices=[k.value for k in TableKind])
        return parser

    def params_from_args(self, args: argparse.Namespace) -> ModelParams:
        economics = dict(
            gamma_interchange=args.gamma,
            nu_funding=args.nu,
            period_days=args.period,
            interest_free_days=args.interest_free,
            limit_set_lo=args.limit_lo,
            limit_set_hi=args.limit_hi,
        )
        if args.fit_report:
            return ModelParams.from_fit_report(self.fit_reports.load(args.fit_report), **economics)
        if args.mark_dist == "exp":
            marks = DistributionSpec.exponential(args.mark_rate)
        else:
            marks = DistributionSpec.gamma(args.mark_shape, args.mark_rate)
        arrivals = DistributionSpec.exponential(args.arrival_rate, DistributionRole.INTER_ARRIVAL)
        return ModelParams(mark_dist=marks, arrival_dist=arrivals, **economics)

    def run_config(self, args: argparse.Namespace) -> RunConfig:
        options = {k: v for k, v in vars(args).items()
                   if k in ("category", "cluster_window_secs", "exclude_reason", "timezone", "original_limit",
                            "round_to", "limit", "policy", "which")}
        return RunConfig(
            command=args.command,
            params=self.params_from_args(args),
            seed=getattr(args, "seed", self.settings.seed),
            replications=getattr(args, "reps", self.settings.replications),
            output_format=OutputFormat(args.format),
            input_path=getattr(args, "input", None),
            output_path=args.output,
            options=options,
        )

    # -- output ----------------------------------------------------------

    def _emit(self, config: RunConfig, payload: Any, rows: List[Dict[str, Any]], tables) -> None:
        if config.output_format is OutputFormat.JSON:
            text = self.reports.to_json(payload) + "\n"
        elif config.output_format is OutputFormat.CSV:
            text = rows if isinstance(rows, str) else self.reports.rows_to_csv(rows)
        else:
            text = UIHelper.render_text(tables)
        if config.output_path:
            self.reports.export(text, config.output_path)
        else:
            sys.stdout.write(text)
            sys.stdout.flush()

    # -- commands --------------------------------------------------------

    def cmd_fit(self, config: RunConfig) -> int:
        opts = config.options
        repo = CsvTransactionRepository(SchemaConfig(timezone=opts.get("timezone") or "UTC"))
        batch = repo.load_transactions(config.input_path)
        for err in batch.errors:
            UIHelper.display_warning(f"Skipped row: {err}")
        series = self.fitting.prepare_series(
            batch.records,
            category_filter=opts.get("category"),
            exclusions=opts.get("exclude_reason") or DEFAULT_EXCLUDED_REASONS,
            cluster_window=opts.get("cluster_window_secs", DEFAULT_CLUSTER_WINDOW_SECS),
        )
        report = self.fitting.fit_report(series)
        data = report.to_dict()
        self._emit(config, data, [data], [UIHelper.key_value_table("Fit report", data)])
        return EXIT_OK

    def cmd_optimize(self, config: RunConfig) -> int:
        params = config.params
        opts = config.options
        freeze = self.optimizer.optimal_limit_freeze(params)
        try:
            newsvendor = self.optimizer.newsvendor_limit(params)
        except RatioUnattainableError as e:
            UIHelper.display_warning(f"No newsvendor bound: {e}")
            newsvendor = None
        if params.is_degenerate:
            UIHelper.display_warning("nu >= gamma: every extra dollar of limit loses money; "
                                     "reporting the lower end of the limit set")

        original = opts.get("original_limit") or params.limit_set_hi
        revised = self.optimizer.revised_limit(params, freeze.limit_star, opts.get("round_to") or DEFAULT_ROUND_TO)
        labelled = {"original": original, "optimal": freeze.limit_star, "revised": revised}
        comparison = self.reports.comparison_rows(params, {k: v for k, v in labelled.items() if v > 0})

        payload = {
            "freeze": freeze.to_dict(),
            "newsvendor": newsvendor.to_dict() if newsvendor else None,
            "bounds": {"lower": newsvendor.limit_star if newsvendor else None,
                       "upper": freeze.limit_star},
            "revised_limit": revised,
            "comparison": comparison,
        }
        solver_rows = [{"label": "freeze", **freeze.to_dict()}]
        if newsvendor:
            solver_rows.append({"label": "newsvendor", **newsvendor.to_dict()})
        tables = [UIHelper.rows_table("Optimal limits", solver_rows),
                  UIHelper.rows_table("Limit comparison", comparison)]
        self._emit(config, payload, comparison + solver_rows, tables)
        return EXIT_OK

    def cmd_evaluate(self, config: RunConfig) -> int:
        report = self.optimizer.evaluate_limit(config.params, config.options["limit"])
        data = report.to_dict()
        self._emit(config, data, [data], [UIHelper.key_value_table("Limit evaluation", data)])
        return EXIT_OK

    def cmd_bounds(self, config: RunConfig) -> int:
        bounds = self.optimizer.retrial_bounds(config.params)
        payload = {**bounds.to_dict(),
                   "newsvendor": bounds.lower_result.to_dict(),
                   "freeze": bounds.upper_result.to_dict()}
        self._emit(config, payload, [bounds.to_dict()],
                   [UIHelper.key_value_table("Retrial-policy optimum bounds", bounds.to_dict())])
        return EXIT_OK

    def cmd_simulate(self, config: RunConfig) -> int:
        opts = config.options
        report = self.simulator.simulate_policy(config.params, opts["limit"], PolicyKind(opts["policy"]),
                                                config.replications, config.seed)
        data = report.to_dict()
        self._emit(config, data, [data], [UIHelper.key_value_table("Simulation", data)])
        return EXIT_OK

    def cmd_tables(self, config: RunConfig) -> int:
        params = config.params
        grid = self.reports.build_table(TableKind(config.options["which"]),
                                        gamma_interchange=params.gamma_interchange,
                                        nu_funding=params.nu_funding,
                                        period_days=params.period_days)
        self._emit(config, grid.to_dict(), self.reports.table_to_csv(grid), [UIHelper.grid_table(grid)])
        for failure in grid.failures:
            UIHelper.display_error(failure)
        return EXIT_FAILURE if grid.failures else EXIT_OK

    # -- entry -----------------------------------------------------------

    def run(self, argv: Sequence[str]) -> int:
        args = self.build_parser().parse_args(list(argv))
        if args.verbose:
            enable_console_logging()
        self.access_logger.info(f"Command {args.command} invoked with arguments {list(argv)}")
        config = self.run_config(args)
        handler = getattr(self, f"cmd_{config.command}")
        code = handler(config)
        self.app_logger.info(f"Command {config.command} finished with exit code {code}")
        return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return TransLimCLI().run(argv)
    except USAGE_ERRORS as e:
        UIHelper.display_error(log_failure(e))
        return EXIT_USAGE
    except TransLimError as e:
        UIHelper.display_error(log_failure(e))
        return EXIT_FAILURE
    except Exception as e:
        UIHelper.display_error(log_failure(e, unexpected=True))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
