import io
import json
import os
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from unittest.mock import patch

from cli_main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from models.domain_models import DistributionRole, DistributionSpec, ModelParams
from repositories.transaction_repository import CsvTransactionRepository
from services.simulation_service import PolicySimulationService


class TestCLI(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.env = patch.dict(os.environ, {"TRANSLIM_LOG_DIR": os.path.join(self.tmp.name, "logs")})
        self.env.start()

    def tearDown(self):
        self.env.stop()
        self.tmp.cleanup()

    def invoke(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()

    def write_transactions(self, records):
        path = os.path.join(self.tmp.name, "tx.csv")
        CsvTransactionRepository().save_records(path, records)
        return path

    def test_evaluate_revised_limit(self):
        code, out, _ = self.invoke("evaluate", "--limit", "1000")
        self.assertEqual(code, EXIT_OK)
        data = json.loads(out)
        self.assertEqual(data["limit"], 1000.0)
        self.assertAlmostEqual(data["decline_probability"], 0.0857, delta=2e-3)

    def test_optimize_reports_revised_limit(self):
        code, out, _ = self.invoke("optimize")
        self.assertEqual(code, EXIT_OK)
        data = json.loads(out)
        self.assertAlmostEqual(data["freeze"]["limit_star"], 973.81, delta=1.0)
        self.assertAlmostEqual(data["bounds"]["lower"], 947.83, delta=1.0)
        self.assertEqual(data["revised_limit"], 1000.0)
        self.assertEqual([row["label"] for row in data["comparison"]], ["original", "optimal", "revised"])

    def test_missing_required_flag(self):
        code, out, err = self.invoke("evaluate")
        self.assertEqual(code, EXIT_USAGE)
        self.assertEqual(out, "")
        self.assertIn("UsageError", err)

    def test_missing_input_file(self):
        code, _, err = self.invoke("fit", "--input", os.path.join(self.tmp.name, "absent.csv"))
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("DataFileNotFoundError", err)

    def test_input_that_is_not_utf8(self):
        path = os.path.join(self.tmp.name, "tx.csv")
        with open(path, 'wb') as f:
            f.write(b"account_id,ts,amount,mcc_category,status\na,1,2.50,\xe9picerie,approved\n")
        code, out, err = self.invoke("fit", "--input", path)
        self.assertEqual(code, EXIT_USAGE)
        self.assertEqual(out, "")
        self.assertIn("FileEncodingError", err)

    def test_nothing_left_after_filter(self):
        path = self.write_transactions(PolicySimulationService().synthesize_transactions(
            ModelParams(0.0054, 0.0007, 30.0, DistributionSpec.exponential(0.05),
                        DistributionSpec.exponential(1.0, DistributionRole.INTER_ARRIVAL)),
            20.0, 3, merchant_category="fuel"))
        code, _, err = self.invoke("fit", "--input", path, "--category", "groceries")
        self.assertEqual(code, EXIT_FAILURE)
        self.assertIn("EmptySeriesAfterFilterError", err)

    def test_fit_then_optimize_from_report(self):
        params = ModelParams(0.0054, 0.0007, 30.0, DistributionSpec.gamma(2.8946, 0.0769),
                             DistributionSpec.exponential(0.6451, DistributionRole.INTER_ARRIVAL))
        path = self.write_transactions(
            PolicySimulationService().synthesize_transactions(params, 475.0, 11, decline_rate=0.05))
        report_path = os.path.join(self.tmp.name, "fit.json")
        code, out, _ = self.invoke("fit", "--input", path, "--output", report_path)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out, "")
        with open(report_path, encoding='utf-8') as f:
            report = json.load(f)
        self.assertGreater(report["n_obs"], 200)

        code, out, _ = self.invoke("bounds", "--fit-report", report_path)
        self.assertEqual(code, EXIT_OK)
        bounds = json.loads(out)
        self.assertLess(bounds["lower"], bounds["upper"])

    def test_simulate_is_deterministic(self):
        argv = ("simulate", "--limit", "900", "--reps", "2000", "--seed", "5", "--policy", "retrial")
        first = self.invoke(*argv)
        second = self.invoke(*argv)
        self.assertEqual(first[0], EXIT_OK)
        self.assertEqual(first[1], second[1])
        self.assertEqual(json.loads(first[1])["policy"], "retrial")

    def test_tables_as_csv(self):
        code, out, _ = self.invoke("tables", "decline", "--format", "csv")
        self.assertEqual(code, EXIT_OK)
        lines = out.splitlines()
        self.assertEqual(len(lines), 6)
        self.assertTrue(lines[0].startswith("arrival_rate,mean_mark_20"))

    def test_pretty_output(self):
        code, out, _ = self.invoke("evaluate", "--limit", "1000", "--format", "pretty")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Limit evaluation", out)
        self.assertIn("1000.00", out)

    def test_verbose_echoes_log_on_stderr(self):
        code, out, err = self.invoke("--verbose", "evaluate", "--limit", "1000")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("finished", err)
        self.assertEqual(json.loads(out)["limit"], 1000.0)

    def test_unknown_log_level(self):
        with patch.dict(os.environ, {"TRANSLIM_LOG_LEVEL": "CHATTY"}):
            code, _, err = self.invoke("evaluate", "--limit", "1000")
        self.assertEqual(code, EXIT_FAILURE)
        self.assertIn("ConfigurationError", err)

    def test_command_is_logged(self):
        self.invoke("evaluate", "--limit", "1000")
        with open(os.path.join(self.tmp.name, "logs", "access.log"), encoding='utf-8') as f:
            self.assertIn("Command evaluate", f.read())


if __name__ == '__main__':
    unittest.main()
