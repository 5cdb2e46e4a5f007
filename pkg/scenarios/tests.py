import copy
import importlib
import json
import os
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from kinetic_workbench import settings as project_settings

from .config import DEFAULT_TOLERANCES, fixture_names, load_fixture, load_scenario, read_scenario
from .reports import MissingTableError, Report, emit_plot_data, read_report, render_summary_pdf, write_report
from .runners import run_scenario


def short_continuum():
    raw = copy.deepcopy(load_fixture("continuum_c").raw)
    raw["name"] = "continuum_short"
    raw["continuum"]["t_end"] = 0.05
    return raw


class TemporaryDirectoryMixin:

    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)


class ScenarioLoadingTests(SimpleTestCase):

    def test_fixtures_validate(self):
        names = fixture_names()
        self.assertIn("standard_a", names)
        self.assertIn("continuum_c", names)
        for name in names:
            scenario = load_fixture(name)
            self.assertEqual(scenario.name, name)

    def test_fixture_norms(self):
        self.assertAlmostEqual(load_fixture("standard_a").datum.norm, 0.01)
        self.assertAlmostEqual(load_fixture("standard_a_dense").datum.norm, 0.1)
        self.assertTrue(load_fixture("chaos_b").correlations.is_chaos)

    def test_hash_is_stable(self):
        a, b = load_fixture("standard_a"), load_fixture("standard_a")
        self.assertEqual(a.hash, b.hash)
        self.assertNotEqual(a.hash, load_fixture("standard_a_dense").hash)

    def test_unknown_experiment(self):
        raw = copy.deepcopy(load_fixture("standard_a").raw)
        raw["experiment"] = "teleportation"
        with self.assertRaises(ValidationError) as ctx:
            load_scenario(raw)
        self.assertIn("experiment", ctx.exception.message_dict)

    def test_every_violation_is_listed(self):
        raw = copy.deepcopy(load_fixture("standard_a").raw)
        raw["epsilon"] = -1.0
        raw["n_max"] = 9
        raw["eps_ladder"] = [0.1, 0.2]
        raw["kinetic"] = [[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
        del raw["f1_0"]
        with self.assertRaises(ValidationError) as ctx:
            load_scenario(raw)
        self.assertEqual(
            sorted(ctx.exception.message_dict),
            ["eps_ladder", "epsilon", "f1_0", "kinetic", "n_max"],
        )

    def test_limit_scenarios_scale_by_epsilon(self):
        scenario = load_fixture("standard_a_ladder").with_overrides(epsilon=0.25)
        self.assertAlmostEqual(scenario.datum.norm, 0.04)

    def test_overrides_are_validated(self):
        scenario = load_fixture("standard_a_ladder")
        self.assertEqual(scenario.with_overrides(eps_ladder=[0.5, 0.25]).eps_ladder, (0.5, 0.25))
        self.assertEqual(scenario.with_overrides(n_max=None).n_max, scenario.n_max)
        with self.assertRaises(ValidationError):
            scenario.with_overrides(eps_ladder=[0.25, 0.5])

    def test_continuum_block(self):
        raw = short_continuum()
        raw["continuum"]["points"] = 48
        raw["continuum"]["kernel_points"] = 64
        with self.assertRaises(ValidationError) as ctx:
            load_scenario(raw)
        self.assertEqual(len(ctx.exception.message_dict["continuum"]), 2)

    def test_tolerances(self):
        raw = copy.deepcopy(load_fixture("standard_a").raw)
        raw["tolerances"] = {"kce": 1e-6}
        scenario = load_scenario(raw)
        self.assertEqual(scenario.tolerance("kce"), 1e-6)
        self.assertEqual(scenario.tolerance("trace"), DEFAULT_TOLERANCES["trace"])

    def test_unreadable_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "broken.json"
            path.write_text("{not json")
            with self.assertRaises(ValidationError):
                read_scenario(path)


class ReportTests(TemporaryDirectoryMixin, SimpleTestCase):

    def report(self):
        report = Report("demo", "meanfield-ladder", "abc")
        report.check("small", 1e-12, 1e-10)
        report.check("large", 1.0, 1e-10)
        report.table("convergence", ("epsilon", "t", "distance", "tail_estimate", "runtime_ms"), [(0.5, 0.5, 1e-3, 0.0, 12.5)])
        report.timing["elapsed_ms"] = 99.0
        return report

    def test_verdicts(self):
        report = self.report()
        self.assertFalse(report.passed)
        self.assertEqual([c.name for c in report.failures()], ["large"])

    def test_body_leaves_out_timing(self):
        body = self.report().body()
        self.assertNotIn("timing", body)
        self.assertEqual(body["tables"]["convergence"]["columns"], ["epsilon", "t", "distance", "tail_estimate"])
        self.assertEqual(body["tables"]["convergence"]["rows"], [[0.5, 0.5, 1e-3, 0.0]])

    def test_json_is_sorted_and_readable(self):
        text = self.report().to_json()
        self.assertEqual(list(json.loads(text)), sorted(json.loads(text)))
        path = self.out / "demo.json"
        path.write_text(text)
        again = read_report(path)
        self.assertEqual(again.body(), self.report().body())

    def test_plot_data(self):
        path = emit_plot_data(self.report(), "convergence", self.out)
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "epsilon,t,distance,tail_estimate,runtime_ms")
        self.assertEqual(len(lines), 2)

    def test_empty_table_has_header(self):
        report = Report("empty", "meanfield-ladder", "abc")
        report.table("convergence", ("epsilon", "t", "distance", "tail_estimate", "runtime_ms"), [])
        lines = emit_plot_data(report, "convergence", self.out).read_text().splitlines()
        self.assertEqual(lines, ["epsilon,t,distance,tail_estimate,runtime_ms"])

    def test_missing_table(self):
        with self.assertRaises(MissingTableError):
            emit_plot_data(self.report(), "trajectory", self.out)

    def test_summary_pdf(self):
        self.assertTrue(render_summary_pdf(self.report()).startswith(b"%PDF"))

    def test_written_files(self):
        names = sorted(p.name for p in write_report(self.report(), self.out))
        self.assertEqual(names, ["demo-convergence.csv", "demo.json"])


class RunnerTests(TemporaryDirectoryMixin, SimpleTestCase):

    def test_continuum(self):
        report = run_scenario(load_scenario(short_continuum()))
        self.assertTrue(report.passed, report.failures())
        self.assertEqual(report.tables["trajectory"]["columns"], ["t", "mass", "energy", "max_abs_psi"])
        self.assertEqual(len(report.tables["trajectory"]["rows"]), 51)
        names = sorted(p.name for p in write_report(report, self.out))
        self.assertIn("continuum_short-psi.bin", names)
        self.assertIn("continuum_short-gp.csv", names)

    def test_deterministic_bodies(self):
        scenario = load_scenario(short_continuum())
        first = json.dumps(run_scenario(scenario).body(), sort_keys=True)
        second = json.dumps(run_scenario(scenario).body(), sort_keys=True)
        self.assertEqual(first, second)

    def test_identities(self):
        report = run_scenario(load_fixture("standard_a"))
        self.assertTrue(report.passed, report.failures())
        self.assertGreater(len(report.checks), 40)

    def test_equivalence(self):
        report = run_scenario(load_fixture("standard_a_equivalence"))
        self.assertTrue(report.passed, report.failures())
        equivalence = {c.name: c for c in report.checks if c.name.startswith("equivalence")}
        self.assertEqual(sorted(equivalence), ["equivalence s=2 t=0.1", "equivalence s=2 t=0.5"])
        self.assertLess(equivalence["equivalence s=2 t=0.5"].tolerance, 1e-14)
        self.assertEqual(report.tables["trajectory"]["columns"], ["t", "trace", "trace_norm", "min_eig"])

    def test_meanfield_ladder(self):
        report = run_scenario(load_fixture("standard_a_ladder"))
        self.assertTrue(report.passed, report.failures())
        self.assertEqual([row[0] for row in report.tables["convergence"]["rows"]], [0.5, 0.25, 0.125, 0.0625])
        self.assertIn("iteration series against integration (uncorrelated)", [c.name for c in report.checks])
        self.assertIn("series_closure_gap", report.diagnostics)

    def test_propagation(self):
        scenario = load_fixture("standard_a_propagation").with_overrides(eps_ladder=[0.5, 0.25, 0.125])
        report = run_scenario(scenario)
        self.assertTrue(report.passed, report.failures())
        self.assertEqual(len(report.tables["convergence"]["rows"]), 3)
        self.assertEqual(len(report.tables["chaos_control"]["rows"]), 3)


class CommandTests(TemporaryDirectoryMixin, SimpleTestCase):

    def scenario_file(self, raw):
        path = self.out / f"{raw['name']}.json"
        path.write_text(json.dumps(raw))
        return path

    def test_run_plot_and_summary(self):
        path = self.scenario_file(short_continuum())
        call_command("workbench", "run", str(path), "--out-dir", str(self.out), stdout=StringIO())
        report_path = self.out / "continuum_short.json"
        self.assertTrue(report_path.exists())
        call_command("workbench", "plot", str(report_path), "trajectory", stdout=StringIO())
        self.assertTrue((self.out / "continuum_short-trajectory.csv").exists())
        call_command("workbench", "summary", str(report_path), stdout=StringIO())
        self.assertTrue((self.out / "continuum_short-summary.pdf").read_bytes().startswith(b"%PDF"))

    def test_plot_missing_table(self):
        path = self.scenario_file(short_continuum())
        call_command("workbench", "run", str(path), "--out-dir", str(self.out), stdout=StringIO())
        with self.assertRaises(CommandError) as ctx:
            call_command("workbench", "plot", str(self.out / "continuum_short.json"), "convergence")
        self.assertEqual(ctx.exception.returncode, 2)

    def test_invalid_scenario_exits_with_two(self):
        raw = short_continuum()
        raw["experiment"] = "unknown"
        path = self.scenario_file(raw)
        with self.assertRaises(CommandError) as ctx:
            call_command("workbench", "run", str(path), "--out-dir", str(self.out))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertEqual(list(self.out.glob("*.csv")), [])

    def test_failed_check_exits_with_one(self):
        raw = short_continuum()
        raw["tolerances"] = {"ratio": 1e-9}
        path = self.scenario_file(raw)
        with self.assertRaises(CommandError) as ctx:
            call_command("workbench", "run", str(path), "--out-dir", str(self.out), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 1)

    def test_bad_ladder_flag(self):
        path = self.scenario_file(copy.deepcopy(load_fixture("standard_a_ladder").raw))
        with self.assertRaises(CommandError) as ctx:
            call_command("workbench", "run", str(path), "--eps-ladder", "0.1,0.5", "--out-dir", str(self.out))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_unknown_fixture(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("workbench", "check", "no_such_fixture", "--out-dir", str(self.out))
        self.assertEqual(ctx.exception.returncode, 2)


class SettingsTests(SimpleTestCase):

    def test_only_threads_come_from_the_environment(self):
        env = {
            "WORKBENCH_THREADS": "3",
            "WORKBENCH_OUTPUT_DIR": "/elsewhere",
            "WORKBENCH_LOG_LEVEL": "DEBUG",
            "WORKBENCH_DEBUG": "1",
        }
        self.addCleanup(importlib.reload, project_settings)
        with mock.patch.dict(os.environ, env):
            importlib.reload(project_settings)
        self.assertEqual(project_settings.WORKBENCH["THREADS"], 3)
        self.assertEqual(project_settings.WORKBENCH["OUTPUT_DIR"], project_settings.BASE_DIR / "reports")
        self.assertEqual(project_settings.LOG_LEVEL, "INFO")
        self.assertFalse(project_settings.DEBUG)
