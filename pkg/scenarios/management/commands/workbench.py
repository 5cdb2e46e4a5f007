from pathlib import Path

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from scenarios.config import fixture_names, load_fixture, output_dir, read_scenario
from scenarios.reports import PLOT_KINDS, MissingTableError, emit_plot_data, read_report, render_summary_pdf, write_report
from scenarios.runners import run_scenario
from tensorcore.exceptions import WorkbenchError

CHECK_FAILED = 1
INVALID_SCENARIO = 2


def _ladder(text):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValidationError({"eps_ladder": [ValidationError(f"{text!r} is not a comma separated list of numbers.")]})


def _describe(error):
    if hasattr(error, "message_dict"):
        return "; ".join(f"{field}: {' '.join(messages)}" for field, messages in sorted(error.message_dict.items()))
    return " ".join(error.messages)


class Command(BaseCommand):
    help = "Run kinetic workbench scenarios and turn their reports into plot data or PDF summaries."

    def add_arguments(self, parser):
        sub = parser.add_subparsers(dest="action", required=True)

        run = sub.add_parser("run", help="Run one scenario file.")
        run.add_argument("scenario", help="Path to a scenario JSON file.")
        self._overrides(run)

        check = sub.add_parser("check", help="Run the shipped fixture suite.")
        check.add_argument("fixtures", nargs="*", help="Fixture names (default: all).")
        self._overrides(check)

        plot = sub.add_parser("plot", help="Write one table of a report as CSV.")
        plot.add_argument("report", help="Path to a JSON report.")
        plot.add_argument("kind", choices=PLOT_KINDS)
        plot.add_argument("--out-dir", default=None)

        summary = sub.add_parser("summary", help="Render a one-page PDF summary of a report.")
        summary.add_argument("report", help="Path to a JSON report.")
        summary.add_argument("--out-dir", default=None)

    def _overrides(self, parser):
        parser.add_argument("--n-max", type=int, default=None)
        parser.add_argument("--eps-ladder", default=None, help="Comma separated, strictly decreasing.")
        parser.add_argument("--out-dir", default=None)

    def handle(self, *args, **options):
        action = options["action"]
        try:
            return getattr(self, f"handle_{action}")(options)
        except ValidationError as exc:
            raise CommandError(f"invalid scenario: {_describe(exc)}", returncode=INVALID_SCENARIO)
        except (MissingTableError, FileNotFoundError) as exc:
            raise CommandError(str(exc), returncode=INVALID_SCENARIO)
        except WorkbenchError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=CHECK_FAILED)

    def _apply_overrides(self, scenario, options):
        ladder = _ladder(options["eps_ladder"]) if options.get("eps_ladder") else None
        if options.get("n_max") is None and ladder is None:
            return scenario
        return scenario.with_overrides(n_max=options.get("n_max"), eps_ladder=ladder)

    def _run(self, scenario, out_dir):
        report = run_scenario(scenario)
        paths = write_report(report, out_dir)
        for check in report.checks:
            line = f"  {check.name}: {check.value:.3e} (<= {check.tolerance:.3e})"
            self.stdout.write(line if check.passed else self.style.ERROR(line))
        verdict = self.style.SUCCESS("passed") if report.passed else self.style.ERROR("FAILED")
        self.stdout.write(f"{scenario.name}: {verdict}, report at {paths[0]}")
        return report

    def handle_run(self, options):
        path = Path(options["scenario"])
        if not path.exists():
            raise ValidationError({"scenario": [ValidationError(f"{path} does not exist.")]})
        scenario = self._apply_overrides(read_scenario(path), options)
        report = self._run(scenario, output_dir(options["out_dir"]))
        if not report.passed:
            raise CommandError(f"{len(report.failures())} check(s) failed", returncode=CHECK_FAILED)

    def handle_check(self, options):
        names = options["fixtures"] or fixture_names()
        unknown = sorted(set(names) - set(fixture_names()))
        if unknown:
            raise ValidationError({"fixtures": [ValidationError(f"unknown fixture {name!r}") for name in unknown]})
        out_dir = output_dir(options["out_dir"])
        failed = []
        for name in names:
            scenario = self._apply_overrides(load_fixture(name), options)
            if not self._run(scenario, out_dir).passed:
                failed.append(name)
        if failed:
            raise CommandError(f"failing fixtures: {', '.join(failed)}", returncode=CHECK_FAILED)
        self.stdout.write(self.style.SUCCESS(f"{len(names)} fixture(s) passed"))

    def handle_plot(self, options):
        report = read_report(options["report"])
        out_dir = output_dir(options["out_dir"] or Path(options["report"]).parent)
        path = emit_plot_data(report, options["kind"], out_dir)
        self.stdout.write(str(path))

    def handle_summary(self, options):
        report = read_report(options["report"])
        out_dir = output_dir(options["out_dir"] or Path(options["report"]).parent)
        path = out_dir / f"{report.scenario}-summary.pdf"
        path.write_bytes(render_summary_pdf(report))
        self.stdout.write(self.style.SUCCESS(f"summary written to {path}"))
