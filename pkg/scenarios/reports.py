"""
Reports: per-check verdicts, numeric tables and timing for one scenario run.

The JSON body is written with sorted keys; timing fields (the ``timing`` block
and every ``runtime_ms`` column) are the only parts allowed to differ between
two runs of the same scenario.
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from io import BytesIO
from pathlib import Path

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER, TA_LEFT
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from tensorcore.exceptions import WorkbenchError

logger = logging.getLogger(__name__)

PLOT_KINDS = ("convergence", "trajectory")
TIMING_COLUMNS = ("runtime_ms",)


class MissingTableError(WorkbenchError):
    """A report does not hold the table asked for."""


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def as_dict(self):
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class Report:
    scenario: str
    experiment: str
    scenario_hash: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def failures(self):
        return [check for check in self.checks if not check.passed]

    def check(self, name, value, tolerance):
        """Record ``value ≤ tolerance``."""
        value, tolerance = float(value), float(tolerance)
        entry = Check(name, value, tolerance, bool(value <= tolerance))
        self.checks.append(entry)
        if not entry.passed:
            logger.warning("check %s failed: %.3e > %.3e", name, value, tolerance)
        return entry

    def table(self, name, columns, rows):
        self.tables[name] = {"columns": list(columns), "rows": [[_plain(v) for v in row] for row in rows]}

    def body(self):
        """The deterministic part of the report."""
        tables = {}
        for name, table in self.tables.items():
            keep = [i for i, c in enumerate(table["columns"]) if c not in TIMING_COLUMNS]
            tables[name] = {
                "columns": [table["columns"][i] for i in keep],
                "rows": [[row[i] for i in keep] for row in table["rows"]],
            }
        return {
            "scenario": self.scenario,
            "experiment": self.experiment,
            "scenario_hash": self.scenario_hash,
            "passed": self.passed,
            "checks": [check.as_dict() for check in self.checks],
            "tables": tables,
            "diagnostics": self.diagnostics,
        }

    def to_json(self):
        document = self.body()
        document["tables"] = self.tables
        document["timing"] = self.timing
        return json.dumps(document, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        report = cls(
            scenario=data["scenario"],
            experiment=data["experiment"],
            scenario_hash=data["scenario_hash"],
            tables=data.get("tables", {}),
            diagnostics=data.get("diagnostics", {}),
            timing=data.get("timing", {}),
        )
        report.checks = [Check(**check) for check in data.get("checks", [])]
        return report


def _plain(value):
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def read_report(path):
    path = Path(path)
    try:
        return Report.from_json(path.read_text())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise WorkbenchError(f"{path} is not a readable report: {exc}") from exc


def write_table(path, table):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(table["columns"])
        for row in table["rows"]:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def emit_plot_data(report, kind, out_dir):
    """One CSV file for the ``kind`` table of ``report``."""
    table = report.tables.get(kind)
    if table is None:
        raise MissingTableError(f"report {report.scenario!r} has no {kind} table")
    path = write_table(Path(out_dir) / f"{report.scenario}-{kind}.csv", table)
    logger.info("%s table (%d rows) written to %s", kind, len(table["rows"]), path)
    return path


def write_report(report, out_dir):
    """The JSON report, one CSV per table and any snapshot artifacts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{report.scenario}.json"
    path.write_text(report.to_json())
    written = [path]
    for kind in report.tables:
        written.append(emit_plot_data(report, kind, out_dir))
    for name, writer in report.artifacts.items():
        written.append(writer(out_dir / f"{report.scenario}-{name}"))
    return written


# ---------------------------------------------------------
# PDF summary
# ---------------------------------------------------------

def render_summary_pdf(report):
    """One-page verification summary as PDF bytes."""
    buffer = BytesIO()
    doc = SimpleDocTemplate(buffer, pagesize=A4, topMargin=0.5 * inch, bottomMargin=0.5 * inch)
    elements = []

    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        "SummaryTitle",
        parent=styles["Heading1"],
        fontSize=20,
        textColor=colors.HexColor("#1a5490"),
        spaceAfter=16,
        alignment=TA_CENTER,
        fontName="Helvetica-Bold",
    )
    detail_style = ParagraphStyle(
        "SummaryDetail",
        parent=styles["Normal"],
        fontSize=9,
        textColor=colors.grey,
        alignment=TA_LEFT,
    )

    elements.append(Paragraph(f"Scenario {report.scenario}", title_style))
    verdict = "all checks passed" if report.passed else f"{len(report.failures())} check(s) failed"
    elements.append(Paragraph(f"<b>Experiment:</b> {report.experiment} ({verdict})", styles["Normal"]))
    elements.append(Spacer(1, 0.2 * inch))

    data = [["Check", "Value", "Tolerance", "Result"]]
    for check in report.checks:
        data.append([check.name, f"{check.value:.3e}", f"{check.tolerance:.3e}", "pass" if check.passed else "FAIL"])
    table = Table(data, colWidths=[3.2 * inch, 1.1 * inch, 1.1 * inch, 0.7 * inch], repeatRows=1)
    style = [
        ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
        ("FONTSIZE", (0, 0), (-1, -1), 8),
        ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#e2e8f0")),
        ("GRID", (0, 0), (-1, -1), 0.25, colors.grey),
        ("ALIGN", (1, 0), (-1, -1), "RIGHT"),
    ]
    for row, check in enumerate(report.checks, start=1):
        if not check.passed:
            style.append(("TEXTCOLOR", (0, row), (-1, row), colors.red))
    table.setStyle(TableStyle(style))
    elements.append(table)
    elements.append(Spacer(1, 0.3 * inch))

    elements.append(Paragraph(f"<b>Scenario hash:</b> {report.scenario_hash}", detail_style))
    for key, value in sorted(report.timing.items()):
        elements.append(Paragraph(f"<b>{key}:</b> {value:.1f}", detail_style))

    doc.build(elements)
    pdf = buffer.getvalue()
    buffer.close()
    return pdf
