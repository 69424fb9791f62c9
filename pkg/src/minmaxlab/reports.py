"""Run reports and their deterministic JSON, CSV and Markdown renderings.

Wall time is kept on the report object but never written, so two runs with
the same config and seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

from .serialization import format_float

FORMATS = ("json", "csv", "markdown")
SUFFIX = {"json": "json", "csv": "csv", "markdown": "md"}


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    relation: str = "<="


@dataclass
class RunReport:
    command: str
    verdict: str
    seed: int
    version: str
    parameters: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    flow: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    wall_time: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "verdict": self.verdict,
            "seed": self.seed,
            "version": self.version,
            "parameters": self.parameters,
            "summary": self.summary,
            "checks": [
                {"name": c.name, "value": c.value, "relation": c.relation, "bound": c.bound, "passed": c.passed}
                for c in self.checks
            ],
            "rows": self.rows,
            "flow": self.flow,
            "files": self.files,
            "flags": self.flags,
        }


def verdict_of(checks) -> str:
    return "pass" if all(c.passed for c in checks) else "fail"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def _short(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return _cell(value)


def render_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def render_csv(report: RunReport) -> str:
    """Table rows when the run has them (one per model for ``tsr``), else one row per check."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if report.rows:
        header = list(report.rows[0])
        writer.writerow(header)
        for row in report.rows:
            writer.writerow([_cell(row[h]) for h in header])
    else:
        writer.writerow(["check", "value", "relation", "bound", "passed"])
        for c in report.checks:
            writer.writerow([c.name, _cell(c.value), c.relation, _cell(c.bound), _cell(c.passed)])
    return out.getvalue()


def _table(lines: list, header: list, rows) -> None:
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for row in rows:
        lines.append("| " + " | ".join(_short(v) for v in row) + " |")
    lines.append("")


def render_markdown(report: RunReport) -> str:
    lines = [f"# {report.command}: {report.verdict}", ""]
    lines.append(f"seed {report.seed}, minmaxlab {report.version}")
    lines.append("")
    if report.parameters:
        lines.append("## Parameters")
        lines.append("")
        _table(lines, ["name", "value"], sorted(report.parameters.items()))
    if report.summary:
        lines.append("## Summary")
        lines.append("")
        _table(lines, ["quantity", "value"], sorted(report.summary.items()))
    if report.checks:
        lines.append("## Verification")
        lines.append("")
        _table(lines, ["check", "value", "relation", "bound", "passed"],
               [(c.name, c.value, c.relation, c.bound, c.passed) for c in report.checks])
    if report.flow:
        lines.append("## Metric to HILL flow")
        lines.append("")
        for step in report.flow:
            lines.append(f"- {step}")
        lines.append("")
    if report.rows:
        lines.append("## Security table")
        lines.append("")
        header = list(report.rows[0])
        _table(lines, header, [[row[h] for h in header] for row in report.rows])
    if report.flags:
        lines.append("## Notes")
        lines.append("")
        for flag in report.flags:
            lines.append(f"- {flag}")
        lines.append("")
    return "\n".join(lines)


RENDERERS = {"json": render_json, "csv": render_csv, "markdown": render_markdown}


def emit_report(report: RunReport, fmt: str, path) -> None:
    if fmt not in RENDERERS:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="") as fh:
        fh.write(RENDERERS[fmt](report))
