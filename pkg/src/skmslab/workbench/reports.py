"""Serialization of verification reports to JSON and CSV.

Field order is pinned so that identical inputs produce byte-identical
files; floats are written with shortest round-trip repr.
"""

import io
import json

REPORT_SCHEMA = "skms-report/1"
CSV_COLUMNS = ("identity_name", "paper_anchor", "samples", "max_residual",
               "tolerance", "passed", "seed", "model_digest", "wall_ms")


def report_row(report):
    return {
        "identity_name": report.identity_name,
        "paper_anchor": report.paper_anchor,
        "samples": report.samples,
        "max_residual": report.max_residual,
        "tolerance": report.tolerance,
        "passed": report.passed,
        "seed": report.seed,
        "model_digest": report.model_digest,
        "wall_ms": report.wall_ms,
    }


def to_json_text(reports):
    doc = {"schema": REPORT_SCHEMA, "reports": [report_row(r) for r in reports]}
    return json.dumps(doc, indent=2) + "\n"


def _csv_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_csv_text(reports):
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in reports:
        row = report_row(r)
        buf.write(",".join(_csv_cell(row[c]) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def emit_report(reports, format="json", path=None):
    """Render reports (and optionally write them); returns the text."""
    if format == "json":
        text = to_json_text(reports)
    elif format == "csv":
        text = to_csv_text(reports)
    else:
        raise ValueError("format must be 'json' or 'csv'")
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
