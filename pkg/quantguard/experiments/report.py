"""
Report files.

CSV: '# key=value' metadata lines (config_hash first), a header row with
COLUMNS, then one row per (model, epsilon). The structured-text form writes the
same metadata lines followed by one 'column=value ...' line per row.
"""
import csv
import io
import logging
from pathlib import Path

from quantguard.experiments.sweep import COLUMNS, VOLATILE_KEYS, SweepReport, SweepRow

logger = logging.getLogger(__name__)

FORMATS = ("csv", "text")
TEXT_KEYS = ("config_hash", "seeds")


def _metadata_lines(metadata, include_volatile):
    items = {"config_hash": metadata.get("config_hash", "none")}
    items.update((k, v) for k, v in metadata.items() if k != "config_hash")
    return [
        f"# {key}={value}"
        for key, value in items.items()
        if include_volatile or key not in VOLATILE_KEYS
    ]


def _cells(row):
    return [
        row.model_id,
        str(row.input_bits),
        "true" if row.binarized else "false",
        row.attack,
        repr(row.epsilon),
        repr(row.accuracy_pct),
        str(row.n_samples),
    ]


def render_report(report, fmt="csv", include_volatile=True):
    if fmt not in FORMATS:
        raise ValueError(f"report format must be one of {FORMATS}, got '{fmt}'")
    out = io.StringIO()
    out.write("\n".join(_metadata_lines(report.metadata, include_volatile)) + "\n")
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in report.rows:
            writer.writerow(_cells(row))
    else:
        for row in report.rows:
            out.write(" ".join(f"{k}={v}" for k, v in zip(COLUMNS, _cells(row))) + "\n")
    return out.getvalue()


def emit_report(report, path, fmt="csv", include_volatile=True):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(report, fmt, include_volatile), encoding="utf-8")
    logger.info("Report with %d rows written to %s", len(report.rows), path)
    return path


def _row_from_cells(cells):
    values = dict(zip(COLUMNS, cells))
    return SweepRow(
        model_id=values["model_id"],
        input_bits=int(values["input_bits"]),
        binarized=values["binarized"] == "true",
        attack=values["attack"],
        epsilon=float(values["epsilon"]),
        accuracy_pct=float(values["accuracy_pct"]),
        n_samples=int(values["n_samples"]),
    )


def _parse_value(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_report(path):
    """Read a report written by emit_report (either format)."""
    report = SweepReport()
    body = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            report.metadata[key] = value if key in TEXT_KEYS else _parse_value(value)
        elif line.strip():
            body.append(line)
    if body and body[0].split(",") == list(COLUMNS):
        for cells in csv.reader(body[1:]):
            report.rows.append(_row_from_cells(cells))
    else:
        for line in body:
            pairs = dict(item.split("=", 1) for item in line.split(" "))
            report.rows.append(_row_from_cells([pairs[c] for c in COLUMNS]))
    return report
