"""Reading and writing of response matrices, traces, and result tables.

All table output is plain delimited text with full-precision floats, so a
rerun with the same seed reproduces files byte for byte. Wall-clock timings
go to their own file and carry no such guarantee.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .experiments import ExperimentResult
from .gof import CandidateRecord, GofTrace
from .model import ResponseMatrix

logger = logging.getLogger(__name__)

_SNIFF_DELIMITERS = [",", "\t", ";"]


def _split_line(line: str, delimiter: str) -> list[str]:
    return [cell.strip() for cell in line.split(delimiter)]


def _detect_delimiter(first_line: str) -> str:
    counts = {d: first_line.count(d) for d in _SNIFF_DELIMITERS}
    best = max(counts, key=counts.get)
    return best if counts[best] > 0 else ","


def load_response_csv(path, max_category: int | None = None) -> ResponseMatrix:
    """Load a rectangular integer response matrix from a delimited text file.

    A single header row is skipped automatically when any token in the first
    row fails integer parsing. The scale maximum comes from ``max_category``
    or, when omitted, from the observed maximum (logged). Format violations
    raise :class:`DataFormatError` naming the offending file line and column.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        lines = [line.rstrip("\n\r") for line in handle]
    lines = [line for line in lines if line.strip() != ""]
    if not lines:
        raise DataFormatError(f"{path}: file contains no data")
    delimiter = _detect_delimiter(lines[0])

    def parse_row(line: str, file_line: int) -> list[int]:
        row = []
        for col, token in enumerate(_split_line(line, delimiter), start=1):
            try:
                row.append(int(token))
            except ValueError:
                raise DataFormatError(
                    f"{path}: non-integer value {token!r} at line {file_line}, column {col}"
                ) from None
        return row

    start = 0
    try:
        first = parse_row(lines[0], 1)
    except DataFormatError:
        if len(lines) == 1:
            raise DataFormatError(f"{path}: header row present but no data rows follow")
        start = 1
        first = parse_row(lines[1], 2)
    width = len(first)
    rows = [first]
    for offset, line in enumerate(lines[start + 1 :], start=start + 2):
        row = parse_row(line, offset)
        if len(row) != width:
            raise DataFormatError(
                f"{path}: ragged row at line {offset} (expected {width} values, got {len(row)})"
            )
        rows.append(row)

    data = np.array(rows, dtype=np.int64)
    negative = np.argwhere(data < 0)
    if negative.size:
        r, c = negative[0]
        raise DataFormatError(
            f"{path}: negative value {data[r, c]} at data row {r + 1}, column {c + 1}"
        )
    if max_category is None:
        max_category = int(data.max()) if data.size else 1
        max_category = max(max_category, 1)
        logger.info("inferred max_category=%d from %s", max_category, path)
    over = np.argwhere(data > max_category)
    if over.size:
        r, c = over[0]
        raise DataFormatError(
            f"{path}: value {data[r, c]} exceeds max_category={max_category} "
            f"at data row {r + 1}, column {c + 1}"
        )
    return ResponseMatrix(data=data, max_category=max_category)


def save_response_csv(responses: ResponseMatrix, path) -> Path:
    """Write the raw integer matrix, one comma-separated row per subject."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerows(responses.data.tolist())
    return path


def save_labels_csv(labels: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write("label\n")
        for value in np.asarray(labels).tolist():
            handle.write(f"{value}\n")
    return path


def save_matrix_csv(matrix: np.ndarray, path, header: list[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        if header is not None:
            writer.writerow(header)
        for row in np.asarray(matrix).tolist():
            writer.writerow([repr(float(v)) for v in row])
    return path


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows_csv(path, header: list[str], rows: list[list]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_json(payload: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=False)
        handle.write("\n")
    return path


def write_curve_csv(records: list[CandidateRecord], path) -> Path:
    rows = [[rec.k0, rec.sigma1, rec.t_stat, rec.ratio] for rec in records]
    return write_rows_csv(path, ["k0", "sigma1", "t_stat", "ratio"], rows)


def write_trace_json(trace: GofTrace, path, context: dict | None = None) -> Path:
    payload = dict(context or {})
    payload.update(trace.to_dict())
    return write_json(payload, path)


_CELL_COLUMNS = ["cell_index", "n_subjects", "n_items", "n_classes", "delta", "max_category"]


def _cell_prefix(index: int, cell) -> list:
    return [index, cell.n_subjects, cell.n_items, cell.n_classes, cell.delta, cell.max_category]


def write_experiment_outputs(
    result: ExperimentResult, out_dir, render_figures: bool = True
) -> list[Path]:
    """Write the result tables (and figures) for one experiment run.

    Deterministic files: ``<name>_summary.csv``, ``<name>_stats.csv``,
    ``<name>_stops.csv``, ``<name>_result.json``. Wall-clock means go to
    ``<name>_timing.csv``. Figures are rendered when matplotlib output is
    requested and at least one relevant series exists.
    """
    out_dir = Path(out_dir)
    name = result.config.name
    paths = []

    summary_rows = []
    stats_rows = []
    stops_rows = []
    timing_rows = []
    for index, cell_result in enumerate(result.cells):
        prefix = _cell_prefix(index, cell_result.cell)
        for summary in cell_result.summaries:
            summary_rows.append(
                prefix
                + [summary.method, cell_result.reps, summary.accuracy, summary.std_error]
            )
            timing_rows.append(prefix + [summary.method, summary.mean_runtime_ms])
            for k_hat in sorted(summary.stop_distribution):
                count = summary.stop_distribution[k_hat]
                stops_rows.append(
                    prefix + [summary.method, k_hat, count, count / cell_result.reps]
                )
            for row in summary.stat_summaries:
                stats_rows.append(
                    prefix
                    + [summary.method, row["k0"], row["n"], row["t_mean"], row["t_sd"],
                       row["r_mean"], row["r_sd"]]
                )
        for row in cell_result.curve_stats:
            stats_rows.append(
                prefix
                + ["curve", row["k0"], row["n"], row["t_mean"], row["t_sd"],
                   row["r_mean"], row["r_sd"]]
            )

    paths.append(
        write_rows_csv(
            out_dir / f"{name}_summary.csv",
            _CELL_COLUMNS + ["method", "reps", "accuracy", "std_error"],
            summary_rows,
        )
    )
    paths.append(
        write_rows_csv(
            out_dir / f"{name}_stats.csv",
            _CELL_COLUMNS + ["source", "k0", "n", "t_mean", "t_sd", "r_mean", "r_sd"],
            stats_rows,
        )
    )
    paths.append(
        write_rows_csv(
            out_dir / f"{name}_stops.csv",
            _CELL_COLUMNS + ["method", "k_hat", "count", "proportion"],
            stops_rows,
        )
    )
    paths.append(write_json(result.to_dict(), out_dir / f"{name}_result.json"))
    paths.append(
        write_rows_csv(
            out_dir / f"{name}_timing.csv",
            _CELL_COLUMNS + ["method", "mean_runtime_ms"],
            timing_rows,
        )
    )
    if render_figures:
        from . import report

        paths.extend(report.render_experiment_figures(result, out_dir))
    return paths


def write_sensitivity_csv(rows: list[dict], path) -> Path:
    table = [[r["kind"], r["value"], r["reps"], r["accuracy"], r["std_error"]] for r in rows]
    return write_rows_csv(path, ["kind", "value", "reps", "accuracy", "std_error"], table)
