"""Deterministic JSON/CSV serialization for solver reports.

Reports are written with a fixed key order and every real rendered at
17 significant digits, so identical runs produce byte-identical files
and values round-trip exactly. Matrices larger than 64x64 go to
sibling CSV files referenced by relative path instead of being
inlined. All writes go through a temp file + rename, so a failed run
never leaves a partial artifact.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .dual import DualReport
from .errors import IoError
from .mirrorprox import SolveReport

INLINE_MATRIX_LIMIT = 64
FLOAT_FMT = ".17g"


def _render(obj, out: list[str]):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            raise IoError(f"non-finite value {value!r} in report")
        out.append(format(value, FLOAT_FMT))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _render(val, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, val in enumerate(obj):
            if i:
                out.append(", ")
            _render(val, out)
        out.append("]")
    else:
        raise IoError(f"cannot serialize {type(obj).__name__} in report")


def dumps(obj) -> str:
    parts: list[str] = []
    _render(obj, parts)
    return "".join(parts)


def atomic_write_text(text: str, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_matrix_csv(matrix, path) -> None:
    matrix = np.asarray(matrix, dtype=float)
    lines = [",".join(format(v, FLOAT_FMT) for v in row) for row in matrix]
    atomic_write_text("\n".join(lines) + "\n", path)


def read_matrix_csv(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def write_rows_csv(rows: list[dict], path) -> None:
    """Uniform-keyed dict rows to CSV; reals at 17 significant digits."""
    if not rows:
        atomic_write_text("", path)
        return
    keys = list(rows[0].keys())
    lines = [",".join(keys)]
    for row in rows:
        cells = []
        for key in keys:
            value = row[key]
            if isinstance(value, (float, np.floating)):
                cells.append(format(float(value), FLOAT_FMT))
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    atomic_write_text("\n".join(lines) + "\n", path)


def _matrix_field(doc, name, matrix, path: Path, sidecars: dict):
    """Inline small matrices; large ones are referenced as sibling CSVs."""
    matrix = np.asarray(matrix, dtype=float)
    sidecar = path.with_name(f"{path.stem}_{name}.csv")
    sidecars[sidecar] = matrix
    doc[f"{name}_csv"] = sidecar.name
    if max(matrix.shape) <= INLINE_MATRIX_LIMIT:
        doc[name] = [[float(v) for v in row] for row in matrix]


def solve_report_doc(report: SolveReport, path, labels=None, extra=None):
    """(JSON document, sidecar matrices). wall_time is deliberately not
    serialized: reports must be byte-identical across identical runs."""
    path = Path(path)
    doc = {"kind": "solve"}
    if extra:
        doc.update(extra)
    doc["k"] = report.P_rounded.rank
    doc["iterations"] = report.iterations
    if labels is not None:
        doc["labels"] = list(labels)
    doc["tau"] = float(report.tau)
    doc["worst_case_ev"] = float(report.worst_case_ev)
    doc["per_source_ev"] = [float(v) for v in report.per_source_ev]
    doc["omega_avg"] = [float(v) for v in report.omega_avg.weights]
    doc["gap_trace"] = [[int(t), float(g)] for t, g in report.gap_trace]
    sidecars: dict = {}
    _matrix_field(doc, "M_avg", report.M_avg.matrix, path, sidecars)
    _matrix_field(doc, "P_rounded", report.P_rounded.matrix, path, sidecars)
    return doc, sidecars


def dual_report_doc(report: DualReport, path, labels=None, extra=None):
    path = Path(path)
    doc = {"kind": "dual"}
    if extra:
        doc.update(extra)
    if labels is not None:
        doc["labels"] = list(labels)
    doc["omega_avg"] = [float(v) for v in report.omega_avg.weights]
    doc["phi_at_avg"] = float(report.phi_at_avg)
    doc["eigengap"] = float(report.eigengap)
    doc["tight"] = bool(report.tight)
    doc["phi_trace"] = [[int(t), float(v)] for t, v in report.phi_trace]
    sidecars: dict = {}
    _matrix_field(doc, "M_candidate", report.M_candidate.matrix, path, sidecars)
    return doc, sidecars


def write_report(doc: dict, sidecars: dict, path) -> None:
    for sidecar_path, matrix in sidecars.items():
        write_matrix_csv(matrix, sidecar_path)
    atomic_write_text(dumps(doc) + "\n", path)


def read_report(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
