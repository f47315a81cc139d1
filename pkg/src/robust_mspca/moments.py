"""Ingest per-source sample tables and build second-moment instances.

CSV conventions: comma-separated, UTF-8, optional header row,
decimal-point reals. Two layouts are supported: one file per source
(label = file stem) or a single file with a designated source-label
column. Sources are always ordered lexicographically by label so that
weight indices are stable across runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateInstance, InvalidMatrix, IoError, ParseError, ShapeError
from .spectral import spectral_radius

PSD_TOL = 1e-8


@dataclass(frozen=True)
class SourceSamples:
    """Per-source observation matrices of shape (n_l, d)."""

    matrices: list[np.ndarray]
    labels: list[str]
    dim: int

    @property
    def count(self) -> int:
        return len(self.matrices)

    @property
    def sample_sizes(self) -> list[int]:
        return [m.shape[0] for m in self.matrices]


@dataclass(frozen=True)
class SecondMomentSet:
    """The problem instance: L symmetric PSD matrices sharing dimension d."""

    matrices: list[np.ndarray]
    dim: int
    labels: list[str]
    rho_max: float
    sample_sizes: list[int] | None = None
    psd: bool = field(default=True, repr=False)

    @property
    def count(self) -> int:
        return len(self.matrices)

    @staticmethod
    def from_matrices(matrices, labels=None, sample_sizes=None, require_psd=True) -> "SecondMomentSet":
        """Validate and assemble an instance.

        ``require_psd=False`` admits the indefinite shifted matrices
        used by the squared/fair reformulations; rho_max is then the
        largest absolute eigenvalue (identical to the operator norm on
        PSD input).
        """
        mats = [np.asarray(m, dtype=float) for m in matrices]
        if len(mats) < 1:
            raise ShapeError("need at least one source matrix")
        d = mats[0].shape[0] if mats[0].ndim == 2 else -1
        cleaned = []
        for i, m in enumerate(mats):
            if m.ndim != 2 or m.shape != (d, d):
                raise ShapeError(f"matrix {i} has shape {m.shape}, expected ({d}, {d})")
            if not np.all(np.isfinite(m)):
                raise InvalidMatrix(f"matrix {i} contains non-finite entries")
            if np.abs(m - m.T).max() > PSD_TOL:
                raise InvalidMatrix(f"matrix {i} is not symmetric within {PSD_TOL}")
            m = 0.5 * (m + m.T)
            if require_psd:
                lo = float(np.linalg.eigvalsh(m)[0])
                if lo < -PSD_TOL:
                    raise InvalidMatrix(f"matrix {i} has eigenvalue {lo} < -{PSD_TOL}")
            cleaned.append(m)
        if labels is None:
            labels = [f"s{i + 1}" for i in range(len(cleaned))]
        labels = [str(x) for x in labels]
        if len(labels) != len(cleaned):
            raise ShapeError("labels/matrices length mismatch")
        rho = max(spectral_radius(m) for m in cleaned)
        sizes = list(sample_sizes) if sample_sizes is not None else None
        return SecondMomentSet(matrices=cleaned, dim=d, labels=labels,
                               rho_max=rho, sample_sizes=sizes, psd=require_psd)


def compute_second_moment(samples: SourceSamples, center: bool = False) -> SecondMomentSet:
    """Per-source Sigma_hat = (1/n_l) sum_i x_i x_i^T, optionally mean-centered."""
    mats = []
    for x in samples.matrices:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != samples.dim:
            raise ShapeError(f"sample block has shape {x.shape}, expected (*, {samples.dim})")
        if center:
            x = x - x.mean(axis=0, keepdims=True)
        s = x.T @ x / x.shape[0]
        mats.append(0.5 * (s + s.T))
    return SecondMomentSet.from_matrices(
        mats, labels=samples.labels, sample_sizes=samples.sample_sizes)


def rescale_by_max_opnorm(m: SecondMomentSet) -> tuple[SecondMomentSet, float]:
    """Divide every matrix by the max operator norm; returns (scaled, scale)."""
    if m.rho_max <= 0.0:
        raise DegenerateInstance("all-zero instance cannot be rescaled")
    scale = m.rho_max
    scaled = SecondMomentSet.from_matrices(
        [mat / scale for mat in m.matrices], labels=m.labels,
        sample_sizes=m.sample_sizes, require_psd=m.psd)
    return scaled, scale


def _parse_rows(path: Path):
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        return [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]


def _cell(path, row_idx, col_idx, text):
    """Parse one cell to a finite float; row/col are 1-based for messages."""
    try:
        value = float(text)
    except ValueError:
        value = None
    if value is None or not np.isfinite(value):
        raise ParseError(
            f"non-numeric value {text.strip()!r} at row {row_idx}, column {col_idx} of {path}")
    return value


def _is_numeric_row(row) -> bool:
    for cell in row:
        try:
            v = float(cell)
        except ValueError:
            return False
        if not np.isfinite(v):
            return False
    return True


def _read_table(path: Path):
    """Returns (header or None, float ndarray). Header is auto-detected."""
    rows = _parse_rows(path)
    if not rows:
        raise ParseError(f"{path} is empty")
    header = None
    start = 0
    if not _is_numeric_row(rows[0]):
        header = [c.strip() for c in rows[0]]
        start = 1
        if not rows[start:]:
            raise ParseError(f"{path} has a header but no data rows")
    width = len(rows[start])
    data = np.empty((len(rows) - start, width))
    for i, row in enumerate(rows[start:]):
        if len(row) != width:
            raise ShapeError(
                f"{path}: row {start + i + 1} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            data[i, j] = _cell(path, start + i + 1, j + 1, cell)
    return header, data


def _expand_paths(path_spec) -> list[Path]:
    if isinstance(path_spec, (str, Path)):
        p = Path(path_spec)
        if p.is_dir():
            files = sorted(p.glob("*.csv"))
            if not files:
                raise IoError(f"no .csv files in directory {p}")
            return files
        return [p]
    return [Path(p) for p in path_spec]


def load_sources(path_spec, source_column: str | None = None) -> SourceSamples:
    """Parse CSVs into SourceSamples with stable (lexicographic) source order.

    ``path_spec`` is a directory, one path, or a list of paths. With
    ``source_column`` set, a single file is split by that column's
    values (a header naming the column is required); otherwise each
    file is one source labeled by its stem.
    """
    paths = _expand_paths(path_spec)
    if source_column is not None:
        if len(paths) != 1:
            raise ShapeError("source-column mode takes exactly one input file")
        path = paths[0]
        rows = _parse_rows(path)
        if not rows:
            raise ParseError(f"{path} is empty")
        header = [c.strip() for c in rows[0]]
        if source_column not in header:
            raise ParseError(f"{path}: no column named {source_column!r} in header {header}")
        src_idx = header.index(source_column)
        feat_idx = [j for j in range(len(header)) if j != src_idx]
        groups: dict[str, list[list[float]]] = {}
        for i, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise ShapeError(f"{path}: row {i} has {len(row)} columns, expected {len(header)}")
            label = row[src_idx].strip()
            feats = [_cell(path, i, j + 1, row[j]) for j in feat_idx]
            groups.setdefault(label, []).append(feats)
        labels = sorted(groups)
        mats = [np.asarray(groups[lab], dtype=float) for lab in labels]
    else:
        entries = sorted((p.stem, p) for p in paths)
        labels = [name for name, _ in entries]
        mats = [_read_table(p)[1] for _, p in entries]
    d = mats[0].shape[1]
    for lab, m in zip(labels, mats):
        if m.shape[1] != d:
            raise ShapeError(f"source {lab!r} has {m.shape[1]} columns, expected {d}")
        if m.shape[0] < 1:
            raise ShapeError(f"source {lab!r} has no rows")
    return SourceSamples(matrices=mats, labels=labels, dim=d)


def load_moment_matrices(path_spec) -> SecondMomentSet:
    """Moment-level input: one d x d CSV per source, labeled by file stem."""
    paths = _expand_paths(path_spec)
    entries = sorted((p.stem, p) for p in paths)
    mats = []
    for name, p in entries:
        _, data = _read_table(p)
        if data.shape[0] != data.shape[1]:
            raise ShapeError(f"{p}: moment matrix must be square, got {data.shape}")
        mats.append(data)
    return SecondMomentSet.from_matrices(mats, labels=[name for name, _ in entries])
