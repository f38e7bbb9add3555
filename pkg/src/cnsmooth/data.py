"""Loading, validation and preprocessing of observation matrices."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DataError

ColumnSelector = Union[int, str]


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x d`` matrix of finite observations.

    ``warnings`` collects human-readable notes produced by preprocessing
    (e.g. dropped constant columns). They are diagnostics only.
    """

    values: np.ndarray
    column_names: Optional[tuple] = None
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise DataError(f"data must be two-dimensional, got shape {values.shape}")
        n, d = values.shape
        if n < 2:
            raise DataError(f"need at least 2 observations, got {n}")
        if d < 1:
            raise DataError("need at least 1 feature column")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(
                f"non-finite value at observation {bad[0]}, column {bad[1]}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != d:
                raise DataError(f"{len(names)} column names for {d} columns")
            object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelVector:
    """Integer labels in ``[0, G)``.

    ``classes`` optionally keeps the raw tokens that were coded, in code order.
    """

    labels: np.ndarray
    G: int
    classes: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise DataError("labels must be one-dimensional")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise DataError("labels must be integers")
        labels = labels.astype(np.int64, copy=True)
        if self.G < 1:
            raise DataError(f"number of groups must be >= 1, got {self.G}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.G):
            raise DataError(f"labels must lie in [0, {self.G})")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size

    @property
    def effective(self) -> int:
        """Number of distinct labels actually used."""
        return int(np.unique(self.labels).size)

    @classmethod
    def from_tokens(cls, tokens: Sequence) -> "LabelVector":
        """Code arbitrary hashable tokens as ``0..G-1`` by first appearance."""
        codes: dict = {}
        out = np.empty(len(tokens), dtype=np.int64)
        for i, tok in enumerate(tokens):
            out[i] = codes.setdefault(tok, len(codes))
        return cls(out, max(len(codes), 1), tuple(codes))


def _resolve_column(selector: ColumnSelector, header: Optional[list], width: int) -> int:
    if isinstance(selector, str) and header is not None and selector in header:
        return header.index(selector)
    try:
        idx = int(selector)
    except (TypeError, ValueError):
        raise DataError(f"label column {selector!r} not found") from None
    if not -width <= idx < width:
        raise DataError(f"label column index {idx} out of range for {width} columns")
    return idx % width


def load_csv(
    path: Union[str, Path],
    label_column: Optional[ColumnSelector] = None,
    has_header: bool = True,
) -> tuple:
    """Read a comma-delimited numeric file.

    Parameters
    ----------
    path : str or Path
        UTF-8 text file, optionally with a single header row.
    label_column : int or str, optional
        Column holding ground-truth labels, given by header name or by
        (possibly negative) position. It is removed from the features and
        coded to ``0..G-1`` in order of first appearance.
    has_header : bool
        Whether the first non-blank line is a header.

    Returns
    -------
    (DataMatrix, LabelVector or None)

    Raises
    ------
    DataError
        On an empty file, a row of the wrong width or a non-numeric feature
        cell. Row numbers are file line numbers and columns are 1-based.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = [
                (lineno, row)
                for lineno, row in enumerate(csv.reader(fh), start=1)
                if row and any(cell.strip() for cell in row)
            ]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except (csv.Error, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: file is empty")

    header = None
    if has_header:
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: no data rows after the header")
    width = len(header) if header is not None else len(rows[0][1])

    label_idx = None
    if label_column is not None:
        label_idx = _resolve_column(label_column, header, width)
    feature_idx = [j for j in range(width) if j != label_idx]
    if not feature_idx:
        raise DataError(f"{path}: no feature columns")

    values = np.empty((len(rows), len(feature_idx)))
    tokens = []
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(
                f"{path}: row {lineno} has {len(row)} fields, expected {width}"
            )
        for c, j in enumerate(feature_idx):
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {lineno}, column {j + 1}: "
                    f"cannot parse {cell!r} as a number"
                ) from None
            if not math.isfinite(v):
                raise DataError(f"{path}: row {lineno}, column {j + 1}: non-finite value")
            values[r, c] = v
        if label_idx is not None:
            tokens.append(row[label_idx].strip())

    names = [header[j] for j in feature_idx] if header is not None else None
    data = DataMatrix(values, names)
    labels = LabelVector.from_tokens(tokens) if label_idx is not None else None
    return data, labels


def write_csv(path: Union[str, Path], data: DataMatrix, labels: Optional[LabelVector] = None) -> None:
    """Write features (17 significant digits, so floats round-trip exactly)."""
    names = list(data.column_names or (f"x{j}" for j in range(data.d)))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + (["label"] if labels is not None else []))
        for i, row in enumerate(data.values):
            cells = [format(v, ".17g") for v in row]
            if labels is not None:
                cells.append(str(labels.labels[i]))
            w.writerow(cells)


def standardize(data: DataMatrix, center: bool = False) -> DataMatrix:
    """Scale every column to unit sample variance (``ddof=1``).

    Columns are centred only if ``center`` is true. Euclidean neighbours do
    not care, but cosine distances do: the clustering pipeline centres.
    Constant columns are dropped and noted in ``warnings``.
    """
    X = data.values
    sd = X.std(axis=0, ddof=1)
    scale = np.abs(X).max(axis=0)
    constant = sd <= np.finfo(float).eps * np.maximum(scale, 1.0)
    names = data.column_names
    if constant.all():
        raise DataError("all columns have zero variance")
    notes = list(data.warnings)
    if constant.any():
        dropped = np.flatnonzero(constant)
        labels = [names[j] if names else str(j) for j in dropped]
        notes.append(f"dropped {dropped.size} zero-variance column(s): {', '.join(labels)}")
    keep = ~constant
    kept_names = tuple(n for n, k in zip(names, keep) if k) if names else None
    X = X[:, keep]
    if center:
        X = X - X.mean(axis=0)
    return DataMatrix(X / sd[keep], kept_names, tuple(notes))


def _components(centred: np.ndarray, max_dim: int) -> np.ndarray:
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    m = min(max_dim, centred.shape[0] - 1, vt.shape[0])
    comps = vt[:m].copy()
    lead = np.argmax(np.abs(comps), axis=1)
    return comps * np.sign(comps[np.arange(m), lead])[:, None]


def pca_reduce(data: DataMatrix, max_dim: int = 100) -> DataMatrix:
    """Project onto the leading principal components when ``d > max_dim``.

    The columns are centred and projected on the right singular vectors of
    the centred matrix. At most ``min(max_dim, n - 1)`` components are kept
    since the centred matrix has rank below ``n``. Each component is
    oriented so that its largest-magnitude coordinate is positive.
    """
    if max_dim < 1:
        raise DataError(f"max_dim must be positive, got {max_dim}")
    if data.d <= max_dim:
        return data
    centred = data.values - data.values.mean(axis=0)
    comps = _components(centred, max_dim)
    m = comps.shape[0]
    notes = data.warnings + (f"projected {data.d} columns onto {m} principal components",)
    return DataMatrix(centred @ comps.T, tuple(f"PC{j + 1}" for j in range(m)), notes)
