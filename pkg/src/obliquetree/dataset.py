"""Observation storage, CSV ingestion, index-set bookkeeping, and projections.

A Dataset is an immutable column-major view of n observations in p
dimensions plus a response vector.  Nodes of a tree are represented as
index sets (strictly increasing integer arrays into the dataset), so the
data itself is never copied while a tree is grown.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

# Relative magnitude below which a direction coefficient is snapped to
# exactly zero during canonicalization, so that support sizes are not
# inflated by floating-point dust from cross products.
_COEFF_SNAP = 1e-12


class CsvFormatError(ValueError):
    """Raised when a CSV file cannot be parsed into a Dataset."""


@dataclass(frozen=True)
class Dataset:
    """n observations in p dimensions with a real response per row.

    Both arrays are float64, C-contiguous, and marked read-only: a
    Dataset is safe to share across worker threads or processes.
    """

    features: np.ndarray
    response: np.ndarray
    n: int = field(init=False)
    p: int = field(init=False)

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        resp = np.ascontiguousarray(self.response, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if resp.ndim != 1:
            raise ValueError("response must be a 1-D vector")
        n, p = feats.shape
        if n < 1 or p < 1:
            raise ValueError("need at least one row and one column")
        if resp.shape[0] != n:
            raise ValueError(
                f"response length {resp.shape[0]} != feature rows {n}"
            )
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite entries")
        if not np.all(np.isfinite(resp)):
            raise ValueError("response contains non-finite entries")
        feats.setflags(write=False)
        resp.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "response", resp)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class Direction:
    """Canonical direction vector for an oblique split.

    Canonical form: unit Euclidean norm with the first nonzero
    coefficient strictly positive, so a hyperplane has exactly one
    representation and tie-breaking between splits is well defined.
    Coefficients are stored as a tuple, which gives exact equality,
    hashing, and lexicographic comparison for free.
    """

    coefficients: tuple[float, ...]

    @property
    def support_size(self) -> int:
        return sum(1 for c in self.coefficients if c != 0.0)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=np.float64)

    @staticmethod
    def canonical(vector) -> "Direction":
        arr = np.array(vector, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("direction must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("direction has non-finite coefficients")
        peak = np.max(np.abs(arr))
        if peak == 0.0:
            raise ValueError("direction must be nonzero")
        arr[np.abs(arr) <= _COEFF_SNAP * peak] = 0.0
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValueError("direction must be nonzero")
        # Skip the division when already unit-norm so canonicalization is
        # an exact fixpoint (idempotent to the bit).
        if abs(norm - 1.0) > 1e-12:
            arr = arr / norm
        first = arr[np.nonzero(arr)[0][0]]
        if first < 0.0:
            arr = -arr
        return Direction(tuple(float(c) for c in arr))


def axis_direction(p: int, coordinate: int) -> Direction:
    """Standard basis vector e_coordinate in p dimensions."""
    if not 0 <= coordinate < p:
        raise ValueError(f"coordinate {coordinate} out of range for p={p}")
    coeffs = [0.0] * p
    coeffs[coordinate] = 1.0
    return Direction(tuple(coeffs))


def validate_index_set(indices, n: int) -> np.ndarray:
    """Check that `indices` is a non-empty strictly increasing index set."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("index set must be non-empty and 1-D")
    if idx[0] < 0 or idx[-1] >= n:
        raise ValueError("index out of range")
    if idx.size > 1 and not np.all(np.diff(idx) > 0):
        raise ValueError("indices must be strictly increasing and unique")
    return idx


def root_index_set(dataset: Dataset) -> np.ndarray:
    return np.arange(dataset.n, dtype=np.int64)


def subset(dataset: Dataset, rows) -> Dataset:
    """New Dataset holding only the given rows (row order preserved)."""
    idx = validate_index_set(np.sort(np.asarray(rows, dtype=np.int64)), dataset.n)
    return Dataset(dataset.features[idx], dataset.response[idx])


def project(dataset: Dataset, node, direction: Direction):
    """Project the node's points onto a direction, sorted ascending.

    Returns (values, indices): projection values in non-decreasing order
    and the matching observation indices.  Ties in value are broken by
    ascending observation index, so the output is a deterministic
    permutation of the node.
    """
    idx = validate_index_set(node, dataset.n)
    coeffs = direction.as_array()
    if coeffs.shape[0] != dataset.p:
        raise ValueError(f"direction has {coeffs.shape[0]} coefficients, p={dataset.p}")
    values = dataset.features[idx] @ coeffs
    # lexsort uses the last key as primary: sort by value, then index.
    order = np.lexsort((idx, values))
    return values[order], idx[order]


def node_stats(dataset: Dataset, node) -> tuple[float, float]:
    """Mean response and sum of squared deviations over a node.

    Uses the two-pass mean-then-deviations formula for numerical
    robustness; the compensated one-pass form Sum(y^2) - n*mean^2 is the
    cross-check used in tests.
    """
    idx = validate_index_set(node, dataset.n)
    y = dataset.response[idx]
    mean = float(y.mean())
    sse = float(np.sum((y - mean) ** 2))
    return mean, sse


def load_csv(path, response_column) -> Dataset:
    """Load a comma-separated file into a Dataset.

    The first row must be a header.  `response_column` selects the
    response either by header name or by 0-based column index; the
    remaining columns become features in file order.  Cells must parse
    as finite decimal numbers ('.' decimal point, no quoting); any
    offending cell is reported with its row and column.
    """
    try:
        handle = open(path, "r", newline="")
    except FileNotFoundError:
        raise CsvFormatError(f"no such file: {path}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if isinstance(response_column, int):
            if not 0 <= response_column < len(header):
                raise CsvFormatError(
                    f"{path}: response column index {response_column} out of range"
                )
            resp_pos = response_column
        else:
            if response_column not in header:
                raise CsvFormatError(
                    f"{path}: response column {response_column!r} not in header {header}"
                )
            resp_pos = header.index(response_column)
        feat_rows = []
        resp_vals = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            parsed = []
            for col, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {header[col]!r}: "
                        f"non-numeric cell {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {header[col]!r}: "
                        f"non-finite cell {cell!r}"
                    )
                parsed.append(value)
            resp_vals.append(parsed[resp_pos])
            feat_rows.append([v for c, v in enumerate(parsed) if c != resp_pos])
        if not feat_rows:
            raise CsvFormatError(f"{path}: no data rows")
        if len(header) < 2:
            raise CsvFormatError(f"{path}: need at least one feature column")
    return Dataset(np.asarray(feat_rows), np.asarray(resp_vals))


def save_csv(dataset: Dataset, path, feature_names=None, response_name="y") -> None:
    """Write a Dataset in the same dialect load_csv reads.

    Floats are written with repr(), which round-trips exactly, so a
    save/load cycle reproduces the matrices bit for bit.
    """
    if feature_names is None:
        feature_names = [f"x{j + 1}" for j in range(dataset.p)]
    if len(feature_names) != dataset.p:
        raise ValueError("feature_names length must equal p")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(feature_names) + [response_name])
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.features[i]]
            row.append(repr(float(dataset.response[i])))
            writer.writerow(row)
