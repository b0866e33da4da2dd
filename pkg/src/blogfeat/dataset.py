"""Loading, column classification, scaling and splitting of the tabular blog data.

The processed BlogFeedback corpus is a header-less CSV with 280 numeric feature
columns followed by the comment-count target.  Columns that are identically zero
are dropped, non-binary columns are standardised with the sample standard
deviation, binary indicators pass through untouched and the target is
standardised as well.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadRatios,
    EmptyInput,
    RaggedRow,
    SchemaMismatch,
    UnparseableCell,
    ZeroVariance,
)


class ColumnKind(str, enum.Enum):
    ALL_ZERO = "AllZero"
    BINARY = "Binary"
    CONTINUOUS = "Continuous"


@dataclass(frozen=True)
class RawTable:
    values: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass
class ScalerParams:
    dropped_indices: list[int]
    kinds: list[ColumnKind]
    means: list[float]
    sds: list[float]
    target_mean: float
    target_sd: float

    @property
    def n_features(self) -> int:
        return len(self.kinds) + len(self.dropped_indices)

    def to_dict(self) -> dict:
        return {
            "dropped_indices": list(self.dropped_indices),
            "kinds": [k.value for k in self.kinds],
            "means": list(self.means),
            "sds": list(self.sds),
            "target_mean": self.target_mean,
            "target_sd": self.target_sd,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(
            dropped_indices=[int(i) for i in d["dropped_indices"]],
            kinds=[ColumnKind(k) for k in d["kinds"]],
            means=[float(v) for v in d["means"]],
            sds=[float(v) for v in d["sds"]],
            target_mean=float(d["target_mean"]),
            target_sd=float(d["target_sd"]),
        )

    def save(self, path) -> None:
        # json renders floats with repr(), the shortest round-trip decimal
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ScalerParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    kinds: list[ColumnKind] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise SchemaMismatch(f"X {self.X.shape} and y {self.y.shape} are not aligned")
        if not self.kinds:
            self.kinds = [ColumnKind.CONTINUOUS] * self.X.shape[1]
        if len(self.kinds) != self.X.shape[1]:
            raise SchemaMismatch(f"{len(self.kinds)} kinds for {self.X.shape[1]} columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def take(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.y[rows], list(self.kinds))


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def parse_table(text: str, delimiter: str = ",") -> RawTable:
    """Parse delimiter-separated numeric text with no header.

    Rows are numbered from 1 in error messages, columns from 1 as well.
    Blank lines are ignored.
    """
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split(delimiter)
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise RaggedRow(lineno, width, len(cells))
        row = []
        for col, cell in enumerate(cells, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise UnparseableCell(lineno, col, cell) from None
            if not math.isfinite(v):
                raise UnparseableCell(lineno, col, cell)
            row.append(v)
        rows.append(row)
    if not rows:
        raise EmptyInput("table has no rows")
    return RawTable(np.array(rows, dtype=np.float64))


def load_table(path, delimiter: str = ",") -> RawTable:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return parse_table(path.read_text(encoding="utf-8"), delimiter)


def load_tables(paths, delimiter: str = ",") -> RawTable:
    """Load several files with identical layout and stack their rows."""
    tables = [load_table(p, delimiter) for p in paths]
    widths = {t.n_cols for t in tables}
    if len(widths) != 1:
        raise SchemaMismatch(f"files disagree on column count: {sorted(widths)}")
    return RawTable(np.vstack([t.values for t in tables]))


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def _resolve_target(n_cols: int, target_col: int) -> int:
    t = target_col + n_cols if target_col < 0 else target_col
    if not 0 <= t < n_cols:
        raise SchemaMismatch(f"target column {target_col} out of range for {n_cols} columns")
    return t


def _split_target(raw: RawTable, target_col: int):
    t = _resolve_target(raw.n_cols, target_col)
    features = np.delete(raw.values, t, axis=1)
    return features, raw.values[:, t]


def classify_column(col: np.ndarray) -> ColumnKind:
    if np.all(col == 0):
        return ColumnKind.ALL_ZERO
    if np.all((col == 0) | (col == 1)):
        return ColumnKind.BINARY
    return ColumnKind.CONTINUOUS


def classify_columns(raw: RawTable, target_col: int = -1) -> list[ColumnKind]:
    features, _ = _split_target(raw, target_col)
    return [classify_column(features[:, j]) for j in range(features.shape[1])]


def census(kinds) -> dict[str, int]:
    kinds = list(kinds)
    return {
        "dropped": kinds.count(ColumnKind.ALL_ZERO),
        "continuous": kinds.count(ColumnKind.CONTINUOUS),
        "binary": kinds.count(ColumnKind.BINARY),
    }


def _transform(features, target, params: ScalerParams) -> Dataset:
    keep = np.setdiff1d(np.arange(features.shape[1]), params.dropped_indices)
    X = features[:, keep].copy()
    cont = [j for j, k in enumerate(params.kinds) if k is ColumnKind.CONTINUOUS]
    if cont:
        X[:, cont] = (X[:, cont] - np.asarray(params.means)) / np.asarray(params.sds)
    y = (target - params.target_mean) / params.target_sd
    return Dataset(X, y, list(params.kinds))


def fit_preprocess(raw: RawTable, target_col: int = -1) -> tuple[Dataset, ScalerParams]:
    """Drop all-zero columns and standardise continuous columns and the target.

    Standard deviations use the n-1 divisor.  Raises ZeroVariance naming the
    original column index when a continuous column (or the target) is constant.
    """
    if raw.n_rows < 2:
        raise EmptyInput("need at least 2 rows to estimate scaling statistics")
    features, target = _split_target(raw, target_col)
    all_kinds = [classify_column(features[:, j]) for j in range(features.shape[1])]
    dropped = [j for j, k in enumerate(all_kinds) if k is ColumnKind.ALL_ZERO]
    kinds = [k for k in all_kinds if k is not ColumnKind.ALL_ZERO]

    means, sds = [], []
    for j, k in enumerate(all_kinds):
        if k is ColumnKind.CONTINUOUS:
            col = features[:, j]
            sd = float(np.std(col, ddof=1))
            if not sd > 0:
                raise ZeroVariance(j)
            means.append(float(np.mean(col)))
            sds.append(sd)

    target_sd = float(np.std(target, ddof=1))
    if not target_sd > 0:
        raise ZeroVariance("target")
    params = ScalerParams(dropped, kinds, means, sds, float(np.mean(target)), target_sd)
    return _transform(features, target, params), params


def apply_preprocess(raw: RawTable, target_col: int, params: ScalerParams) -> Dataset:
    if raw.n_cols - 1 != params.n_features:
        raise SchemaMismatch(
            f"table has {raw.n_cols - 1} feature columns, scaler expects {params.n_features}"
        )
    features, target = _split_target(raw, target_col)
    return _transform(features, target, params)


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def split_indices(n: int, ratios=(0.6, 0.2, 0.2), seed: int = 42):
    """Seeded permutation cut into train/val/test index arrays.

    Sizes are floor(ratio * n) for validation and test; train takes the remainder.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(not r > 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must be three positive numbers summing to 1, got {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    n_val = int(math.floor(ratios[1] * n))
    n_test = int(math.floor(ratios[2] * n))
    n_train = n - n_val - n_test
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def split(ds: Dataset, ratios=(0.6, 0.2, 0.2), seed: int = 42):
    return tuple(ds.take(idx) for idx in split_indices(ds.n, ratios, seed))


def fingerprint(indices) -> str:
    """Short stable digest of an index array, for checking that runs share splits."""
    arr = np.ascontiguousarray(np.asarray(indices, dtype=np.int64))
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------

def histogram(values, n_bins: int = 50) -> Histogram:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyInput("histogram of an empty vector")
    if n_bins < 1:
        raise EmptyInput("n_bins must be at least 1")
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        # degenerate range: widen symmetrically so edges stay strictly increasing
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, n_bins + 1)
    # bin i is [edge_i, edge_{i+1}); the maximum lands in the last bin
    idx = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return Histogram(edges, counts)
