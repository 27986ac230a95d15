"""Tabular dataset handling: CSV ingestion, standardization, and splits.

A dataset is a numeric feature matrix, binary labels, and named binary
protected columns.  Protected columns are carried alongside the features
and are never part of them, so models cannot see them while metric
learning still can.

CSV files must have a header row.  Rows containing a missing cell (empty
string, ``NA``, ``NaN``, ``nan`` or ``?``) are dropped during loading.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

MISSING_TOKENS = {"", "na", "nan", "?"}


def atomic_write_text(path, text: str) -> None:
    """Write a file via temp-then-rename so partial output is never visible."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_binary_column(values: np.ndarray, name: str) -> np.ndarray:
    if not np.all((values == 0.0) | (values == 1.0)):
        bad = values[(values != 0.0) & (values != 1.0)][0]
        raise ValueError(f"column {name!r} must be binary 0/1, found value {bad!r}")
    return values.astype(np.int64)


@dataclass
class Dataset:
    feature_names: tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray
    protected: dict[str, np.ndarray]
    label_name: str = "label"
    standardization: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        self.feature_names = tuple(self.feature_names)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = _check_binary_column(np.asarray(self.labels, dtype=np.float64), self.label_name)
        n = self.features.shape[0]
        if self.features.ndim != 2 or len(self.feature_names) != self.features.shape[1]:
            raise ValueError("feature_names must match the feature matrix width")
        if self.labels.shape != (n,):
            raise ValueError("labels length must match the number of rows")
        clean = {}
        for name, col in self.protected.items():
            if name in self.feature_names:
                raise ValueError(f"protected column {name!r} must not appear among the features")
            arr = _check_binary_column(np.asarray(col, dtype=np.float64), name)
            if arr.shape != (n,):
                raise ValueError(f"protected column {name!r} length must match the number of rows")
            clean[name] = arr
        self.protected = clean

    @property
    def n(self) -> int:
        return self.features.shape[0]


def load_csv(path, label_column: str, protected_columns=(), standardize: bool = False) -> Dataset:
    """Parse a headered CSV into a Dataset.

    Every column other than the label and protected ones is a feature and
    must be numeric.  With ``standardize`` set, feature columns that take
    values outside {0, 1} are z-scored (population standard deviation) and
    the applied (mean, sd) pairs are recorded on the returned dataset;
    binary and constant columns are left untouched.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise ValueError(f"{path}: duplicate header names {dupes}")
        for required in (label_column, *protected_columns):
            if required not in header:
                raise ValueError(f"{path}: column {required!r} not found in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            if any(cell.strip().lower() in MISSING_TOKENS for cell in row):
                continue
            rows.append((lineno, row))
    if not rows:
        raise ValueError(f"{path}: no complete rows after dropping missing entries")

    protected_set = set(protected_columns)
    feature_names = tuple(h for h in header if h != label_column and h not in protected_set)
    col_of = {h: i for i, h in enumerate(header)}

    def parse(name: str, kind: str) -> np.ndarray:
        j = col_of[name]
        out = np.empty(len(rows))
        for i, (lineno, row) in enumerate(rows):
            try:
                out[i] = float(row[j])
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: non-numeric {kind} cell {row[j]!r} in column {name!r}"
                ) from None
        return out

    features = np.column_stack([parse(name, "feature") for name in feature_names]) if feature_names else np.empty(
        (len(rows), 0)
    )
    labels = _check_binary_column(parse(label_column, "label"), label_column)
    protected = {name: _check_binary_column(parse(name, "protected"), name) for name in protected_columns}

    standardization: dict[str, tuple[float, float]] = {}
    if standardize:
        for j, name in enumerate(feature_names):
            col = features[:, j]
            if np.all((col == 0.0) | (col == 1.0)):
                continue
            mean = float(np.mean(col))
            sd = float(np.std(col))
            if sd == 0.0:
                continue
            features[:, j] = (col - mean) / sd
            standardization[name] = (mean, sd)

    return Dataset(
        feature_names=feature_names,
        features=features,
        labels=labels,
        protected=protected,
        label_name=label_column,
        standardization=standardization,
    )


def dataset_to_csv(ds: Dataset) -> str:
    """Render a dataset back to CSV text (features, label, protected columns)."""
    header = [*ds.feature_names, ds.label_name, *ds.protected.keys()]
    lines = [",".join(header)]
    for i in range(ds.n):
        cells = [repr(float(v)) for v in ds.features[i]]
        cells.append(str(int(ds.labels[i])))
        cells.extend(str(int(col[i])) for col in ds.protected.values())
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def save_csv(ds: Dataset, path) -> None:
    atomic_write_text(path, dataset_to_csv(ds))


def split_csv(path, train_path, audit_path, train_fraction: float, seed: int) -> tuple[int, int]:
    """Shuffle a CSV's data rows with a seeded RNG into disjoint train/audit files.

    Rows are moved verbatim (no reparsing), so the split is byte-faithful.
    Keeping the audit file disjoint from training data is what makes the
    audit's independence assumption hold by construction.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file, expected a header row")
    header, body = lines[0], [ln for ln in lines[1:] if ln.strip()]
    if len(body) < 2:
        raise ValueError(f"{path}: need at least two data rows to split")
    order = np.random.default_rng(seed).permutation(len(body))
    n_train = int(round(train_fraction * len(body)))
    n_train = min(max(n_train, 1), len(body) - 1)
    train_rows = [body[i] for i in order[:n_train]]
    audit_rows = [body[i] for i in order[n_train:]]
    atomic_write_text(train_path, "\n".join([header, *train_rows]) + "\n")
    atomic_write_text(audit_path, "\n".join([header, *audit_rows]) + "\n")
    return len(train_rows), len(audit_rows)
