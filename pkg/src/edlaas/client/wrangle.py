"""Turn a delimited time series into normalized sliding windows."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import WrangleError
from ..nn.graph import SENTINEL_VALUE


@dataclass(frozen=True)
class WrangleSpec:
    """Declared normalization bounds; nothing is inferred from the data.

    ``numeric_columns`` maps column -> (min, max); ``categorical_columns`` maps
    column -> ordered category list. ``target_column`` must be numeric and is
    not used as a feature.
    """

    numeric_columns: dict
    categorical_columns: dict = field(default_factory=dict)
    window_length: int = 3
    target_column: str | None = None
    clamp: bool = False

    def __post_init__(self):
        if self.window_length < 1:
            raise WrangleError("window_length must be at least 1")
        for col, (lo, hi) in self.numeric_columns.items():
            if not lo < hi:
                raise WrangleError(f"column {col!r}: min {lo} must be below max {hi}")
        for col, cats in self.categorical_columns.items():
            if not cats or len(set(cats)) != len(cats):
                raise WrangleError(f"column {col!r}: categories must be non-empty and distinct")
        if self.target_column is not None and self.target_column not in self.numeric_columns:
            raise WrangleError("target_column needs declared numeric bounds")

    @property
    def feature_columns(self) -> list[str]:
        return [c for c in self.numeric_columns if c != self.target_column]

    @property
    def feature_names(self) -> list[str]:
        names = list(self.feature_columns)
        for col, cats in self.categorical_columns.items():
            names += [f"{col}={c}" for c in cats]
        return names

    def to_dict(self) -> dict:
        return {
            "numeric_columns": {c: {"min": lo, "max": hi} for c, (lo, hi) in self.numeric_columns.items()},
            "categorical_columns": {c: list(v) for c, v in self.categorical_columns.items()},
            "window_length": self.window_length,
            "target_column": self.target_column,
            "clamp": self.clamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WrangleSpec":
        try:
            numeric = {c: (float(b["min"]), float(b["max"])) for c, b in d["numeric_columns"].items()}
            return cls(numeric, {c: list(v) for c, v in d.get("categorical_columns", {}).items()},
                       int(d.get("window_length", 3)), d.get("target_column"), bool(d.get("clamp", False)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, WrangleError):
                raise
            raise WrangleError(f"malformed wrangle spec: {exc}") from exc

    @classmethod
    def load(cls, path) -> "WrangleSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


@dataclass(frozen=True, eq=False)
class Windows:
    features: np.ndarray  # (n_windows, window_length, n_features)
    targets: np.ndarray | None  # (n_windows,)
    feature_names: list[str]

    def __len__(self):
        return len(self.features)

    @property
    def n_features(self) -> int:
        return self.features.shape[2]

    def padded(self, slot_count: int, sentinel: bool = True) -> np.ndarray:
        """(n, T, slot_count) with zero padding and the sentinel in the last slot."""
        n, t, f = self.features.shape
        if f >= slot_count:
            raise WrangleError(f"{f} features do not fit {slot_count} slots plus the sentinel")
        out = np.zeros((n, t, slot_count))
        out[:, :, :f] = self.features
        if sentinel:
            out[:, :, -1] = SENTINEL_VALUE
        return out


def normalize(value: float, lo: float, hi: float, clamp: bool, column: str) -> float:
    if not lo <= value <= hi:
        if not clamp:
            raise WrangleError(f"column {column!r}: value {value} outside [{lo}, {hi}]")
        value = min(max(value, lo), hi)
    return (value - lo) / (hi - lo)


def one_hot(value: str, categories) -> list[float]:
    return [1.0 if value == c else 0.0 for c in categories]


def sliding_windows(rows: np.ndarray, length: int, stride: int = 1) -> np.ndarray:
    if len(rows) < length:
        return np.zeros((0, length) + rows.shape[1:])
    starts = range(0, len(rows) - length + 1, stride)
    return np.stack([rows[s:s + length] for s in starts])


def read_rows(csv_path) -> tuple[list[str], list[dict]]:
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise WrangleError(f"{csv_path}: missing header row")
        return list(reader.fieldnames), list(reader)


def wrangle(csv_path, spec: WrangleSpec, slot_count: int | None = None, stride: int = 1):
    """Normalize, one-hot encode and window a CSV.

    Returns ``Windows``; with ``slot_count`` also returns the padded array.
    The target of a window is the target column at its last row.
    """
    header, rows = read_rows(csv_path)
    needed = list(spec.numeric_columns) + list(spec.categorical_columns)
    missing = [c for c in needed if c not in header]
    if missing:
        raise WrangleError(f"unknown column(s): {', '.join(missing)}")
    feats, targets = [], []
    for i, row in enumerate(rows, start=2):
        vec = []
        for col in spec.feature_columns:
            lo, hi = spec.numeric_columns[col]
            vec.append(normalize(_number(row[col], col, i), lo, hi, spec.clamp, col))
        for col, cats in spec.categorical_columns.items():
            if row[col] not in cats:
                raise WrangleError(f"line {i}: column {col!r} has unknown category {row[col]!r}")
            vec += one_hot(row[col], cats)
        feats.append(vec)
        if spec.target_column is not None:
            lo, hi = spec.numeric_columns[spec.target_column]
            targets.append(normalize(_number(row[spec.target_column], spec.target_column, i),
                                     lo, hi, spec.clamp, spec.target_column))
    arr = np.array(feats, dtype=np.float64).reshape(len(feats), len(spec.feature_names))
    windows = sliding_windows(arr, spec.window_length, stride)
    tgt = None
    if spec.target_column is not None:
        t = np.array(targets)
        tgt = np.array([t[s + spec.window_length - 1]
                        for s in range(0, len(t) - spec.window_length + 1, stride)])
    out = Windows(windows, tgt, spec.feature_names)
    if slot_count is None:
        return out
    return out, out.padded(slot_count)


def _number(raw: str, column: str, line: int) -> float:
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise WrangleError(f"line {line}: column {column!r} is not numeric: {raw!r}") from None
    if not np.isfinite(v):
        raise WrangleError(f"line {line}: column {column!r} is not finite")
    return v
