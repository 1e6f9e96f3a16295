"""Tabular data loading, standardization, splitting and synthetic generators."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    EmptyTableError,
    InvalidArgumentError,
    InvalidDataError,
    MissingFileError,
    NonNumericCellError,
)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs ``(N, D)`` and targets ``(N,)``.

    ``column_names`` holds ``D + 1`` labels, inputs first and target last,
    when the source had a header.
    """

    inputs: np.ndarray
    targets: np.ndarray
    column_names: tuple | None = None

    def __post_init__(self):
        X = np.array(self.inputs, dtype=float)
        y = np.array(self.targets, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidArgumentError(f"inputs must be a non-empty 2-D array, got {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise InvalidArgumentError(
                f"{X.shape[0]} input rows but {y.shape[0]} targets"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("dataset contains non-finite values")
        names = self.column_names
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != X.shape[1] + 1:
                raise InvalidArgumentError(
                    f"expected {X.shape[1] + 1} column names, got {len(names)}"
                )
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dims(self) -> int:
        return self.inputs.shape[1]

    @property
    def input_names(self) -> tuple:
        if self.column_names is None:
            return tuple(f"x{d + 1}" for d in range(self.dims))
        return self.column_names[:-1]

    @property
    def target_name(self) -> str:
        return "y" if self.column_names is None else self.column_names[-1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.inputs[rows], self.targets[rows], self.column_names)


@dataclass(frozen=True)
class StandardizationStats:
    input_means: tuple
    input_stds: tuple
    target_mean: float = 0.0
    target_std: float = 1.0

    def __post_init__(self):
        stds = np.asarray(self.input_stds, dtype=float)
        if np.any(stds <= 0) or self.target_std <= 0:
            raise InvalidDataError("standard deviations must be positive")
        object.__setattr__(self, "input_means", tuple(float(v) for v in self.input_means))
        object.__setattr__(self, "input_stds", tuple(float(v) for v in self.input_stds))
        object.__setattr__(self, "target_mean", float(self.target_mean))
        object.__setattr__(self, "target_std", float(self.target_std))

    @classmethod
    def identity(cls, dims: int) -> "StandardizationStats":
        return cls((0.0,) * dims, (1.0,) * dims, 0.0, 1.0)

    def transform_inputs(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - np.asarray(self.input_means)) / np.asarray(self.input_stds)

    def inverse_inputs(self, Xs) -> np.ndarray:
        return np.asarray(Xs, dtype=float) * np.asarray(self.input_stds) + np.asarray(
            self.input_means
        )

    def transform_targets(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.target_mean) / self.target_std

    def apply(self, data: Dataset) -> Dataset:
        return Dataset(
            self.transform_inputs(data.inputs),
            self.transform_targets(data.targets),
            data.column_names,
        )

    def to_dict(self) -> dict:
        return {
            "input_means": list(self.input_means),
            "input_stds": list(self.input_stds),
            "target_mean": self.target_mean,
            "target_std": self.target_std,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StandardizationStats":
        return cls(
            tuple(payload["input_means"]),
            tuple(payload["input_stds"]),
            payload["target_mean"],
            payload["target_std"],
        )


def _parse_float(cell):
    try:
        value = float(cell)
    except ValueError:
        return None
    return value


def load_csv(path, target_column: str | int = -1) -> Dataset:
    """Read a comma-separated numeric table.

    A first row containing any non-numeric cell is taken as the header.
    ``target_column`` is a header name or a (possibly negative) column index;
    the remaining columns become inputs in file order.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), start=1) if any(c.strip() for c in row)]
    if not rows:
        raise EmptyTableError(f"{path} is empty")

    header = None
    first_line, first = rows[0]
    if any(_parse_float(c) is None for c in first):
        header = [c.strip() for c in first]
        rows = rows[1:]
    if not rows:
        raise EmptyTableError(f"{path} has a header but no data rows")

    width = len(header) if header is not None else len(rows[0][1])
    values = np.empty((len(rows), width))
    for r, (line, row) in enumerate(rows):
        if len(row) != width:
            raise NonNumericCellError(
                f"{path}: row {line} has {len(row)} cells, expected {width}", line, None
            )
        for c, cell in enumerate(row):
            v = _parse_float(cell)
            if v is None or not math.isfinite(v):
                col = header[c] if header is not None else c
                raise NonNumericCellError(
                    f"{path}: non-numeric or non-finite cell {cell!r} at row {line}, column {col}",
                    line,
                    col,
                )
            values[r, c] = v
    if width < 2:
        raise InvalidDataError(f"{path} needs at least one input column and a target")

    t = _resolve_column(target_column, header, width)
    keep = [c for c in range(width) if c != t]
    names = None
    if header is not None:
        names = tuple(header[c] for c in keep) + (header[t],)
    return Dataset(values[:, keep], values[:, t], names)


def _resolve_column(column, header, width):
    if isinstance(column, str):
        try:
            column = int(column)
        except ValueError:
            if header is None or column not in header:
                raise InvalidArgumentError(f"target column {column!r} not found") from None
            return header.index(column)
    if not -width <= column < width:
        raise InvalidArgumentError(f"target column index {column} out of range for {width} columns")
    return column % width


def save_csv(path, data: Dataset) -> None:
    names = list(data.input_names) + [data.target_name]
    write_table(path, names, np.column_stack([data.inputs, data.targets]))


def write_table(path, header: Sequence[str], rows) -> None:
    """Write a header plus numeric rows; floats use ``repr`` so they round-trip."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def fit_standardization(data: Dataset) -> StandardizationStats:
    X, y = data.inputs, data.targets
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    for d, s in enumerate(stds):
        if not s > 0:
            raise InvalidDataError(f"input column {data.input_names[d]!r} is constant")
    ystd = y.std()
    if not ystd > 0:
        raise InvalidDataError(f"target column {data.target_name!r} is constant")
    return StandardizationStats(tuple(means), tuple(stds), float(y.mean()), float(ystd))


def standardize(data: Dataset) -> tuple[Dataset, StandardizationStats]:
    """Shift and scale every column to zero mean and unit (population) std."""
    stats = fit_standardization(data)
    return stats.apply(data), stats


def destandardize_targets(values, stats: StandardizationStats) -> np.ndarray:
    return np.asarray(values, dtype=float) * stats.target_std + stats.target_mean


def split(data: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random train/test partition.

    The train size is ``round(train_fraction * N)`` clipped to ``[1, N - 1]``.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidArgumentError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = data.n
    if n < 2:
        raise InvalidArgumentError("need at least two rows to split")
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))


# ---------------------------------------------------------------------------
# synthetic long-range experiment
# ---------------------------------------------------------------------------

L_REGION_WIDTH = 0.3


def axis_sines(X) -> np.ndarray:
    """``sin(2 pi x1) + sin(2 pi x2)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.sin(2 * np.pi * X[:, 0]) + np.sin(2 * np.pi * X[:, 1])


def in_l_region(X, width: float = L_REGION_WIDTH) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    inside = np.all((X >= 0) & (X <= 1), axis=1)
    return inside & ((X[:, 0] <= width) | (X[:, 1] <= width))


def synth_axis_sines(
    n_train: int, grid_size: int, noise_sd: float, seed: int
) -> tuple[Dataset, Dataset, Callable]:
    """Training data on an L-shaped strip, test grid over the whole unit square.

    Training inputs are uniform on ``([0,1] x [0,0.3]) U ([0,0.3] x [0,1])``.
    The test grid is ``grid_size x grid_size`` with both ends included and
    noiseless targets.
    """
    if n_train < 1 or grid_size < 2:
        raise InvalidArgumentError("n_train must be >= 1 and grid_size >= 2")
    if noise_sd < 0:
        raise InvalidArgumentError("noise_sd must be nonnegative")
    rng = np.random.default_rng(seed)
    accepted = []
    count = 0
    while count < n_train:
        cand = rng.uniform(0.0, 1.0, size=(2 * n_train, 2))
        cand = cand[in_l_region(cand)]
        accepted.append(cand)
        count += len(cand)
    X = np.concatenate(accepted)[:n_train]
    y = axis_sines(X)
    if noise_sd > 0:
        y = y + noise_sd * rng.standard_normal(n_train)
    g = np.linspace(0.0, 1.0, grid_size)
    G1, G2 = np.meshgrid(g, g, indexing="ij")
    Xt = np.column_stack([G1.ravel(), G2.ravel()])
    names = ("x1", "x2", "y")
    return Dataset(X, y, names), Dataset(Xt, axis_sines(Xt), names), axis_sines
