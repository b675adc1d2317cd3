"""CSV ingestion, chronological splits, sliding windows and synthetic series."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError

SPLITS = ("train", "val", "test")

# rows and variables of the public benchmarks, for sanity checks on load
KNOWN_SHAPES = {
    "ETTm1": (69680, 7), "ETTm2": (69680, 7), "ETTh1": (17420, 7), "ETTh2": (17420, 7),
    "ECL": (26304, 321), "Exchange": (7588, 9), "Weather": (52696, 21), "Solar": (52179, 137),
}


@dataclass
class SeriesTable:
    names: list[str]
    values: np.ndarray  # [L_total, N]
    timestamps: list[str] = field(default_factory=list)
    source: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise DataError(f"values shape {self.values.shape} does not match {len(self.names)} names")

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]


def load_csv(path, expected_vars: int | None = None, expected_rows: int | None = None) -> SeriesTable:
    """Header row, first column timestamp, remaining columns numeric.

    Blank or unparsable cells are errors naming the (1-based) file line and
    column; nothing is imputed.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need a timestamp column and at least one variable")
        names = [h.strip() for h in header[1:]]
        stamps, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            vals = []
            for col, cell in zip(names, row[1:]):
                cell = cell.strip()
                if cell == "":
                    raise DataError(f"{path}:{lineno}: missing value in column {col!r}")
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: cannot parse {cell!r} in column {col!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}:{lineno}: non-finite value in column {col!r}")
                vals.append(v)
            stamps.append(row[0])
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = SeriesTable(names, np.array(rows), stamps, source=path.stem)
    if expected_vars is not None and table.n_vars != expected_vars:
        raise DataError(f"{path}: expected {expected_vars} variables, found {table.n_vars}")
    if expected_rows is not None and len(table) != expected_rows:
        raise DataError(f"{path}: expected {expected_rows} rows, found {len(table)}")
    return table


def split_borders(name: str, length: int) -> list[tuple[int, int]]:
    """Chronological [start, end) rows for train/val/test.

    ETT files use 12/4/4 months (24 steps/day for ETTh*, 96 for ETTm*);
    anything else is split 70/10/20.
    """
    if name.startswith("ETTh") or name.startswith("ETTm"):
        per_day = 24 if name.startswith("ETTh") else 96
        month = 30 * per_day
        cuts = [0, 12 * month, 16 * month, 20 * month]
        if length < cuts[-1]:
            raise DataError(f"{name}: {length} rows is shorter than the 20-month ETT split")
    else:
        n_train = int(length * 0.7)
        n_test = int(length * 0.2)
        cuts = [0, n_train, length - n_test, length]
    return [(cuts[i], cuts[i + 1]) for i in range(3)]


@dataclass
class WindowedDataset:
    """Sliding windows over a (possibly globally scaled) series.

    Window ``j`` of a split starting at row ``s`` reads inputs
    ``[s + j, s + j + T)`` and targets ``[s + j + T, s + j + T + horizon)``.
    """

    series: np.ndarray  # [L_total, N], already scaled if ``scaled``
    seq_len: int
    horizon: int
    borders: dict[str, tuple[int, int]]
    scaled: bool = False
    scaler_mean: np.ndarray | None = None
    scaler_std: np.ndarray | None = None
    names: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return self.series.shape[1]

    def n_windows(self, split: str) -> int:
        s, e = self.borders[split]
        return max(0, (e - s) - (self.seq_len + self.horizon) + 1)

    def starts(self, split: str) -> np.ndarray:
        s, _ = self.borders[split]
        return s + np.arange(self.n_windows(split))

    def _view(self) -> np.ndarray:
        # [L - T - tau + 1, N, T + tau] without copying
        return sliding_window_view(self.series, self.seq_len + self.horizon, axis=0)

    def batch(self, starts) -> tuple[np.ndarray, np.ndarray]:
        """Inputs [B, N, T] and targets [B, N, horizon] for absolute start rows."""
        w = self._view()[np.asarray(starts)]
        return np.ascontiguousarray(w[..., : self.seq_len]), np.ascontiguousarray(w[..., self.seq_len:])

    def inputs(self, split: str) -> np.ndarray:
        return self.batch(self.starts(split))[0]

    def targets(self, split: str) -> np.ndarray:
        return self.batch(self.starts(split))[1]

    def split_tags(self) -> list[tuple[int, str]]:
        return [(int(s), name) for name in SPLITS for s in self.starts(name)]


def make_windows(table: SeriesTable, seq_len: int, horizon: int, split_spec=None,
                 scale: bool = True) -> WindowedDataset:
    """Stride-1 windows that never cross split borders.

    ``split_spec`` is ``None`` (convention by table name), ``"single"`` (all
    rows train), a tuple of three ratios, or explicit borders.
    """
    L = len(table)
    need = seq_len + horizon
    if L < need:
        raise DataError(f"series has {L} rows; need at least seq_len + horizon = {need}")
    if split_spec is None:
        borders = split_borders(table.source, L)
    elif split_spec == "single":
        borders = [(0, L), (L, L), (L, L)]
    elif len(split_spec) == 3 and all(isinstance(r, float) for r in split_spec):
        if abs(sum(split_spec) - 1.0) > 1e-9 or min(split_spec) < 0:
            raise DataError(f"split ratios must be non-negative and sum to 1, got {split_spec}")
        a = int(L * split_spec[0])
        b = a + int(L * split_spec[1])
        borders = [(0, a), (a, b), (b, L)]
    else:
        borders = [tuple(map(int, b)) for b in split_spec]
    named = dict(zip(SPLITS, borders))

    values = table.values
    mean = std = None
    if scale:
        s, e = named["train"]
        mean = values[s:e].mean(axis=0)
        std = values[s:e].std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        values = (values - mean) / std
    return WindowedDataset(values, seq_len, horizon, named, scale, mean, std, list(table.names))


def synth_multiperiodic(length: int, n_vars: int, periods, noise_std: float = 0.0,
                        seed: int = 0) -> SeriesTable:
    """Per variable, a sum of unit sinusoids at ``periods`` with random phases
    and amplitudes in [0.5, 1.5], plus i.i.d. Gaussian noise."""
    periods = list(periods)
    if not periods:
        raise DataError("need at least one period")
    if any(p < 2 for p in periods):
        raise DataError(f"periods must be >= 2, got {periods}")
    rng = np.random.default_rng(seed)
    n = np.arange(length)
    values = np.zeros((length, n_vars))
    for j in range(n_vars):
        for p in periods:
            amp = rng.uniform(0.5, 1.5)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            values[:, j] += amp * np.sin(2.0 * np.pi * np.mod(n, p) / p + phase)
    if noise_std > 0:
        values += rng.normal(0.0, noise_std, size=values.shape)
    return SeriesTable([f"x{j}" for j in range(n_vars)], values,
                       [str(i) for i in range(length)], source="synthetic")
