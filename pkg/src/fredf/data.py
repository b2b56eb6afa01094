"""CSV ingestion, chronological splits, sliding windows, scaling and synthetic series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .numkit import make_rng

BURN_IN = 100
STD_FLOOR = 1e-12


class DataError(ValueError):
    """Raised for malformed, missing or insufficient data."""


@dataclass(frozen=True)
class RawSeries:
    values: np.ndarray
    names: tuple = ()
    timestamps: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DataError(f"series must be 2-D (N, D), got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("series contains missing or non-finite values")
        object.__setattr__(self, "values", v)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{i}" for i in range(v.shape[1])))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> "RawSeries":
        ts = None if self.timestamps is None else self.timestamps[start:stop]
        return RawSeries(self.values[start:stop], self.names, ts)


def load_csv(path, has_timestamp_column: bool = False) -> RawSeries:
    """Read a header-first numeric CSV; an optional leading column holds timestamps."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    first = 1 if has_timestamp_column else 0
    names = tuple(h.strip() for h in header[first:])
    if not names:
        raise DataError(f"{path}: no numeric columns")
    if not body:
        raise DataError(f"{path}: header but no data rows")
    values = np.empty((len(body), len(names)))
    stamps = []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
        if has_timestamp_column:
            stamps.append(row[0])
        for j, cell in enumerate(row[first:]):
            try:
                x = float(cell)
            except ValueError:
                raise DataError(f"{path}: unparseable value {cell!r} at row {i}, column {j + first + 1}") from None
            if not math.isfinite(x):
                raise DataError(f"{path}: missing value at row {i}, column {j + first + 1}")
            values[i - 2, j] = x
    return RawSeries(values, names, tuple(stamps) if has_timestamp_column else None)


def write_csv(series: RawSeries, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        lead = ["date"] if series.timestamps is not None else []
        w.writerow(lead + list(series.names))
        for i, row in enumerate(series.values):
            stamp = [series.timestamps[i]] if series.timestamps is not None else []
            w.writerow(stamp + [repr(float(x)) for x in row])


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/val/test boundaries, as fractions or row counts.

    Fractions must sum to one; counts must sum to the series length. With
    fractions, train and val are rounded and test takes the remainder.
    """

    train: float
    val: float
    test: float

    def counts(self, n: int) -> tuple:
        parts = (self.train, self.val, self.test)
        if any(p < 0 for p in parts):
            raise DataError(f"negative split size in {parts}")
        if all(float(p).is_integer() and p >= 1 or p == 0 for p in parts) and sum(parts) > 1:
            counts = tuple(int(p) for p in parts)
            if sum(counts) != n:
                raise DataError(f"split counts {counts} sum to {sum(counts)}, series has {n} rows")
            return counts
        if abs(sum(parts) - 1.0) > 1e-9:
            raise DataError(f"split fractions {parts} do not sum to 1")
        tr = int(round(n * self.train))
        va = int(round(n * self.val))
        if tr + va > n:
            raise DataError(f"split fractions {parts} overflow {n} rows")
        return tr, va, n - tr - va

    @classmethod
    def parse(cls, text: str) -> "SplitSpec":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"split needs three comma-separated values, got {text!r}")
        return cls(*parts)

    def to_list(self) -> list:
        return [self.train, self.val, self.test]


def split_chronological(series: RawSeries, spec: SplitSpec) -> tuple:
    """Contiguous (train, val, test) segments in time order."""
    tr, va, te = spec.counts(series.n)
    return series.slice(0, tr), series.slice(tr, tr + va), series.slice(tr + va, tr + va + te)


def truncate_front(series: RawSeries, fraction: float) -> RawSeries:
    """Keep the most recent ``fraction`` of rows (oldest data dropped)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"train fraction must lie in (0, 1], got {fraction}")
    keep = int(math.ceil(series.n * fraction))
    return series.slice(series.n - keep, series.n)


@dataclass(frozen=True)
class WindowedDataset:
    """Stride-1 (input, label) windows over one segment.

    Window ``i`` uses rows ``i .. i+h-1`` as input and the following ``t`` rows
    as label. ``inputs`` and ``labels`` are read-only views, not copies.
    """

    values: np.ndarray
    h: int
    t: int
    offset: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0] - self.h - self.t + 1

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def inputs(self) -> np.ndarray:
        """(N, h, D) view."""
        return sliding_window_view(self.values[: len(self) + self.h - 1], self.h, axis=0).transpose(0, 2, 1)

    @property
    def labels(self) -> np.ndarray:
        """(N, t, D) view."""
        return sliding_window_view(self.values[self.h:], self.t, axis=0).transpose(0, 2, 1)

    def window(self, i: int) -> tuple:
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self.values[i: i + self.h], self.values[i + self.h: i + self.h + self.t]

    def batch(self, idx) -> tuple:
        idx = np.asarray(idx)
        return self.inputs[idx], self.labels[idx]

    def index_span(self, i: int) -> tuple:
        """Absolute (first, last) row indices touched by window ``i``."""
        return self.offset + i, self.offset + i + self.h + self.t - 1


def make_windows(segment, h: int, t: int, offset: int = 0) -> WindowedDataset:
    values = segment.values if isinstance(segment, RawSeries) else np.asarray(segment, dtype=np.float64)
    if h < 1 or t < 1:
        raise ValueError("h and t must be >= 1")
    if values.shape[0] < h + t:
        raise DataError(f"segment of length {values.shape[0]} is shorter than h + t = {h + t}")
    return WindowedDataset(values, h, t, offset)


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    passthrough: list = field(default_factory=list)

    @classmethod
    def fit(cls, values) -> "Scaler":
        v = np.asarray(values, dtype=np.float64)
        mean = v.mean(axis=0)
        std = v.std(axis=0)
        flat = [int(i) for i in np.flatnonzero(std < STD_FLOOR)]
        mean[flat] = 0.0
        std[flat] = 1.0
        return cls(mean, std, flat)

    def transform(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def inverse_transform(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "passthrough": self.passthrough}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64), list(d["passthrough"]))


def synth_ar(coeff: float, n: int, d: int = 1, seed: int = 0, noise_sd: float = 1.0) -> RawSeries:
    """AR(1) channels ``x_t = coeff * x_{t-1} + e_t`` after a 100-step burn-in."""
    if not abs(coeff) < 1:
        raise ValueError(f"AR coefficient must satisfy |phi| < 1, got {coeff}")
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = make_rng(seed)
    eps = noise_sd * rng.standard_normal((n + BURN_IN, d))
    return RawSeries(_ar_filter(eps, coeff)[BURN_IN:])


def _ar_filter(eps: np.ndarray, coeff: float) -> np.ndarray:
    x = np.empty_like(eps)
    x[0] = eps[0]
    for i in range(1, eps.shape[0]):
        x[i] = coeff * x[i - 1] + eps[i]
    return x


def synth_sines(
    freqs: Sequence[float],
    amplitudes: Sequence[float],
    noise_sd: float,
    n: int,
    d: int = 1,
    seed: int = 0,
    noise_phi: float = 0.0,
    random_phase: bool = True,
) -> RawSeries:
    """Sum of sinusoids per channel plus (optionally AR(1)) Gaussian noise.

    ``freqs`` are in cycles per step. Each channel draws its own phases when
    ``random_phase`` is set.
    """
    freqs = [float(f) for f in freqs]
    amplitudes = [float(a) for a in amplitudes]
    if len(freqs) != len(amplitudes) or not freqs:
        raise ValueError("need one amplitude per frequency")
    if noise_sd < 0 or not abs(noise_phi) < 1:
        raise ValueError("noise_sd must be >= 0 and |noise_phi| < 1")
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = make_rng(seed)
    t = np.arange(n)[:, None]
    out = np.zeros((n, d))
    for f, a in zip(freqs, amplitudes):
        phase = rng.uniform(0, 2 * np.pi, size=d) if random_phase else np.zeros(d)
        out += a * np.sin(2 * np.pi * f * t + phase)
    eps = rng.standard_normal((n + BURN_IN, d))
    noise = _ar_filter(eps, noise_phi)[BURN_IN:]
    if noise_phi:
        noise *= math.sqrt(1 - noise_phi**2)
    return RawSeries(out + noise_sd * noise)
