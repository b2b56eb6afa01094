"""Point-forecast error metrics for long-term (MSE, MAE) and short-term (SMAPE, MASE, OWA) tasks.

Short-term metrics treat axis 0 as time; any further axes index separate
series and the per-series values are averaged.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class MetricReport:
    mse: float
    mae: float
    n_windows: int
    smape: float | None = None
    mase: float | None = None
    owa: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _pair(yhat, y):
    yhat = np.asarray(yhat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if yhat.shape != y.shape:
        raise ValueError(f"shape mismatch: {yhat.shape} vs {y.shape}")
    return yhat, y


def mse(yhat, y) -> float:
    yhat, y = _pair(yhat, y)
    return float(np.mean((yhat - y) ** 2))


def mae(yhat, y) -> float:
    yhat, y = _pair(yhat, y)
    return float(np.mean(np.abs(yhat - y)))


def smape(yhat, y) -> float:
    """``200/n * sum |yhat - y| / (|yhat| + |y|)``, with 0/0 terms counted as 0."""
    yhat, y = _pair(yhat, y)
    num = np.abs(yhat - y)
    den = np.abs(yhat) + np.abs(y)
    ratio = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(200.0 * np.mean(ratio))


def _seasonal_scale(insample, m: int) -> np.ndarray:
    insample = np.asarray(insample, dtype=np.float64)
    if m < 1:
        raise ValueError("seasonality must be >= 1")
    if insample.shape[0] <= m:
        raise ValueError(f"in-sample length {insample.shape[0]} must exceed seasonality {m}")
    scale = np.mean(np.abs(insample[m:] - insample[:-m]), axis=0)
    if np.any(scale == 0):
        raise ValueError("seasonal-naive in-sample error is zero; MASE undefined")
    return scale


def mase(yhat, y, insample, m: int = 1) -> float:
    """Mean absolute error scaled by the in-sample seasonal-naive error."""
    yhat, y = _pair(yhat, y)
    scale = _seasonal_scale(insample, m)
    return float(np.mean(np.mean(np.abs(yhat - y), axis=0) / scale))


def seasonal_naive(insample, horizon: int, m: int = 1) -> np.ndarray:
    """Repeat the last ``m`` in-sample values over ``horizon`` steps."""
    insample = np.asarray(insample, dtype=np.float64)
    if insample.shape[0] < m:
        raise ValueError("in-sample shorter than one season")
    season = insample[-m:]
    reps = -(-horizon // m)
    return np.concatenate([season] * reps, axis=0)[:horizon]


def owa(smape_value: float, mase_value: float, ref_smape: float, ref_mase: float) -> float:
    if ref_smape == 0 or ref_mase == 0:
        raise ValueError("reference SMAPE/MASE must be nonzero")
    return 0.5 * (smape_value / ref_smape + mase_value / ref_mase)
