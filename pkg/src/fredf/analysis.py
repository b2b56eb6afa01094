"""Partial-correlation estimates between label steps and between frequency bins.

Each estimate is a two-stage residual regression (double machine learning with
linear first-stage learners and no cross-fitting):

1. regress treatment and outcome on the controls (with intercept) and keep the
   residuals;
2. regress the outcome residual on the treatment residual (no intercept).

The stage-2 slope ``beta`` is reported as the strength of the direct link from
treatment to outcome once the controls are accounted for. Canonical DML would
cross-fit the first stage; with linear learners the in-sample version is the
Frisch-Waugh-Lovell slope and is used as-is.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DataError, WindowedDataset
from .numkit import ols_solve
from .transform import TransformAxis, dft_forward, one_sided

DEGENERATE_VAR = 1e-12
MIN_WINDOWS = 30


class CorrDomain(enum.Enum):
    TIME = "time"
    FREQ_REAL = "freq_real"
    FREQ_IMAG = "freq_imag"


@dataclass(frozen=True)
class DmlEstimate:
    beta: float
    stderr: float
    residual_var_treatment: float
    residual_var_outcome: float
    n_used: int
    degenerate: bool = False


def _with_intercept(controls, n: int) -> np.ndarray:
    c = np.asarray(controls, dtype=np.float64)
    if c.ndim == 1:
        c = c[:, None]
    if c.shape[0] != n:
        raise ValueError(f"controls have {c.shape[0]} rows, expected {n}")
    return np.column_stack([np.ones(n), c])


def _residualize(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    return targets - design @ ols_solve(design, targets)


def dml_partial_corr(treatment, outcome, controls) -> DmlEstimate:
    t = np.asarray(treatment, dtype=np.float64).ravel()
    y = np.asarray(outcome, dtype=np.float64).ravel()
    n = t.size
    if y.size != n:
        raise ValueError("treatment and outcome lengths differ")
    design = _with_intercept(controls, n)
    p = design.shape[1] - 1
    if n <= p + 2:
        raise ValueError(f"need more than {p + 2} observations for {p} controls, got {n}")
    res = _residualize(design, np.column_stack([t, y]))
    rt, ry = res[:, 0], res[:, 1]
    var_t = float(np.mean(rt * rt))
    var_y = float(np.mean(ry * ry))
    if var_t < DEGENERATE_VAR:
        return DmlEstimate(math.nan, math.nan, var_t, var_y, n, degenerate=True)
    beta = float(ols_solve(rt[:, None], ry)[0])
    eps = ry - beta * rt
    dof = n - p - 2
    stderr = math.sqrt(float(eps @ eps) / dof / float(rt @ rt))
    return DmlEstimate(beta, stderr, var_t, var_y, n)


@dataclass
class CorrMatrix:
    """Lower triangle holds ``beta`` (treatment column -> later outcome row); the
    upper triangle mirrors it for display and the diagonal is 1.

    ``degenerate`` lists indices whose residual variance vanished (for example
    the imaginary part of the zero-frequency bin); their off-diagonal entries
    are 0.
    """

    values: np.ndarray
    domain: CorrDomain
    horizon: int
    degenerate: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def off_diagonal(self) -> np.ndarray:
        """Strictly-lower-triangle entries between non-degenerate indices."""
        keep = np.ones(self.size, dtype=bool)
        keep[self.degenerate] = False
        rows, cols = np.tril_indices(self.size, k=-1)
        mask = keep[rows] & keep[cols]
        return self.values[rows[mask], cols[mask]]

    def exceedance(self, threshold: float) -> float:
        """Fraction of off-diagonal entries with ``|beta| > threshold``."""
        off = self.off_diagonal()
        return float(np.mean(np.abs(off) > threshold)) if off.size else 0.0

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.value,
            "T": self.horizon,
            "size": self.size,
            "degenerate": list(self.degenerate),
            "values": self.values.tolist(),
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in self.values:
                w.writerow([repr(float(v)) for v in row])


def _beta_matrix(columns: np.ndarray, controls: np.ndarray):
    """Pairwise stage-2 slopes for every ordered column pair.

    Equivalent to calling :func:`dml_partial_corr` on each pair, sharing the
    first-stage fit since all pairs use the same controls.
    """
    n, k = columns.shape
    design = _with_intercept(controls, n)
    if n <= design.shape[1] + 1:
        raise DataError(f"only {n} windows for {design.shape[1] - 1} controls")
    res = _residualize(design, columns)
    gram = res.T @ res
    var = np.diag(gram) / n
    degenerate = [int(i) for i in np.flatnonzero(var < DEGENERATE_VAR)]
    denom = np.where(var < DEGENERATE_VAR, 1.0, np.diag(gram))
    beta = gram / denom[None, :]  # beta[t', t] = <r_t, r_t'> / <r_t, r_t>
    out = np.tril(beta, k=-1)
    out[degenerate, :] = 0.0
    out[:, degenerate] = 0.0
    out = out + out.T
    np.fill_diagonal(out, 1.0)
    return out, degenerate


def _controls(dataset: WindowedDataset, variable: int, full_controls: bool) -> np.ndarray:
    x = dataset.inputs
    if full_controls:
        return x.reshape(x.shape[0], -1)
    return x[:, -1, variable]


def _check(dataset: WindowedDataset, variable: int) -> int:
    if len(dataset) < MIN_WINDOWS:
        raise DataError(f"need at least {MIN_WINDOWS} windows, got {len(dataset)}")
    if not -dataset.d <= variable < dataset.d:
        raise ValueError(f"variable index {variable} out of range for {dataset.d} variables")
    return variable % dataset.d


def time_corr_matrix(dataset: WindowedDataset, variable: int = -1, full_controls: bool = False) -> CorrMatrix:
    """Partial-correlation matrix between label steps of one variable.

    Controls are the variable's last input value, or the whole input window
    with ``full_controls``.
    """
    variable = _check(dataset, variable)
    labels = dataset.labels[:, :, variable]
    values, degenerate = _beta_matrix(labels, _controls(dataset, variable, full_controls))
    return CorrMatrix(values, CorrDomain.TIME, dataset.t, degenerate)


def freq_corr_matrix(dataset: WindowedDataset, variable: int = -1, full_controls: bool = False) -> tuple:
    """Real-part and imaginary-part partial-correlation matrices between
    one-sided DFT bins (``T//2 + 1`` of them) of one variable's labels."""
    variable = _check(dataset, variable)
    labels = dataset.labels[:, :, variable : variable + 1]
    spec = one_sided(dft_forward(labels, TransformAxis.TIME))[:, :, 0]
    controls = _controls(dataset, variable, full_controls)
    out = []
    for part, domain in ((spec.real, CorrDomain.FREQ_REAL), (spec.imag, CorrDomain.FREQ_IMAG)):
        values, degenerate = _beta_matrix(np.ascontiguousarray(part), controls)
        out.append(CorrMatrix(values, domain, dataset.t, degenerate))
    return tuple(out)
