"""Temporal, frequency and fused forecast losses with analytic gradients.

All losses take forecast and label arrays shaped ``(..., T, D)`` and return a
:class:`LossValueGrad`. Values are means over every element (or spectral bin)
so magnitudes do not grow with the horizon; the gradient is with respect to
the forecast.

The frequency loss measures the transformed residual in one of three ways:

* ``FULL``: ``|F(yhat) - F(y)|`` per bin (complex modulus, or ``|re| + |im|``
  with ``norm="componentwise"``; ``norm="squared"`` gives ``|.|**2``).
* ``AMPLITUDE_ONLY``: ``| |F(yhat)| - |F(y)| |``.
* ``PHASE_ONLY``: ``|F(y)| * |wrap(angle F(yhat) - angle F(y))|``; bins whose
  label magnitude is below ``1e-9`` contribute nothing.

Every variant's gradient has the form ``Re(A^H s) / n_bins`` where ``A`` is
the (linear) transform and ``s`` a per-bin complex sensitivity, so the same
adjoint serves all of them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .transform import (
    BasisKind,
    TransformAxis,
    _cached_basis,
    dft_adjoint,
    dft_forward,
    projection_matrix,
)

KINK_TOL = 1e-12
PHASE_SKIP = 1e-9
NORMS = ("modulus", "componentwise", "squared")


class LossVariant(enum.Enum):
    FULL = "full"
    AMPLITUDE_ONLY = "amplitude"
    PHASE_ONLY = "phase"


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.8
    axis: TransformAxis = TransformAxis.TIME
    basis: BasisKind = BasisKind.FOURIER
    variant: LossVariant = LossVariant.FULL
    norm: str = "modulus"

    def __post_init__(self):
        alpha = float(self.alpha)
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "axis", TransformAxis(self.axis))
        object.__setattr__(self, "basis", BasisKind(self.basis))
        object.__setattr__(self, "variant", LossVariant(self.variant))
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if self.basis is not BasisKind.FOURIER and self.axis is not TransformAxis.TIME:
            raise ValueError("polynomial bases are only defined along the time axis")
        if self.norm != "modulus" and self.variant is not LossVariant.FULL:
            raise ValueError("alternative norms apply to the full residual only")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "axis": self.axis.value,
            "basis": self.basis.value,
            "variant": self.variant.value,
            "norm": self.norm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        return cls(**d)


@dataclass(frozen=True)
class LossValueGrad:
    value: float
    grad: np.ndarray


def _check_pair(yhat, y):
    yhat = np.asarray(yhat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if yhat.shape != y.shape:
        raise ValueError(f"shape mismatch: forecast {yhat.shape} vs label {y.shape}")
    if yhat.ndim < 2:
        raise ValueError(f"expected (T, D) matrices, got shape {y.shape}")
    return yhat, y


def temporal_loss(yhat, y) -> LossValueGrad:
    """Mean squared error over all elements and its gradient ``2 (yhat - y) / n``."""
    yhat, y = _check_pair(yhat, y)
    diff = yhat - y
    n = diff.size
    return LossValueGrad(float(np.sum(diff * diff) / n), 2.0 * diff / n)


def _operators(shape, cfg: LossConfig) -> tuple:
    """Forward transform and its adjoint for the configured basis and axis."""
    if cfg.basis is BasisKind.FOURIER:
        axis = cfg.axis
        return (lambda a: dft_forward(a, axis)), (lambda s: dft_adjoint(s, axis))
    proj = projection_matrix(_cached_basis(cfg.basis, shape[-2]))
    return (lambda a: (proj @ a).astype(np.complex128)), (lambda s: proj.T @ s)


def _sensitivity(f_hat, f_lab, cfg: LossConfig):
    """Per-bin loss values and d(loss)/d(conj bin) sensitivities."""
    if cfg.variant is LossVariant.FULL:
        r = f_hat - f_lab
        if cfg.norm == "squared":
            return np.abs(r) ** 2, 2.0 * r
        if cfg.norm == "componentwise":
            vals = np.abs(r.real) + np.abs(r.imag)
            sens = np.sign(r.real) + 1j * np.sign(r.imag)
            return vals, sens
        mod = np.abs(r)
        safe = np.where(mod > KINK_TOL, mod, 1.0)
        return mod, np.where(mod > KINK_TOL, r / safe, 0.0)

    amp_hat = np.abs(f_hat)
    amp_lab = np.abs(f_lab)
    live = amp_hat > KINK_TOL
    safe_hat = np.where(live, f_hat, 1.0)
    if cfg.variant is LossVariant.AMPLITUDE_ONLY:
        gap = amp_hat - amp_lab
        unit = np.where(live, safe_hat / np.abs(safe_hat), 0.0)
        return np.abs(gap), np.sign(gap) * unit

    # phase only
    keep = amp_lab >= PHASE_SKIP
    dphi = np.angle(f_hat) - np.angle(f_lab)
    dphi = np.pi - np.mod(np.pi - dphi, 2 * np.pi)  # wrap to (-pi, pi]
    vals = np.where(keep, amp_lab * np.abs(dphi), 0.0)
    coef = np.where(keep & live, amp_lab * np.sign(dphi), 0.0)
    sens = coef * 1j * safe_hat / np.abs(safe_hat) ** 2
    return vals, np.where(keep & live, sens, 0.0)


def frequency_loss(yhat, y, cfg: LossConfig | None = None) -> LossValueGrad:
    """Mean per-bin distance between the transformed forecast and label."""
    cfg = cfg or LossConfig()
    yhat, y = _check_pair(yhat, y)
    forward, adjoint = _operators(y.shape, cfg)
    f_hat = forward(yhat)
    f_lab = forward(y)
    vals, sens = _sensitivity(f_hat, f_lab, cfg)
    n = vals.size
    grad = np.real(adjoint(sens)) / n
    return LossValueGrad(float(np.sum(vals) / n), np.ascontiguousarray(grad))


def combined_loss(yhat, y, cfg: LossConfig | None = None) -> LossValueGrad:
    """``alpha * frequency_loss + (1 - alpha) * temporal_loss``."""
    cfg = cfg or LossConfig()
    if cfg.alpha == 0.0:
        return temporal_loss(yhat, y)
    if cfg.alpha == 1.0:
        return frequency_loss(yhat, y, cfg)
    tmp = temporal_loss(yhat, y)
    feq = frequency_loss(yhat, y, cfg)
    a = cfg.alpha
    return LossValueGrad(a * feq.value + (1 - a) * tmp.value, a * feq.grad + (1 - a) * tmp.grad)


def bias_formula(y, yhat, rho, sigma: float) -> float:
    """Gap between the squared-error objective and the conditional Gaussian NLL.

    ``rho[i, j]`` (``j < i``) is the partial correlation of step ``i`` with an
    earlier step ``j``; entries on or above the diagonal are ignored. Both sums
    drop terms that do not depend on the forecast.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    rho = np.tril(np.asarray(rho, dtype=np.float64), k=-1)
    t = y.size
    if yhat.size != t or rho.shape != (t, t):
        raise ValueError("y, yhat and rho dimensions disagree")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rho_sq = np.sum(rho * rho, axis=1)
    if np.any(rho_sq >= 1.0):
        bad = int(np.argmax(rho_sq >= 1.0))
        raise ValueError(f"degenerate conditional variance at step {bad}: rho^2 = {rho_sq[bad]:.4g}")
    err = y - yhat
    cond_err = err - rho @ err
    s2 = 2.0 * sigma * sigma
    # per-step difference, so uncorrelated labels give exactly zero
    return float(np.sum(err**2 / s2 - cond_err**2 / (s2 * (1.0 - rho_sq))))
