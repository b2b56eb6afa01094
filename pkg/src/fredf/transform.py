"""Unitary DFT along time/variable axes and orthogonal-polynomial projections.

The forward transform of a length-``n`` axis is

    F_k = sum_t y_t * exp(-2j*pi*k*t/n) / sqrt(n),   k = 0..n-1

so it is unitary and its inverse is its adjoint. Power-of-two lengths use an
iterative radix-2 kernel; every other length goes through Bluestein's chirp-z
reduction to a power-of-two circular convolution.

Arrays are laid out as ``(..., T, D)``: time is axis -2 and variables axis -1.
Leading axes are treated as a batch.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
import numpy.polynomial as npoly

IMAG_TOL = 1e-6
CHEB_CLAMP = 1e-9
LAGUERRE_SPAN = 8.0


class TransformAxis(enum.Enum):
    TIME = "time"
    VARIABLE = "variable"
    BOTH = "both"


class BasisKind(enum.Enum):
    FOURIER = "fourier"
    LEGENDRE = "legendre"
    CHEBYSHEV = "chebyshev"
    LAGUERRE = "laguerre"


# ---------------------------------------------------------------------------
# FFT kernels (unnormalized, along the last axis)


@functools.lru_cache(maxsize=None)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


BASE = 32


@functools.lru_cache(maxsize=None)
def _dft_matrix(n: int, sign: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / n)


@functools.lru_cache(maxsize=None)
def _twiddles(n: int, start: int, sign: int) -> tuple:
    out = []
    m = start
    while m < n:
        out.append(np.exp(sign * 1j * np.pi * np.arange(m) / m))
        m *= 2
    return tuple(out)


def _radix2_cols(x: np.ndarray, sign: int) -> np.ndarray:
    """Decimation-in-time radix-2 FFT down axis 0 of an ``(n, M)`` array.

    The first ``log2(BASE)`` butterfly stages are replaced by one dense DFT of
    every stride-``n/BASE`` subsequence; the remaining stages run as usual.
    """
    n, cols = x.shape
    b = min(n, BASE)
    stride = n // b
    sub = (_dft_matrix(b, sign) @ x.reshape(b, stride * cols)).reshape(b, stride, cols)
    x = np.swapaxes(sub, 0, 1)[_bit_reverse(stride)].reshape(n, cols)
    out = np.empty_like(x)
    odd = np.empty((n // 2, cols), dtype=np.complex128)
    m = b
    for w in _twiddles(n, b, sign):
        blocks = n // (2 * m)
        src = x.reshape(blocks, 2, m, cols)
        dst = out.reshape(blocks, 2, m, cols)
        tw = odd.reshape(blocks, m, cols)
        np.multiply(src[:, 1], w[:, None], out=tw)
        np.add(src[:, 0], tw, out=dst[:, 0])
        np.subtract(src[:, 0], tw, out=dst[:, 1])
        x, out = out, x
        m *= 2
    return x.reshape(n, cols)


@functools.lru_cache(maxsize=None)
def _bluestein_plan(n: int, sign: int):
    m = 1 << (2 * n - 1).bit_length()
    k = np.arange(n)
    # k^2 mod 2n keeps the chirp phase accurate for long inputs
    phase = np.pi * ((k * k) % (2 * n)) / n
    chirp = np.exp(sign * 1j * phase)
    kernel = np.zeros((m, 1), dtype=np.complex128)
    kernel[:n, 0] = np.conj(chirp)
    kernel[m - n + 1:, 0] = np.conj(chirp[1:][::-1])
    return m, chirp[:, None], _radix2_cols(kernel, -1)


def _bluestein_cols(x: np.ndarray, sign: int) -> np.ndarray:
    n = x.shape[0]
    m, chirp, kernel_f = _bluestein_plan(n, sign)
    a = np.zeros((m, x.shape[1]), dtype=np.complex128)
    np.multiply(x, chirp, out=a[:n])
    conv = _radix2_cols(_radix2_cols(a, -1) * kernel_f, 1)
    return conv[:n] * (chirp / m)


def fft_cols(x, inverse: bool = False) -> np.ndarray:
    """Unnormalized DFT down axis 0 of an ``(n, M)`` array (``exp(+...)`` when ``inverse``)."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot transform an empty axis")
    sign = 1 if inverse else -1
    if n & (n - 1) == 0:
        return _radix2_cols(x, sign)
    return _bluestein_cols(x, sign)


def fft(x, inverse: bool = False) -> np.ndarray:
    """Unnormalized DFT along the last axis."""
    x = np.asarray(x, dtype=np.complex128)
    moved = np.moveaxis(x, -1, 0)
    out = fft_cols(moved.reshape(moved.shape[0], -1), inverse)
    return np.moveaxis(out.reshape(moved.shape), 0, -1)


def _unitary(x: np.ndarray, axis: int, inverse: bool) -> np.ndarray:
    moved = np.moveaxis(x, axis, 0)
    n = moved.shape[0]
    out = fft_cols(moved.reshape(n, -1), inverse) / math.sqrt(n)
    return np.moveaxis(out.reshape(moved.shape), 0, axis)


def _axes(axis: TransformAxis) -> tuple:
    axis = TransformAxis(axis)
    if axis is TransformAxis.TIME:
        return (-2,)
    if axis is TransformAxis.VARIABLE:
        return (-1,)
    return (-2, -1)


def dft_forward(y, axis: TransformAxis = TransformAxis.TIME) -> np.ndarray:
    """Unitary DFT of a ``(..., T, D)`` array along ``axis``.

    ``BOTH`` applies the time transform first and then the variable transform,
    giving an overall ``1/sqrt(T*D)`` scale.
    """
    y = np.asarray(y)
    if y.ndim < 2:
        raise ValueError(f"expected a (T, D) matrix, got shape {y.shape}")
    if y.shape[-2] == 0 or y.shape[-1] == 0:
        raise ValueError("cannot transform an empty matrix")
    out = y.astype(np.complex128)
    for ax in _axes(axis):
        out = _unitary(out, ax, inverse=False)
    return out


def dft_adjoint(f, axis: TransformAxis = TransformAxis.TIME) -> np.ndarray:
    """Complex inverse (= adjoint) of :func:`dft_forward`."""
    out = np.asarray(f, dtype=np.complex128)
    for ax in reversed(_axes(axis)):
        out = _unitary(out, ax, inverse=True)
    return out


def dft_inverse(f, axis: TransformAxis = TransformAxis.TIME) -> np.ndarray:
    """Real series whose :func:`dft_forward` is ``f``.

    Raises ``ValueError`` if the result has an imaginary part of at least
    ``1e-6``, which means ``f`` is not the spectrum of a real series.
    """
    out = dft_adjoint(f, axis)
    resid = np.max(np.abs(out.imag)) if out.size else 0.0
    if resid >= IMAG_TOL:
        raise ValueError(
            f"spectrum is not conjugate-symmetric (imaginary residue {resid:.3g})"
        )
    return out.real.copy()


def one_sided(f) -> np.ndarray:
    """Keep time-axis bins ``0 .. T//2`` of a spectrum of a real series."""
    f = np.asarray(f)
    t = f.shape[-2]
    return f[..., : t // 2 + 1, :].copy()


def full_spectrum(half, length: int) -> np.ndarray:
    """Rebuild the two-sided time-axis spectrum from :func:`one_sided` output."""
    half = np.asarray(half, dtype=np.complex128)
    if half.shape[-2] != length // 2 + 1:
        raise ValueError(f"one-sided spectrum has {half.shape[-2]} rows, expected {length // 2 + 1}")
    tail = np.conj(half[..., 1: (length + 1) // 2, :][..., ::-1, :])
    return np.concatenate([half, tail], axis=-2)


# ---------------------------------------------------------------------------
# Orthogonal bases


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    """``values[:, k]`` is the k-th basis function sampled on ``grid``."""

    kind: BasisKind
    length: int
    values: np.ndarray
    weights: np.ndarray
    grid: np.ndarray

    @property
    def columns(self) -> int:
        return self.values.shape[1]

    def gram(self) -> np.ndarray:
        return self.values.T @ (self.weights[:, None] * self.values)


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    n = grid.size
    if n == 1:
        return np.ones(1)
    h = np.diff(grid)
    w = np.zeros(n)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def _grid_and_weights(kind: BasisKind, length: int):
    if kind is BasisKind.FOURIER:
        return np.arange(length, dtype=np.float64), np.full(length, 1.0 / length)
    if kind is BasisKind.LAGUERRE:
        grid = np.arange(length) * (LAGUERRE_SPAN / length)
        return grid, _trapezoid_weights(grid) * np.exp(-grid)
    grid = np.linspace(-1.0, 1.0, length) if length > 1 else np.zeros(1)
    w = _trapezoid_weights(grid)
    if kind is BasisKind.CHEBYSHEV:
        clamped = np.clip(grid, -1.0 + CHEB_CLAMP, 1.0 - CHEB_CLAMP)
        w = w / np.sqrt(1.0 - clamped**2)
    return grid, w


def _classical(kind: BasisKind, grid: np.ndarray, k: int) -> np.ndarray:
    """Classical polynomials of degree 0..k-1 sampled on ``grid`` (stable recurrences)."""
    if kind is BasisKind.LEGENDRE:
        return npoly.legendre.legvander(grid, k - 1)
    if kind is BasisKind.CHEBYSHEV:
        return npoly.chebyshev.chebvander(grid, k - 1)
    # standard normalization L_k(0) = 1
    return npoly.laguerre.lagvander(grid, k - 1)


def _discrete_orthogonal(kind: BasisKind, grid, weights, k: int) -> np.ndarray:
    """Polynomials of degree 0..k-1 orthogonal under the discrete weights.

    Built with the Stieltjes recurrence (plus re-orthogonalization) in
    orthonormal form. Column ``j`` is then scaled to the weighted norm of the
    classical degree-``j`` polynomial on the same grid, with the sign of its
    leading coefficient.
    """
    n = grid.size
    p = np.zeros((n, k))
    p[:, 0] = 1.0 / math.sqrt(weights.sum())
    prev_b = 0.0
    for j in range(1, k):
        q = grid * p[:, j - 1]
        if j > 1:
            q = q - prev_b * p[:, j - 2]
        for _ in range(2):
            q = q - p[:, :j] @ (p[:, :j].T @ (weights * q))
        b = math.sqrt(float(np.sum(weights * q * q)))
        p[:, j] = q / b
        prev_b = b
    ref = _classical(kind, grid, k)
    scale = np.sqrt(np.sum(weights[:, None] * ref * ref, axis=0))
    if kind is BasisKind.LAGUERRE:
        scale = scale * (-1.0) ** np.arange(k)
    return p * scale


def _fourier_columns(length: int, k: int) -> np.ndarray:
    t = np.arange(length)
    cols = [np.ones(length)]
    m = 1
    while len(cols) < k:
        cols.append(np.cos(2 * np.pi * m * t / length))
        if len(cols) < k and 2 * m != length:
            cols.append(np.sin(2 * np.pi * m * t / length))
        m += 1
    return np.column_stack(cols)


def build_basis(kind: BasisKind, length: int, k: int | None = None) -> BasisMatrix:
    """Sample the first ``k`` basis functions of ``kind`` on a length-``length`` grid.

    Fourier columns are the real pairs ``1, cos(w1 t), sin(w1 t), cos(w2 t), ...``
    on ``t = 0..T-1`` (the sine at the Nyquist frequency is skipped). Legendre and
    Chebyshev live on ``T`` uniform points over [-1, 1]; Laguerre on
    ``t_i = 8 i / T``. Polynomial columns are orthogonalized under the discrete
    quadrature weights, so ``B' W B`` is diagonal up to rounding.
    """
    kind = BasisKind(kind)
    if k is None:
        k = length
    if length < 1 or k < 1:
        raise ValueError("basis length and column count must be >= 1")
    if k > length:
        raise ValueError(f"cannot build {k} basis columns on {length} points")
    grid, weights = _grid_and_weights(kind, length)
    if kind is BasisKind.FOURIER:
        values = _fourier_columns(length, k)
    else:
        values = _discrete_orthogonal(kind, grid, weights, k)
    for arr in (values, weights, grid):
        arr.setflags(write=False)
    return BasisMatrix(kind, length, values, weights, grid)


@functools.lru_cache(maxsize=64)
def _cached_basis(kind: BasisKind, length: int) -> BasisMatrix:
    return build_basis(kind, length, length)


@functools.lru_cache(maxsize=64)
def _projector(basis: BasisMatrix) -> np.ndarray:
    sw = np.sqrt(basis.weights)
    q, r = np.linalg.qr(sw[:, None] * basis.values)
    return np.linalg.solve(r, q.T * sw[None, :])


def projection_matrix(basis: BasisMatrix) -> np.ndarray:
    """(K, T) matrix mapping a sampled series to its weighted-LS coefficients."""
    return _projector(basis)


def project(y, basis: BasisMatrix) -> np.ndarray:
    """Weighted least-squares coefficients of ``y`` (T, D) on the basis, shape (K, D)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-2] != basis.length:
        raise ValueError(f"series has {y.shape[-2]} rows, basis expects {basis.length}")
    return projection_matrix(basis) @ y


def reconstruct(coeffs, basis: BasisMatrix) -> np.ndarray:
    return basis.values @ np.asarray(coeffs, dtype=np.float64)
