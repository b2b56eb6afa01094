"""Small dense linear-algebra and random-number helpers shared by the package.

Real and complex matrices are plain ``numpy`` arrays (``float64`` and
``complex128``) in row-major order. Random streams come from
:class:`numpy.random.Generator` seeded through :func:`make_rng`.
"""

from __future__ import annotations

import numpy as np

COND_LIMIT = 1e12
RIDGE_SCALE = 1e-8


def as_real_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array or raise ``ValueError``."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream for a 64-bit seed; equal seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def normal_draws(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` i.i.d. standard normal samples from ``rng``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return rng.standard_normal(int(n))


def ols_solve(design, target) -> np.ndarray:
    """Least-squares coefficients for ``design @ coef ~= target``.

    ``target`` may be a vector (n,) or a matrix (n, m); in the second case every
    column is solved against the same design and the result is (p, m).

    Well-conditioned systems go through ``lstsq`` on the design itself. When
    the Gram matrix is singular or its condition number exceeds ``1e12``, the
    normal equations are solved with a ridge term ``1e-8 * trace(X'X) / p``.
    """
    X = as_real_matrix(design, "design")
    y = np.asarray(target, dtype=np.float64)
    n, p = X.shape
    if n < 1 or p < 1:
        raise ValueError("design must have at least one row and one column")
    if n < p:
        raise ValueError(f"underdetermined system: n={n} < p={p}")
    if y.ndim not in (1, 2) or y.shape[0] != n:
        raise ValueError(f"target shape {y.shape} does not match design rows {n}")
    check_finite(y, "target")

    gram = X.T @ X
    rhs = X.T @ y
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        lam = RIDGE_SCALE * np.trace(gram) / p
        if lam == 0.0:
            lam = RIDGE_SCALE
        return np.linalg.solve(gram + lam * np.eye(p), rhs)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef

