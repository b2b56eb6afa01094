import numpy as np
import pytest


def central_diff(f, x, eps=1e-6):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f(x)
        flat[i] = orig - eps
        down = f(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return g


def naive_dft(y):
    """Direct O(T^2) unitary DFT along axis 0."""
    y = np.asarray(y, dtype=np.complex128)
    t = y.shape[0]
    k = np.arange(t)
    mat = np.exp(-2j * np.pi * np.outer(k, k) / t) / np.sqrt(t)
    return np.tensordot(mat, y, axes=(1, 0))


def near_kink(yhat, y, cfg, margin=1e-4):
    """True if some bin sits within ``margin`` of a nondifferentiable point of
    the frequency loss, where a finite-difference step could cross it.

    Exact zeros are ignored: they are structural (for example the imaginary
    part of a real DC bin) and a perturbation cannot move them off zero.
    """
    from fredf.loss import LossVariant
    from fredf.transform import BasisKind, build_basis, dft_forward, projection_matrix

    if cfg.alpha == 0 or cfg.norm == "squared":
        return False
    if cfg.basis is BasisKind.FOURIER:
        fh, fl = dft_forward(yhat, cfg.axis), dft_forward(y, cfg.axis)
    else:
        proj = projection_matrix(build_basis(cfg.basis, y.shape[-2]))
        fh, fl = proj @ yhat + 0j, proj @ y + 0j
    if cfg.variant is LossVariant.FULL:
        r = fh - fl
        qs = [np.abs(r)] if cfg.norm == "modulus" else [np.abs(r.real), np.abs(r.imag)]
    elif cfg.variant is LossVariant.AMPLITUDE_ONLY:
        qs = [np.abs(np.abs(fh) - np.abs(fl)), np.abs(fh)]
    else:
        # real-valued bins (DC, Nyquist, polynomial coefficients) keep a fixed phase
        cplx = (np.abs(fh.imag) > 1e-10) | (np.abs(fl.imag) > 1e-10)
        dphi = (np.abs(np.angle(fh) - np.angle(fl)) % (2 * np.pi))[cplx]
        qs = [np.abs(fh), dphi, np.abs(dphi - np.pi), 2 * np.pi - dphi]
    return any(np.any((q > 0) & (q < margin)) for q in qs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
