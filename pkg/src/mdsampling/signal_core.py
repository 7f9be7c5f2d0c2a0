"""Fourier primitives, Doppler spectra and error metrics.

All transforms use the symmetric convention ``F[n, w] = exp(2j*pi*n*w/W) / sqrt(W)``,
so ``F`` is unitary and the Doppler-domain channel is ``H = F^H g``.
"""
from functools import lru_cache

import numpy as np


class DimensionError(ValueError):
    """Raised when a vector or matrix does not have the expected size."""


def as_complex_vector(values, W=None, name="vector"):
    """Validate and return ``values`` as a finite 1-D complex array."""
    x = np.asarray(values, dtype=np.complex128)
    if x.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {x.shape}")
    if W is not None and x.shape[0] != W:
        raise DimensionError(f"{name} has length {x.shape[0]}, expected {W}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


@lru_cache(maxsize=16)
def _fourier_matrix(W):
    n = np.arange(W)
    F = np.exp(2j * np.pi * np.outer(n, n) / W) / np.sqrt(W)
    F.setflags(write=False)
    return F


def fourier_matrix(W):
    """Return the W x W unitary inverse-DFT matrix (read-only, cached)."""
    if int(W) != W or W < 2:
        raise DimensionError(f"Fourier matrix needs an integer W >= 2, got {W}")
    return _fourier_matrix(int(W))


def ground_truth_spectrum(g, W=None):
    """Doppler-domain channel ``H = F^{-1} g`` of a complete CIR window."""
    g = as_complex_vector(g, W, name="CIR window")
    F = fourier_matrix(g.shape[0])
    return F.conj().T @ g


def md_spectrum(H):
    """Micro-Doppler power spectrum ``|H|^2``."""
    H = np.asarray(H, dtype=np.complex128)
    return H.real ** 2 + H.imag ** 2


def mse(x, y):
    """Mean squared modulus of the difference between two vectors."""
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise DimensionError("mse of empty vectors is undefined")
    d = x - y
    return float(np.mean(d.real ** 2 + d.imag ** 2))


def normalized_mse(estimate, truth):
    """``||estimate - truth||^2 / ||truth||^2``; the reported reconstruction error."""
    truth = np.asarray(truth, dtype=np.complex128)
    energy = float(np.vdot(truth, truth).real)
    if energy == 0.0:
        raise ValueError("normalized MSE is undefined for an all-zero truth")
    return mse(estimate, truth) * truth.size / energy
