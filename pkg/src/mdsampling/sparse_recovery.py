"""Partial-Fourier sensing matrices, IHT recovery and mutual coherence."""
from dataclasses import dataclass

import numpy as np

from .signal_core import DimensionError, fourier_matrix


@dataclass(frozen=True)
class SamplingPattern:
    """Disjoint communication (fixed) and sensing (chosen) slot sets of one window."""

    comm: tuple
    sensing: tuple
    W: int

    def __post_init__(self):
        comm = tuple(sorted(int(i) for i in self.comm))
        sensing = tuple(sorted(int(i) for i in self.sensing))
        object.__setattr__(self, "comm", comm)
        object.__setattr__(self, "sensing", sensing)
        if len(set(comm)) != len(comm) or len(set(sensing)) != len(sensing):
            raise ValueError("duplicate slot indices in sampling pattern")
        if set(comm) & set(sensing):
            raise ValueError(f"communication and sensing slots overlap: {set(comm) & set(sensing)}")
        for i in comm + sensing:
            if not 0 <= i < self.W:
                raise IndexError(f"slot index {i} outside window of length {self.W}")

    @property
    def indices(self):
        return tuple(sorted(self.comm + self.sensing))

    def __len__(self):
        return len(self.comm) + len(self.sensing)

    def mask(self):
        m = np.zeros(self.W, dtype=bool)
        m[list(self.indices)] = True
        return m


@dataclass(frozen=True)
class SensingMatrix:
    entries: np.ndarray
    pattern: SamplingPattern

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def shape(self):
        return self.entries.shape


def _entries(Psi):
    return Psi.entries if isinstance(Psi, SensingMatrix) else np.asarray(Psi)


def build_sensing_matrix(pattern, F=None):
    """Rows of ``F`` at the sampled slots, in ascending slot order."""
    idx = pattern.indices
    if not idx:
        raise ValueError("cannot build a sensing matrix from an empty pattern")
    if F is None:
        F = fourier_matrix(pattern.W)
    if F.shape != (pattern.W, pattern.W):
        raise DimensionError(f"Fourier matrix shape {F.shape} does not match W={pattern.W}")
    return SensingMatrix(entries=F[list(idx)], pattern=pattern)


def hard_threshold(x, omega):
    """Keep the ``omega`` largest-magnitude entries; ties go to the lower index."""
    out = np.zeros_like(x)
    if omega >= x.shape[0]:
        out[:] = x
        return out
    keep = np.argsort(-np.abs(x), kind="stable")[:omega]
    out[keep] = x[keep]
    return out


def _support(x):
    return frozenset(np.flatnonzero(x).tolist())


def iht_reconstruct(h, Psi, omega, tol=1e-6, max_iter=200, step="normalized", return_info=False):
    """Sparse Doppler-channel estimate from the sampled CIR values ``h``.

    Iterates ``x <- HT_omega(x + mu * Psi^H (h - Psi x))`` from ``x = 0``. With
    ``step="normalized"`` the step is ``||g_S||^2 / ||Psi g_S||^2`` on the current
    support ``S``, shrunk until the residual is guaranteed to drop whenever the
    support changes; ``step="unit"`` uses ``mu = 1`` (``Psi`` has orthonormal rows).
    Stops once the relative drop of the residual norm falls below ``tol``; an
    iterate that would raise the residual is rejected.
    """
    A = _entries(Psi)
    h = np.asarray(h, dtype=np.complex128)
    if A.ndim != 2 or h.ndim != 1 or h.shape[0] != A.shape[0]:
        raise DimensionError(f"observation length {h.shape} does not match sensing matrix {A.shape}")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol and max_iter must be positive")
    if step not in ("normalized", "unit"):
        raise ValueError(f"unknown step rule {step!r}")
    W = A.shape[1]
    if not 1 <= omega <= W:
        raise ValueError(f"sparsity level must be in [1, {W}], got {omega}")

    AH = A.conj().T
    x = np.zeros(W, dtype=np.complex128)
    r = h.copy()
    res = float(np.linalg.norm(r))
    history = [res]
    support = _support(hard_threshold(AH @ h, omega))
    it = 0
    while it < max_iter and res > 0.0:
        it += 1
        g = AH @ r
        if step == "unit":
            x_new = hard_threshold(x + g, omega)
        else:
            x_new = _normalized_step(A, x, g, support, omega)
        r_new = h - A @ x_new
        res_new = float(np.linalg.norm(r_new))
        if res_new > res:
            break
        change = (res - res_new) / res
        x, r, res = x_new, r_new, res_new
        support = _support(x)
        history.append(res)
        if change < tol:
            break
    if return_info:
        return x, {"iterations": it, "residuals": history}
    return x


_SHRINK = 0.01  # backtracking margin
_KAPPA = 2.0


def _normalized_step(A, x, g, support, omega):
    idx = sorted(support)
    g_s = g[idx]
    num = float(np.vdot(g_s, g_s).real)
    den = float(np.linalg.norm(A[:, idx] @ g_s) ** 2)
    mu = num / den if den > 0 and num > 0 else 1.0
    while True:
        x_new = hard_threshold(x + mu * g, omega)
        if _support(x_new) == support:
            return x_new
        d = x_new - x
        Ad = float(np.linalg.norm(A @ d) ** 2)
        bound = (1 - _SHRINK) * float(np.vdot(d, d).real) / Ad if Ad > 0 else np.inf
        if mu <= bound:
            return x_new
        mu /= _KAPPA * (1 - _SHRINK)


def _gram_abs(A):
    G = np.abs(A.conj().T @ A)
    np.fill_diagonal(G, 0.0)
    return G


def mutual_coherence(Psi):
    """Largest ``|Psi_i^H Psi_l|`` over distinct columns, on raw (unnormalized) columns."""
    A = _entries(Psi)
    if A.shape[1] < 2:
        raise DimensionError("mutual coherence needs at least two columns")
    return float(_gram_abs(A).max())


def normalized_coherence(Psi):
    """Coherence after scaling every column to unit norm (diagnostic only)."""
    A = _entries(Psi)
    norms = np.linalg.norm(A, axis=0)
    return float(_gram_abs(A / norms).max())


def restricted_mutual_coherence(Psi, support):
    """Mutual coherence restricted to column pairs inside ``support``."""
    support = sorted(set(int(i) for i in support))
    if len(support) < 2:
        raise ValueError("restricted coherence needs a support of at least two columns")
    A = _entries(Psi)
    return float(_gram_abs(A[:, support]).max())


def spectrum_support(spectrum, rel_threshold=1e-9):
    """Indices whose magnitude exceeds ``rel_threshold`` times the maximum magnitude."""
    mag = np.abs(np.asarray(spectrum))
    peak = mag.max() if mag.size else 0.0
    if peak == 0.0:
        return np.array([], dtype=int)
    return np.flatnonzero(mag > rel_threshold * peak)
