"""Synthetic single-path CIR sequences with slowly evolving Doppler content.

Each window holds ``W`` CIR samples ``sum_q a_q exp(2j*pi*f_q*w*T_c)`` plus complex
Gaussian noise. Between windows the scatterer frequencies take a bounded random
walk and the amplitudes a bounded multiplicative jitter, so consecutive Doppler
spectra are correlated.
"""
from dataclasses import dataclass, field
from pathlib import Path
import re

import numpy as np

from .signal_core import as_complex_vector

DEFAULT_W = 64
DEFAULT_TC = 0.27e-3


class SparsityError(ValueError):
    pass


class TraceFormatError(ValueError):
    pass


@dataclass
class Scatterer:
    amplitude: complex
    doppler_freq: float  # Hz
    drift_rate: float  # Hz per window


@dataclass
class NoiseSpec:
    snr_db: float = float("inf")

    @property
    def variance(self):
        """Per-sample complex noise power relative to unit signal power."""
        if np.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        return float(10.0 ** (-self.snr_db / 10.0))


@dataclass
class CirSequence:
    windows: list
    T_c: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.T_c <= 0:
            raise ValueError(f"T_c must be positive, got {self.T_c}")
        self.windows = [np.asarray(w, dtype=np.complex128) for w in self.windows]
        if self.windows:
            W = self.windows[0].shape[0]
            for i, w in enumerate(self.windows):
                as_complex_vector(w, W, name=f"window {i}")

    @property
    def W(self):
        return self.windows[0].shape[0] if self.windows else 0

    def __len__(self):
        return len(self.windows)

    def __eq__(self, other):
        if not isinstance(other, CirSequence):
            return NotImplemented
        return (
            self.T_c == other.T_c
            and len(self.windows) == len(other.windows)
            and all(np.array_equal(a, b) for a, b in zip(self.windows, other.windows))
        )


@dataclass
class GeneratorParams:
    """Calibration knobs of the synthetic generator."""

    on_grid: bool = False
    drift_rate: float = 2.0  # Hz per window
    amp_jitter: float = 0.05  # relative magnitude jitter per window
    phase_jitter: float = 0.1  # radians per window
    freq_span: float = 1.0  # fraction of the unambiguous Doppler range used for initial draws
    freqs_bins: tuple = None  # optional fixed initial frequencies, in DFT bins


def _wrap_bins(nu, W):
    return (nu + W / 2) % W - W / 2


def generate_sequence(num_windows, W=DEFAULT_W, Q=3, T_c=DEFAULT_TC, noise=None, seed=0,
                      params=None):
    """Generate a seeded ``CirSequence`` of ``num_windows`` windows.

    Frequencies are tracked in DFT-bin units
    ``nu = f * W * T_c``; with ``params.on_grid`` they stay integer and drift by
    whole bins.
    """
    if num_windows < 1 or W < 2:
        raise ValueError("num_windows must be >= 1 and W >= 2")
    if T_c <= 0:
        raise ValueError(f"T_c must be positive, got {T_c}")
    if not 1 <= Q < W / 4:
        raise SparsityError(f"Q={Q} violates Doppler sparsity (need 1 <= Q < W/4 = {W / 4})")
    params = params or GeneratorParams()
    noise = noise or NoiseSpec()

    ss = np.random.SeedSequence(seed)
    scene_seed, noise_seed = ss.spawn(2)
    rng = np.random.default_rng(scene_seed)
    noise_rng = np.random.default_rng(noise_seed)

    half = W / 2
    if params.freqs_bins is not None:
        nu = np.asarray(params.freqs_bins, dtype=float)[:Q].copy()
        if nu.shape[0] != Q:
            raise ValueError("freqs_bins must provide Q frequencies")
    elif params.on_grid:
        span = max(1, int(np.floor(half * params.freq_span)))
        nu = rng.choice(np.arange(-span, span), size=Q, replace=False).astype(float)
    else:
        nu = rng.uniform(-half, half, size=Q) * params.freq_span
    mag = rng.rayleigh(1.0, size=Q) + 0.2
    phase = rng.uniform(0, 2 * np.pi, size=Q)
    amp = mag * np.exp(1j * phase)
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2))

    initial = scatterers_from_bins(nu, amp, W, T_c, params.drift_rate)
    drift_bins = params.drift_rate * W * T_c
    sigma = np.sqrt(noise.variance / 2)
    w = np.arange(W)
    windows = []
    for _ in range(num_windows):
        tones = np.exp(2j * np.pi * np.outer(w, nu) / W)
        g = tones @ amp
        if sigma > 0:
            g = g + sigma * (noise_rng.standard_normal(W) + 1j * noise_rng.standard_normal(W))
        windows.append(g)

        step = rng.uniform(-drift_bins, drift_bins, size=Q)
        if params.on_grid:
            step = np.round(step)
        nu = _wrap_bins(nu + step, W)
        scale = 1 + rng.uniform(-params.amp_jitter, params.amp_jitter, size=Q)
        rot = np.exp(1j * rng.uniform(-params.phase_jitter, params.phase_jitter, size=Q))
        amp = amp * scale * rot

    meta = {"seed": seed, "Q": Q, "scatterers": initial}
    return CirSequence(windows=windows, T_c=T_c, meta=meta)


def scatterers_from_bins(nu, amp, W, T_c, drift_rate=0.0):
    return [Scatterer(complex(a), float(n) / (W * T_c), drift_rate) for n, a in zip(nu, amp)]


_HEADER_RE = re.compile(
    r"^#\s*cir-trace\s+v1\s+W=(?P<W>\d+)\s+T_c=(?P<Tc>\S+)\s+windows=(?P<n>\d+)\s*$"
)


def save_trace(seq, path):
    """Write ``seq`` as a ``cir-trace v1`` CSV file (round-trip exact)."""
    path = Path(path)
    lines = [f"# cir-trace v1 W={seq.W} T_c={float(seq.T_c)!r} windows={len(seq)}"]
    for g in seq.windows:
        lines.extend(f"{float(v.real)!r},{float(v.imag)!r}" for v in g)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trace(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not text.strip():
        raise TraceFormatError(f"{path}: empty trace file")
    m = _HEADER_RE.match(lines[0].strip())
    if m is None:
        raise TraceFormatError(f"{path}:1: malformed header {lines[0]!r}")
    W, n = int(m["W"]), int(m["n"])
    try:
        T_c = float(m["Tc"])
    except ValueError:
        raise TraceFormatError(f"{path}:1: bad T_c value {m['Tc']!r}") from None
    if W < 1:
        raise TraceFormatError(f"{path}:1: W must be positive")

    body = lines[1:]
    start = 2
    if body and body[0].strip().replace(" ", "") == "re,im":
        body = body[1:]
        start = 3
    values = []
    for lineno, line in enumerate(body, start=start):
        if not line.strip():
            continue
        cols = line.split(",")
        if len(cols) != 2:
            raise TraceFormatError(f"{path}:{lineno}: expected 2 columns (re,im), got {len(cols)}")
        try:
            values.append(complex(float(cols[0]), float(cols[1])))
        except ValueError:
            raise TraceFormatError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
    if len(values) != W * n:
        raise TraceFormatError(
            f"{path}: header declares {n} windows of W={W} ({W * n} rows), found {len(values)} rows"
        )
    if n == 0:
        raise TraceFormatError(f"{path}: empty trace (0 windows)")
    data = np.array(values, dtype=np.complex128).reshape(n, W)
    return CirSequence(windows=list(data), T_c=T_c, meta={"source": str(path)})
