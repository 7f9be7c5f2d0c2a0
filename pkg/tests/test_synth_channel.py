import numpy as np
import pytest

from mdsampling.signal_core import fourier_matrix, ground_truth_spectrum, mse
from mdsampling.synth_channel import (
    CirSequence,
    GeneratorParams,
    NoiseSpec,
    SparsityError,
    TraceFormatError,
    generate_sequence,
    load_trace,
    save_trace,
)

W, TC = 64, 0.27e-3
STILL = dict(drift_rate=0.0, amp_jitter=0.0, phase_jitter=0.0)


def brute_dft(g):
    n = np.arange(len(g))
    return np.array([np.sum(g * np.exp(-2j * np.pi * k * n / len(g))) for k in n]) / np.sqrt(len(g))


def test_single_on_grid_tone():
    params = GeneratorParams(on_grid=True, freqs_bins=(3,), **STILL)
    seq = generate_sequence(5, W=W, Q=1, T_c=TC, seed=1, params=params)
    for g in seq.windows:
        H = ground_truth_spectrum(g)
        assert list(np.flatnonzero(np.abs(H) > 1e-9)) == [3]


def test_two_on_grid_tones_brute_force():
    params = GeneratorParams(on_grid=True, freqs_bins=(-5, 11), **STILL)
    seq = generate_sequence(3, W=W, Q=2, T_c=TC, seed=4, params=params)
    for g in seq.windows:
        H = brute_dft(g)
        assert sorted(np.flatnonzero(np.abs(H) > 1e-9)) == [11, W - 5]


@pytest.mark.parametrize("seed", range(5))
def test_on_grid_sparsity_with_drift(seed):
    Q = 3
    params = GeneratorParams(on_grid=True, drift_rate=200.0)
    seq = generate_sequence(20, W=W, Q=Q, T_c=TC, seed=seed, params=params)
    for g in seq.windows:
        P = np.abs(ground_truth_spectrum(g)) ** 2
        assert np.count_nonzero(P > 1e-9 * P.max()) <= Q
    # bins only merge when two walks collide; the first window is always distinct
    P0 = np.abs(ground_truth_spectrum(seq.windows[0])) ** 2
    assert np.count_nonzero(P0 > 1e-9 * P0.max()) == Q


def test_determinism():
    a = generate_sequence(4, W=16, Q=2, T_c=TC, noise=NoiseSpec(10), seed=7)
    b = generate_sequence(4, W=16, Q=2, T_c=TC, noise=NoiseSpec(10), seed=7)
    c = generate_sequence(4, W=16, Q=2, T_c=TC, noise=NoiseSpec(10), seed=8)
    assert a == b
    assert all(np.array_equal(x, y) for x, y in zip(a.windows, b.windows))
    assert a != c


def test_sparsity_precondition():
    with pytest.raises(SparsityError):
        generate_sequence(1, W=16, Q=4)
    with pytest.raises(ValueError):
        generate_sequence(1, W=16, Q=1, T_c=0.0)


def test_zero_drift_windows_identical():
    seq = generate_sequence(10, W=W, Q=3, T_c=TC, seed=3, params=GeneratorParams(**STILL))
    H0 = ground_truth_spectrum(seq.windows[0])
    for g in seq.windows[1:]:
        assert np.max(np.abs(ground_truth_spectrum(g) - H0)) < 1e-9


def test_drift_increases_spectral_change():
    # average consecutive-window MSE over 100 seeds grows with the drift rate
    def mean_change(drift):
        vals = []
        for seed in range(100):
            p = GeneratorParams(drift_rate=drift, amp_jitter=0.0, phase_jitter=0.0)
            seq = generate_sequence(2, W=W, Q=3, T_c=TC, seed=seed, params=p)
            H = [ground_truth_spectrum(g) for g in seq.windows]
            vals.append(mse(H[0], H[1]))
        return np.mean(vals)

    changes = [mean_change(d) for d in (0.0, 5.0, 20.0, 80.0)]
    assert changes[0] < 1e-20
    assert all(a <= b for a, b in zip(changes, changes[1:]))


def test_noise_calibration():
    snr = 7.0
    noisy = generate_sequence(200, W=W, Q=2, T_c=TC, noise=NoiseSpec(snr), seed=11)
    clean = generate_sequence(200, W=W, Q=2, T_c=TC, noise=NoiseSpec(), seed=11)
    noise = np.concatenate([a - b for a, b in zip(noisy.windows, clean.windows)])
    assert noise.size >= 10_000
    measured_db = 10 * np.log10(np.mean(np.abs(noise) ** 2))
    assert abs(measured_db + snr) < 0.5


def test_initial_signal_power_is_unit():
    seq = generate_sequence(1, W=W, Q=3, T_c=TC, seed=2)
    amps = np.array([s.amplitude for s in seq.meta["scatterers"]])
    assert np.sum(np.abs(amps) ** 2) == pytest.approx(1.0)
    assert all(abs(s.doppler_freq) <= 1 / (2 * TC) for s in seq.meta["scatterers"])


def test_trace_round_trip(tmp_path):
    seq = generate_sequence(3, W=8, Q=1, T_c=TC, noise=NoiseSpec(5), seed=0)
    path = tmp_path / "t.csv"
    save_trace(seq, path)
    assert path.read_text().splitlines()[0] == f"# cir-trace v1 W=8 T_c={TC!r} windows=3"
    back = load_trace(path)
    assert back == seq
    assert back.T_c == seq.T_c and back.W == 8


def test_trace_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# cir-trace v1 W=2 T_c=0.00027 windows=1\n1.0,2.0\n3.0\n")
    with pytest.raises(TraceFormatError, match=":3:"):
        load_trace(path)


def test_trace_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(TraceFormatError, match="empty"):
        load_trace(path)


@pytest.mark.parametrize("text, match", [
    ("# cir-trace v2 W=2 T_c=1 windows=1\n1,2\n3,4\n", "header"),
    ("# cir-trace v1 W=2 T_c=1 windows=2\n1,2\n3,4\n", "windows"),
    ("# cir-trace v1 W=2 T_c=1 windows=1\n1,x\n3,4\n", "non-numeric"),
])
def test_trace_format_errors(tmp_path, text, match):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(TraceFormatError, match=match):
        load_trace(path)


def test_sequence_validation():
    with pytest.raises(ValueError):
        CirSequence(windows=[np.zeros(4)], T_c=-1.0)
    with pytest.raises(ValueError):
        CirSequence(windows=[np.zeros(4), np.zeros(5)], T_c=1.0)
