"""Seeded window streams shared by training, evaluation and benchmarking."""
import numpy as np

from ..signal_core import ground_truth_spectrum
from ..synth_channel import generate_sequence

TRAIN, TEST, TRAIN_TRAFFIC, TEST_TRAFFIC, ACTIONS, UPDATES, METHOD, HELDOUT = range(8)


def stream_seed(cfg, purpose, *extra):
    """Independent integer seed per (config seed, purpose, extra keys)."""
    ss = np.random.SeedSequence([cfg.seed, purpose, *extra])
    return int(ss.generate_state(1)[0])


def make_sequence(cfg, purpose, index, num_windows):
    return generate_sequence(
        num_windows, W=cfg.W, Q=cfg.Q, T_c=cfg.T_c, noise=cfg.noise(),
        seed=stream_seed(cfg, purpose, index), params=cfg.generator_params(),
    )


def training_windows(cfg, purpose=TRAIN):
    """Endless ``(cir, truth, prev_truth)`` triples; the previous window's truth feeds the state."""
    index = 0
    while True:
        seq = make_sequence(cfg, purpose, index, cfg.train_sequence_length + 1)
        prev = ground_truth_spectrum(seq.windows[0])
        for g in seq.windows[1:]:
            H = ground_truth_spectrum(g)
            yield g, H, prev
            prev = H
        index += 1


def test_sequence(cfg, s):
    """CIR windows and true spectra of test sequence ``s``."""
    seq = make_sequence(cfg, TEST, s, cfg.test_windows)
    return seq.windows, [ground_truth_spectrum(g) for g in seq.windows]
