"""Test-time evaluation of all selectors and per-sample timing."""
from dataclasses import dataclass
import logging
import time

import numpy as np

from ..baselines import SelectorBudget, mcsfs_select, random_select, rmcrs_select
from ..neural.network import policy_forward
from ..rl_env import encode_arrays
from ..signal_core import fourier_matrix, normalized_mse
from ..sparse_recovery import SamplingPattern, iht_reconstruct, mutual_coherence
from ..traffic import sample_comm_masks
from .config import METHODS
from .data import METHOD, TEST_TRAFFIC, stream_seed, test_sequence

log = logging.getLogger(__name__)

# Reference medians (ms per selected sample) for (M, b, d) = (8, 4, 1).
REFERENCE_MS = {"ppo": 1.94, "rmcrs": 46.34, "mcsfs": 10.27, "random": 0.03}


@dataclass(frozen=True)
class ResultRecord:
    method: str
    M: int
    b: float
    d: float
    seq: int
    window: int
    mse: float
    mc: float
    time_ms: float
    seed: int


class CheckpointMismatchError(ValueError):
    pass


def ppo_select(policy, comm, budget, prev_spectrum, greedy=True, rng=None):
    """Insert sensing slots one at a time with the policy network."""
    occupied = np.zeros(budget.W, dtype=bool)
    occupied[list(comm)] = True
    sensing = []
    for _ in range(budget.remaining(comm)):
        obs = encode_arrays(prev_spectrum, occupied)
        legal = ~occupied
        out = policy_forward(policy, obs, legal)
        if greedy:
            a = int(np.argmax(np.where(legal, out.logits, -np.inf)))
        else:
            a = int(rng.choice(budget.W, p=out.probs / out.probs.sum()))
        occupied[a] = True
        sensing.append(a)
    return SamplingPattern(comm, tuple(sensing), budget.W)


class Selector:
    """Dispatches one method with its own rng; holds no per-sequence state."""

    def __init__(self, method, cfg, policy=None, rng=None):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        if method == "ppo":
            if policy is None:
                raise ValueError("the ppo method needs a trained policy network")
            if policy.W != cfg.W or policy.kind != "policy":
                raise CheckpointMismatchError(
                    f"checkpoint is a {policy.kind} net for W={policy.W}, config has W={cfg.W}"
                )
        self.method, self.cfg, self.policy = method, cfg, policy
        self.rng = rng if rng is not None else np.random.default_rng()
        self.budget = SelectorBudget(cfg.M, cfg.W)
        self.F = fourier_matrix(cfg.W)

    def __call__(self, comm, prev_spectrum):
        m, b = self.method, self.budget
        if m == "random":
            return random_select(comm, b, self.rng)
        if m == "mcsfs":
            return mcsfs_select(comm, b, self.F)
        if m == "rmcrs":
            return rmcrs_select(comm, b, prev_spectrum, self.cfg.rmcrs_candidates, self.rng, self.F)
        return ppo_select(self.policy, comm, b, prev_spectrum, self.cfg.greedy_eval, self.rng)


def comm_patterns(cfg, s):
    rng = np.random.default_rng(stream_seed(cfg, TEST_TRAFFIC, s))
    masks = sample_comm_masks(cfg.traffic_model(), rng, cfg.test_windows)
    return [tuple(int(i) for i in np.flatnonzero(m)) for m in masks]


def run_evaluation(cfg, policy=None, methods=None, sequences=None, initial_prev=None):
    """Yield one ``ResultRecord`` per window per method.

    Every method carries its own previous reconstruction forward through each
    sequence, starting from an all-zero spectrum unless ``initial_prev`` maps the
    method to another starting spectrum. All methods see the same CIR windows
    and communication slots.
    """
    initial_prev = initial_prev or {}
    methods = tuple(methods or cfg.methods)
    if "ppo" in methods and policy is None:
        raise ValueError("ppo evaluation requires a policy network")
    F = fourier_matrix(cfg.W)
    seqs = range(cfg.test_sequences) if sequences is None else sequences
    for s in seqs:
        windows, truths = test_sequence(cfg, s)
        comms = comm_patterns(cfg, s)
        for method in methods:
            sel = Selector(method, cfg, policy,
                           np.random.default_rng(stream_seed(cfg, METHOD, s, METHODS.index(method))))
            prev = np.array(initial_prev.get(method, np.zeros(cfg.W)), dtype=np.complex128)
            for w, (g, H, comm) in enumerate(zip(windows, truths, comms)):
                t0 = time.perf_counter()
                pattern = sel(comm, prev)
                elapsed = time.perf_counter() - t0
                idx = list(pattern.indices)
                recon = iht_reconstruct(g[idx], F[idx], cfg.omega, cfg.iht_tol,
                                        cfg.iht_max_iter, step=cfg.iht_step)
                if not np.any(H):
                    log.warning("sequence %d window %d: all-zero truth, skipped", s, w)
                    prev = recon
                    continue
                n_added = max(len(pattern.sensing), 1)
                yield ResultRecord(
                    method=method, M=cfg.M, b=cfg.b, d=cfg.d, seq=s, window=w,
                    mse=normalized_mse(recon, H),
                    mc=mutual_coherence(F[idx]) if len(idx) else float("nan"),
                    time_ms=max(elapsed * 1e3 / n_added, 1e-9), seed=cfg.seed,
                )
                prev = recon


def run_timing_bench(cfg, policy=None, methods=None, calls=1000, warmup=10):
    """Median wall-clock milliseconds per selected sample for each method.

    Windows are processed as in evaluation, each method carrying its own previous
    reconstruction; windows whose communication slots fill the budget are not timed.
    """
    methods = tuple(methods or cfg.methods)
    F = fourier_matrix(cfg.W)
    results = {}
    for method in methods:
        sel = Selector(method, cfg, policy, np.random.default_rng(stream_seed(cfg, METHOD, 999, 0)))
        per_sample = []
        s = 0
        while len(per_sample) < calls + warmup:
            windows, _ = test_sequence(cfg, s)
            prev = np.zeros(cfg.W, dtype=np.complex128)
            for g, comm in zip(windows, comm_patterns(cfg, s)):
                k = sel.budget.remaining(comm)
                t0 = time.perf_counter()
                pattern = sel(comm, prev)
                elapsed = time.perf_counter() - t0
                if k > 0:
                    per_sample.append(elapsed * 1e3 / k)
                idx = list(pattern.indices)
                prev = iht_reconstruct(g[idx], F[idx], cfg.omega, cfg.iht_tol,
                                       cfg.iht_max_iter, step=cfg.iht_step)
                if len(per_sample) >= calls + warmup:
                    break
            s += 1
        results[method] = float(np.median(per_sample[warmup:]))
    return results
