"""Non-learning sensing-slot selectors: random, MC-SFS and RMC-RS.

All three start from the fixed communication slots and only add sensing slots.
When the communication slots already fill the budget the sensing set is empty.
"""
from dataclasses import dataclass

import numpy as np

from .signal_core import fourier_matrix
from .sparse_recovery import (
    SamplingPattern,
    mutual_coherence,
    restricted_mutual_coherence,
    spectrum_support,
)


@dataclass(frozen=True)
class SelectorBudget:
    M: int
    W: int

    def __post_init__(self):
        if not 0 < self.M <= self.W:
            raise ValueError(f"budget needs 0 < M <= W, got M={self.M}, W={self.W}")

    def remaining(self, comm):
        return max(0, min(self.M - len(comm), self.W - len(comm)))


def idle_slots(comm, W):
    taken = np.zeros(W, dtype=bool)
    taken[list(comm)] = True
    return np.flatnonzero(~taken)


def random_select(comm, budget, rng):
    """Uniform draw without replacement of the missing sensing slots."""
    k = budget.remaining(comm)
    if k == 0:
        return SamplingPattern(comm, (), budget.W)
    chosen = rng.choice(idle_slots(comm, budget.W), size=k, replace=False)
    return SamplingPattern(comm, tuple(chosen), budget.W)


def mcsfs_select(comm, budget, F=None):
    """Greedy forward selection: add the idle slot giving the lowest coherence."""
    F = fourier_matrix(budget.W) if F is None else F
    rows = sorted(comm)
    sensing = []
    for _ in range(budget.remaining(comm)):
        best, best_mc = None, np.inf
        for c in idle_slots(rows, budget.W):
            mc = mutual_coherence(F[rows + [c]])
            if mc < best_mc:
                best, best_mc = int(c), mc
        rows = sorted(rows + [best])
        sensing.append(best)
    return SamplingPattern(comm, tuple(sensing), budget.W)


def rmcrs_select(comm, budget, prev_spectrum, num_candidates=100, rng=None, F=None,
                 return_scores=False):
    """Random search scored by coherence restricted to the previous spectrum's support.

    Candidates are drawn with ``random_select``; the first minimizer wins. With
    fewer than two support bins the full coherence is used instead.
    """
    if num_candidates < 1:
        raise ValueError("num_candidates must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    F = fourier_matrix(budget.W) if F is None else F
    support = spectrum_support(prev_spectrum)
    restricted = len(support) >= 2
    cols = F[:, support] if restricted else F

    best, best_score, scores = None, np.inf, []
    for _ in range(num_candidates):
        cand = random_select(comm, budget, rng)
        sub = cols[list(cand.indices)]
        score = restricted_mutual_coherence(sub, range(len(support))) if restricted \
            else mutual_coherence(sub)
        scores.append(score)
        if score < best_score:
            best, best_score = cand, score
    if return_scores:
        return best, scores
    return best
