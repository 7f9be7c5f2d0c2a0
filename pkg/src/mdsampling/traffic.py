"""Two-state Markov chain generator for communication-packet slots.

State ``idle`` leaves to ``transmit`` with probability ``p_it`` and ``transmit``
returns to ``idle`` with probability ``p_ti``. Each window starts a fresh chain
whose first slot is drawn from the stationary distribution.
"""
from dataclasses import dataclass

import numpy as np

AS_PRINTED = "as-printed"
MEAN_LENGTH_B = "mean-length-b"


@dataclass(frozen=True)
class TrafficModel:
    W: int
    b: float
    d: float
    burst_convention: str = AS_PRINTED

    def __post_init__(self):
        if self.burst_convention not in (AS_PRINTED, MEAN_LENGTH_B):
            raise ValueError(f"unknown burst convention {self.burst_convention!r}")
        if not 0 < self.d < self.W:
            raise ValueError(f"density d must satisfy 0 < d < W, got d={self.d}, W={self.W}")
        if self.burst_convention == AS_PRINTED and not self.b > 1:
            # b == 1 gives p_ti == 0, an absorbing transmit state
            raise ValueError(f"burstiness b must be > 1, got {self.b}")
        if self.burst_convention == MEAN_LENGTH_B and not self.b >= 1:
            raise ValueError(f"burstiness b must be >= 1, got {self.b}")
        for name, p in self.transition_probs().items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"derived probability {name}={p:.4g} outside [0, 1]")

    @property
    def p_ti(self):
        if self.burst_convention == AS_PRINTED:
            return 1.0 - 1.0 / self.b
        return 1.0 / self.b

    @property
    def p_it(self):
        return self.d * self.p_ti / (self.W - self.d)

    def transition_probs(self):
        p_ti, p_it = self.p_ti, self.p_it
        return {"p_it": p_it, "p_ii": 1 - p_it, "p_ti": p_ti, "p_tt": 1 - p_ti}

    def transition_matrix(self):
        """Row-stochastic matrix over states (idle, transmit)."""
        p = self.transition_probs()
        return np.array([[p["p_ii"], p["p_it"]], [p["p_ti"], p["p_tt"]]])


def stationary_transmit_prob(model):
    """Steady-state probability of the transmit state; equals ``d / W``."""
    return model.p_it / (model.p_it + model.p_ti)


def sample_comm_masks(model, rng, n):
    """Draw ``n`` independent windows; returns a boolean ``(n, W)`` occupancy array."""
    pi_t = stationary_transmit_prob(model)
    p_it, p_tt = model.p_it, 1.0 - model.p_ti
    u = rng.random((n, model.W))
    out = np.empty((n, model.W), dtype=bool)
    out[:, 0] = u[:, 0] < pi_t
    for w in range(1, model.W):
        prev = out[:, w - 1]
        out[:, w] = np.where(prev, u[:, w] < p_tt, u[:, w] < p_it)
    return out


def sample_comm_pattern(model, rng):
    """Sorted slot indices of communication packets for one window (the set M_c)."""
    mask = sample_comm_masks(model, rng, 1)[0]
    return tuple(int(i) for i in np.flatnonzero(mask))


def burst_lengths(masks):
    """Lengths of all runs of consecutive transmit slots, window edges cutting runs."""
    masks = np.asarray(masks, dtype=bool)
    padded = np.zeros((masks.shape[0], masks.shape[1] + 2), dtype=np.int8)
    padded[:, 1:-1] = masks
    edges = np.diff(padded, axis=1)
    starts = np.nonzero(edges == 1)
    ends = np.nonzero(edges == -1)
    # nonzero scans row-major, so starts and ends pair up in order
    return ends[1] - starts[1]
