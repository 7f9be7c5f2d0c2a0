"""Episodic MDP for sequential sensing-slot insertion.

One episode covers one processing window. The agent adds one sensing slot per
step until the window holds ``M`` samples; after every step the window is
reconstructed with IHT and the reward is the normalized drop in MSE against
the true Doppler channel.
"""
from dataclasses import dataclass, replace

import numpy as np

from .signal_core import as_complex_vector, fourier_matrix, mse
from .sparse_recovery import iht_reconstruct

TEXT_CONSISTENT = "text-consistent"
AS_PRINTED = "as-printed"


class DegenerateWindowError(ValueError):
    """The true Doppler channel is all zero, so the reward is undefined."""


class IllegalActionError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeState:
    prev_spectrum: np.ndarray
    occupied: np.ndarray
    step: int
    K: int
    recon: np.ndarray  # IHT estimate from the currently occupied slots
    cir: np.ndarray  # complete CIR window the observations are read from
    truth: np.ndarray = None

    @property
    def done(self):
        return self.step >= self.K

    @property
    def indices(self):
        return np.flatnonzero(self.occupied)


@dataclass(frozen=True)
class StepOutcome:
    next_state: EpisodeState
    reward: float  # None when no truth is available
    done: bool


class SamplingEnv:
    """Environment parameters shared by all episodes of one configuration."""

    def __init__(self, W, M, omega, tol=1e-6, max_iter=200, reward_sign=TEXT_CONSISTENT,
                 step="normalized"):
        if reward_sign not in (TEXT_CONSISTENT, AS_PRINTED):
            raise ValueError(f"unknown reward sign convention {reward_sign!r}")
        if not 0 < M <= W:
            raise ValueError(f"need 0 < M <= W, got M={M}, W={W}")
        self.W, self.M, self.omega = W, M, omega
        self.tol, self.max_iter, self.iht_step = tol, max_iter, step
        self.reward_sign = reward_sign
        self.F = fourier_matrix(W)

    def reconstruct(self, cir, occupied):
        idx = np.flatnonzero(occupied)
        if idx.size == 0:
            return np.zeros(self.W, dtype=np.complex128)
        return iht_reconstruct(cir[idx], self.F[idx], self.omega, self.tol, self.max_iter,
                               step=self.iht_step)

    def reset(self, comm, prev_spectrum, cir, truth=None):
        prev = as_complex_vector(prev_spectrum, self.W, name="previous spectrum")
        cir = as_complex_vector(cir, self.W, name="CIR window")
        if truth is not None:
            truth = as_complex_vector(truth, self.W, name="true spectrum")
            if not np.any(truth):
                raise DegenerateWindowError("all-zero true spectrum; reward undefined")
        occupied = np.zeros(self.W, dtype=bool)
        occupied[list(comm)] = True
        K = max(0, self.M - int(occupied.sum()))
        return EpisodeState(prev, occupied, 0, K, self.reconstruct(cir, occupied), cir, truth)

    def legal_actions(self, state):
        if state.done:
            raise IllegalActionError("episode is finished; no legal actions")
        return np.flatnonzero(~state.occupied)

    def reward(self, before, after, truth):
        energy = float(np.vdot(truth, truth).real)
        gain = mse(before, truth) - mse(after, truth)
        sign = 1.0 if self.reward_sign == TEXT_CONSISTENT else -1.0
        return sign * gain / energy

    def step(self, state, action, truth=None):
        if state.done:
            raise IllegalActionError("step() called on a finished episode")
        action = int(action)
        if not 0 <= action < self.W or state.occupied[action]:
            raise IllegalActionError(f"slot {action} is not an idle slot")
        truth = state.truth if truth is None else as_complex_vector(truth, self.W, "true spectrum")
        occupied = state.occupied.copy()
        occupied[action] = True
        recon = self.reconstruct(state.cir, occupied)
        r = None if truth is None else self.reward(state.recon, recon, truth)
        nxt = replace(state, occupied=occupied, step=state.step + 1, recon=recon, truth=truth)
        return StepOutcome(nxt, r, nxt.done)


def encode(state):
    """Real ``3 x W`` network input: scaled Re/Im of the previous spectrum and the occupancy mask."""
    return encode_arrays(state.prev_spectrum, state.occupied)


def encode_arrays(prev_spectrum, occupied):
    prev = np.asarray(prev_spectrum)
    s = max(float(np.max(np.abs(prev))) if prev.size else 0.0, 1e-9)
    return np.stack([prev.real / s, prev.imag / s, np.asarray(occupied, dtype=float)])
