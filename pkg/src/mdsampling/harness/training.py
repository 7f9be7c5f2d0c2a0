"""PPO training loop in the ideal environment (previous spectrum = previous truth)."""
import csv
import logging
from pathlib import Path

import numpy as np

from ..neural.adam import linear_decay
from ..neural.checkpoint import save_checkpoint
from ..neural.ppo import NonFiniteLossError, PPOAgent, RolloutBuffer, compute_returns_advantages, ppo_update
from ..rl_env import DegenerateWindowError, SamplingEnv, encode
from ..signal_core import normalized_mse
from ..traffic import sample_comm_pattern
from .data import ACTIONS, HELDOUT, TRAIN_TRAFFIC, UPDATES, stream_seed, training_windows

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("episode", "mean_return", "mean_final_mse")


def make_env(cfg):
    return SamplingEnv(cfg.W, cfg.M, cfg.omega, cfg.iht_tol, cfg.iht_max_iter, cfg.reward_sign,
                       cfg.iht_step)


def _save(agent, out_dir):
    if out_dir is not None:
        save_checkpoint(agent.policy, out_dir / "policy.ckpt")
        save_checkpoint(agent.value, out_dir / "value.ckpt")


def run_training(cfg, out_dir=None, agent=None):
    """Train one agent for ``cfg.train_episodes`` windows.

    Returns ``(agent, curve)``; ``curve`` rows follow ``CURVE_COLUMNS``. With an
    ``out_dir`` the policy/value checkpoints and ``learning_curve.csv`` are written
    there, checkpoints also every ``cfg.checkpoint_interval`` episodes.
    """
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    agent = agent or PPOAgent(cfg.W, cfg.ppo, seed=stream_seed(cfg, UPDATES, 0))
    env = make_env(cfg)
    model = cfg.traffic_model()
    traffic_rng = np.random.default_rng(stream_seed(cfg, TRAIN_TRAFFIC))
    act_rng = np.random.default_rng(stream_seed(cfg, ACTIONS))
    update_rng = np.random.default_rng(stream_seed(cfg, UPDATES, 1))
    windows = training_windows(cfg)
    pcfg = cfg.ppo
    _save(agent, out_dir)

    curve, returns, finals = [], [], []
    buffer = RolloutBuffer()
    skipped = 0
    updates = 0
    for ep in range(cfg.train_episodes):
        g, H, prev = next(windows)
        comm = sample_comm_pattern(model, traffic_rng)
        try:
            state = env.reset(comm, prev, g, truth=H)
        except DegenerateWindowError:
            skipped += 1
            continue
        ep_return = 0.0
        while not state.done:
            obs = encode(state)
            legal = ~state.occupied
            a, logp = agent.act(obs, legal, act_rng)
            v = agent.value_of(obs)
            out = env.step(state, a)
            buffer.add(obs, legal, a, logp, out.reward, v, out.done)
            ep_return += out.reward
            state = out.next_state
            if len(buffer) == pcfg.horizon:
                last_v = 0.0 if out.done else agent.value_of(encode(state))
                compute_returns_advantages(buffer, pcfg.gamma, pcfg.lam, last_v)
                try:
                    ppo_update(
                        agent.policy, agent.value, buffer, agent.policy_opt, agent.value_opt, pcfg,
                        update_rng,
                        lr_policy=linear_decay(pcfg.lr_policy, ep, cfg.train_episodes),
                        lr_value=linear_decay(pcfg.lr_value, ep, cfg.train_episodes),
                    )
                except NonFiniteLossError:
                    log.error("non-finite loss at episode %d; keeping last checkpoint", ep)
                    raise
                updates += 1
                buffer = RolloutBuffer()
        returns.append(ep_return)
        finals.append(normalized_mse(state.recon, H))

        done_eps = ep + 1
        if done_eps % cfg.log_interval == 0 or done_eps == cfg.train_episodes:
            curve.append((done_eps, float(np.mean(returns)), float(np.mean(finals))))
            log.info("episode %d  mean return %.5f  mean final NMSE %.4f", *curve[-1])
            returns, finals = [], []
        if out_dir is not None and done_eps % cfg.checkpoint_interval == 0:
            _save(agent, out_dir)

    if skipped:
        log.warning("skipped %d windows with an all-zero true spectrum", skipped)
    _save(agent, out_dir)
    if out_dir is not None:
        write_curve(curve, out_dir / "learning_curve.csv")
    return agent, curve


def held_out_returns(cfg, policy, episodes=200):
    """Greedy episode returns on ideal-environment windows never used for training."""
    env = make_env(cfg)
    model = cfg.traffic_model()
    traffic_rng = np.random.default_rng(stream_seed(cfg, HELDOUT, 0))
    windows = training_windows(cfg, HELDOUT)
    out = []
    while len(out) < episodes:
        g, H, prev = next(windows)
        comm = sample_comm_pattern(model, traffic_rng)
        try:
            state = env.reset(comm, prev, g, truth=H)
        except DegenerateWindowError:
            continue
        total = 0.0
        while not state.done:
            logits = policy(encode(state))[0]
            a = int(np.argmax(np.where(state.occupied, -np.inf, logits)))
            step = env.step(state, a)
            total += step.reward
            state = step.next_state
        out.append(total)
    return np.asarray(out)


def write_curve(curve, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CURVE_COLUMNS)
        for row in curve:
            w.writerow([row[0], repr(row[1]), repr(row[2])])
