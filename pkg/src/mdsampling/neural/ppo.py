"""PPO-clip with separate policy and value CNNs."""
from dataclasses import dataclass, field

import numpy as np

from .adam import Adam, clip_grad_norm
from .network import ConvNet, as_legal_mask, entropy, masked_log_softmax, policy_forward, value_forward


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass
class PPOConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.1
    entropy_coef: float = 0.01
    vf_coef: float = 0.5
    lr_policy: float = 1e-3
    lr_value: float = 5e-5
    horizon: int = 512
    epochs: int = 4
    minibatch: int = 64
    max_grad_norm: float = 0.5


@dataclass
class RolloutBuffer:
    obs: list = field(default_factory=list)
    legal: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    returns: np.ndarray = None
    advantages: np.ndarray = None
    raw_advantages: np.ndarray = None

    def add(self, obs, legal, action, log_prob, reward, value, done):
        self.obs.append(obs)
        self.legal.append(legal)
        self.actions.append(int(action))
        self.log_probs.append(float(log_prob))
        self.rewards.append(float(reward))
        self.values.append(float(value))
        self.dones.append(bool(done))

    def __len__(self):
        return len(self.rewards)


def compute_returns_advantages(buffer, gamma, lam, last_value=0.0):
    """Discounted returns and GAE advantages, reset at every ``done`` flag.

    ``last_value`` bootstraps a trailing episode that the buffer cut short.
    Advantages are normalized to zero mean and unit variance; the unnormalized
    ones are kept in ``raw_advantages``.
    """
    n = len(buffer)
    if n == 0:
        raise ValueError("cannot compute returns of an empty buffer")
    rewards = np.asarray(buffer.rewards, dtype=float)
    values = np.asarray(buffer.values, dtype=float)
    dones = np.asarray(buffer.dones, dtype=bool)
    returns = np.empty(n)
    adv = np.empty(n)
    next_return, next_value, next_adv = last_value, last_value, 0.0
    for t in reversed(range(n)):
        if dones[t]:
            next_return, next_value, next_adv = 0.0, 0.0, 0.0
        returns[t] = rewards[t] + gamma * next_return
        delta = rewards[t] + gamma * next_value - values[t]
        adv[t] = delta + gamma * lam * next_adv
        next_return, next_value, next_adv = returns[t], values[t], adv[t]
    buffer.returns = returns
    buffer.raw_advantages = adv
    buffer.advantages = (adv - adv.mean()) / (adv.std() + 1e-8)
    return buffer


def clipped_surrogate(ratio, adv, clip):
    """Per-sample ``min(r*A, clip(r)*A)`` and its derivative with respect to ``r``."""
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    surr = np.minimum(unclipped, clipped)
    dsurr = np.where(unclipped <= clipped, adv, 0.0)
    return surr, dsurr


def policy_loss_and_grad(net, obs, legal, actions, old_log_probs, adv, clip, entropy_coef):
    """Negative clipped objective (plus entropy bonus) and its parameter gradients."""
    logits, cache = net.forward(obs)
    logp = masked_log_softmax(logits, legal)
    probs = np.exp(logp)
    B = len(actions)
    rows = np.arange(B)
    logp_a = logp[rows, actions]
    ratio = np.exp(logp_a - old_log_probs)
    surr, dsurr = clipped_surrogate(ratio, adv, clip)
    ent = entropy(probs, logp)
    loss = -(surr.mean() + entropy_coef * ent.mean())

    # d logp_a / d logits = onehot(a) - p ; d H / d logits = -p * (log p + H)
    g_logp = dsurr * ratio
    onehot = np.zeros_like(probs)
    onehot[rows, actions] = 1.0
    dlogits = g_logp[:, None] * (onehot - probs)
    safe_logp = np.where(probs > 0, logp, 0.0)
    dlogits += entropy_coef * (-probs * (safe_logp + ent[:, None]))
    dlogits *= -1.0 / B
    dlogits = np.where(legal, dlogits, 0.0)
    grads = net.backward(cache, dlogits)
    stats = {
        "policy_loss": float(loss),
        "entropy": float(ent.mean()),
        "approx_kl": float(np.mean(old_log_probs - logp_a)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip)),
    }
    return loss, grads, stats


def value_loss_and_grad(net, obs, returns, vf_coef):
    out, cache = net.forward(obs)
    err = out[:, 0] - returns
    loss = vf_coef * np.mean(err ** 2)
    grads = net.backward(cache, (2.0 * vf_coef / len(returns)) * err[:, None])
    return loss, grads


def ppo_update(policy, value, buffer, policy_opt, value_opt, cfg, rng, lr_policy=None, lr_value=None):
    """Run ``cfg.epochs`` passes of shuffled minibatch updates over ``buffer``."""
    if buffer.advantages is None:
        raise ValueError("compute returns and advantages before updating")
    lr_policy = cfg.lr_policy if lr_policy is None else lr_policy
    lr_value = cfg.lr_value if lr_value is None else lr_value
    obs = np.asarray(buffer.obs)
    legal = np.asarray(buffer.legal, dtype=bool)
    actions = np.asarray(buffer.actions)
    old_logp = np.asarray(buffer.log_probs)
    n = len(buffer)
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = order[start:start + cfg.minibatch]
            ploss, pgrads, stats = policy_loss_and_grad(
                policy, obs[idx], legal[idx], actions[idx], old_logp[idx],
                buffer.advantages[idx], cfg.clip, cfg.entropy_coef,
            )
            vloss, vgrads = value_loss_and_grad(value, obs[idx], buffer.returns[idx], cfg.vf_coef)
            if not (np.isfinite(ploss) and np.isfinite(vloss)):
                raise NonFiniteLossError(
                    f"non-finite loss (policy={ploss}, value={vloss}); update aborted"
                )
            stats["grad_norm"] = clip_grad_norm(pgrads, cfg.max_grad_norm)
            clip_grad_norm(vgrads, cfg.max_grad_norm)
            policy_opt.step(policy.params, pgrads, lr_policy)
            value_opt.step(value.params, vgrads, lr_value)
            stats["value_loss"] = float(vloss)
            history.append(stats)
    return {k: float(np.mean([h[k] for h in history])) for k in history[0]}


class PPOAgent:
    """Policy and value networks with their optimizers."""

    def __init__(self, W, cfg=None, seed=0):
        self.cfg = cfg or PPOConfig()
        rng = np.random.default_rng(seed)
        self.policy = ConvNet(W, "policy", rng=rng)
        self.value = ConvNet(W, "value", rng=rng)
        self.policy_opt = Adam(self.policy.params)
        self.value_opt = Adam(self.value.params)

    @property
    def W(self):
        return self.policy.W

    def act(self, obs, legal, rng=None, greedy=False):
        """Return ``(action, log_prob)``; greedy picks the most probable legal slot."""
        legal = as_legal_mask(legal, self.W)
        out = policy_forward(self.policy, obs, legal)
        if greedy:
            a = int(np.argmax(np.where(legal, out.logits, -np.inf)))
        else:
            a = int(rng.choice(self.W, p=out.probs / out.probs.sum()))
        return a, float(out.log_probs[a])

    def value_of(self, obs):
        return value_forward(self.value, obs)
