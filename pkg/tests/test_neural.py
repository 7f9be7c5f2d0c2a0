import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdsampling.neural.adam import Adam, clip_grad_norm, linear_decay
from mdsampling.neural.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from mdsampling.neural.network import (
    CHANNELS,
    KERNEL,
    ConvNet,
    ShapeError,
    entropy,
    masked_log_softmax,
    policy_forward,
    value_forward,
)
from mdsampling.neural.ppo import (
    NonFiniteLossError,
    PPOAgent,
    PPOConfig,
    RolloutBuffer,
    clipped_surrogate,
    compute_returns_advantages,
    policy_loss_and_grad,
    ppo_update,
)

from gradcheck import fd_check

W = 16


def net_pair(seed=0, head_scale=1.0):
    rng = np.random.default_rng(seed)
    return ConvNet(W, "policy", rng, head_scale), ConvNet(W, "value", rng, head_scale)


# ---- architecture -------------------------------------------------------------

def test_layer_shapes():
    p, v = net_pair()
    shapes = dict(p.layer_shapes())
    assert [shapes[f"conv{i}.w"] for i in range(4)] == [(4, 3, 5), (8, 4, 5), (16, 8, 5), (32, 16, 5)]
    assert shapes["head.w"] == (W, 32 * W) and dict(v.layer_shapes())["head.w"] == (1, 32 * W)
    assert CHANNELS[-1] == 32 and KERNEL == 5


def test_init_bounds():
    p = ConvNet(64, "policy", np.random.default_rng(1))
    assert np.abs(p.params["conv0.w"]).max() <= np.sqrt(1 / 15)
    assert np.abs(p.params["head.w"]).max() <= 0.01 * np.sqrt(1 / (32 * 64))


def test_shape_errors():
    p, _ = net_pair()
    with pytest.raises(ShapeError):
        p(np.zeros((3, W + 1)))
    with pytest.raises(ShapeError):
        p(np.zeros((2, W)))
    with pytest.raises(ValueError):
        ConvNet(W, "critic")


# ---- forward contracts ----------------------------------------------------------

def test_zero_params_uniform_and_zero_value():
    p, v = net_pair()
    p.zero_()
    v.zero_()
    legal = np.ones(W, bool)
    legal[[0, 5]] = False
    out = policy_forward(p, np.random.default_rng(0).standard_normal((3, W)), legal)
    np.testing.assert_allclose(out.probs[legal], 1 / 14, atol=1e-15)
    assert np.all(out.probs[~legal] == 0)
    assert value_forward(v, np.ones((3, W))) == 0.0


def test_single_legal_action():
    p, _ = net_pair()
    out = policy_forward(p, np.ones((3, W)), [7])
    assert out.probs[7] == pytest.approx(1.0, abs=1e-15)


def test_empty_mask_rejected():
    p, _ = net_pair()
    with pytest.raises(ValueError):
        policy_forward(p, np.ones((3, W)), np.zeros(W, bool))


def test_value_deterministic_and_batched():
    _, v = net_pair()
    x = np.random.default_rng(2).standard_normal((3, W))
    assert value_forward(v, x) == value_forward(v, x.copy())
    batch = value_forward(v, np.stack([x, x]))
    assert batch.shape == (2,) and batch[0] == batch[1]
    assert batch[0] == pytest.approx(value_forward(v, x), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_masked_softmax_normalized(seed):
    rng = np.random.default_rng(seed)
    p = ConvNet(8, "policy", rng, head_scale=rng.uniform(0.01, 10))
    legal = rng.random(8) < 0.5
    legal[rng.integers(8)] = True
    out = policy_forward(p, rng.standard_normal((3, 8)), legal)
    assert abs(out.probs.sum() - 1) < 1e-6
    assert np.all(out.probs[~legal] == 0)


def test_value_perturbation_matches_gradient():
    _, v = net_pair(3)
    x = np.random.default_rng(3).standard_normal((3, W))
    out, cache = v.forward(x)
    g = v.backward(cache, np.ones((1, 1)))
    delta = 1e-6
    v.params["conv2.w"][3, 1, 2] += delta
    changed = value_forward(v, x) - out[0, 0]
    assert changed == pytest.approx(delta * g["conv2.w"][3, 1, 2], abs=1e-10)


# ---- backward ---------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["policy", "value"])
def test_gradient_check_every_layer(kind):
    rng = np.random.default_rng(7)
    net = ConvNet(W, kind, rng, head_scale=1.0)
    x = rng.standard_normal((2, 3, W))
    up = rng.standard_normal((2, net.out_dim))
    report = fd_check(net, x, up, delta=1e-4)
    assert set(report) == set(net.params)
    for name, r in report.items():
        assert r["rel_err"] < 1e-4, (name, r)
        assert r["checked"] >= 0.9 * net.params[name].size


def test_zero_upstream_zero_grads():
    p, _ = net_pair()
    _, cache = p.forward(np.ones((2, 3, W)))
    for g in p.backward(cache, np.zeros((2, W))).values():
        assert not np.any(g)


def test_backward_linear_in_upstream():
    p, _ = net_pair(4)
    rng = np.random.default_rng(4)
    _, cache = p.forward(rng.standard_normal((3, 3, W)))
    u1, u2 = rng.standard_normal((3, W)), rng.standard_normal((3, W))
    g1, g2 = p.backward(cache, u1), p.backward(cache, u2)
    g = p.backward(cache, 2.5 * u1 - 0.5 * u2)
    for k in g:
        np.testing.assert_allclose(g[k], 2.5 * g1[k] - 0.5 * g2[k], atol=1e-10)


def test_policy_loss_gradient_finite_difference():
    rng = np.random.default_rng(5)
    p = ConvNet(W, "policy", rng, head_scale=1.0)
    B = 6
    obs = rng.standard_normal((B, 3, W))
    legal = rng.random((B, W)) < 0.7
    legal[:, 0] = True
    logp = masked_log_softmax(p(obs), legal)
    actions = np.array([rng.choice(np.flatnonzero(l)) for l in legal])
    old = logp[np.arange(B), actions] + rng.normal(0, 0.02, B)
    adv = rng.standard_normal(B)
    loss, grads, _ = policy_loss_and_grad(p, obs, legal, actions, old, adv, 0.1, 0.01)
    delta = 1e-5
    for name in ("conv1.w", "head.w", "head.b"):
        flat = p.params[name].reshape(-1)
        for i in rng.choice(flat.size, 5, replace=False):
            o = flat[i]
            flat[i] = o + delta
            lp = policy_loss_and_grad(p, obs, legal, actions, old, adv, 0.1, 0.01)[0]
            flat[i] = o - delta
            lm = policy_loss_and_grad(p, obs, legal, actions, old, adv, 0.1, 0.01)[0]
            flat[i] = o
            num = (lp - lm) / (2 * delta)
            assert grads[name].reshape(-1)[i] == pytest.approx(num, rel=1e-4, abs=1e-9)


# ---- PPO pieces ---------------------------------------------------------------------

def buffer_of(rewards, dones, values=None):
    buf = RolloutBuffer()
    values = values or [0.0] * len(rewards)
    for r, d, v in zip(rewards, dones, values):
        buf.add(np.zeros((3, W)), np.ones(W, bool), 0, 0.0, r, v, d)
    return buf


def test_returns_geometric_sum():
    buf = compute_returns_advantages(buffer_of([1, 1, 1], [False, False, True]), 0.99, 0.95)
    np.testing.assert_allclose(buf.returns, [2.9701, 1.99, 1.0], atol=1e-12)


def test_returns_gamma_zero_and_single_step():
    buf = compute_returns_advantages(buffer_of([0.3, -1, 2], [True, True, True], [0.1, 0.2, 0.5]), 0.0, 0.95)
    np.testing.assert_allclose(buf.returns, [0.3, -1, 2])
    np.testing.assert_allclose(buf.raw_advantages, [0.2, -1.2, 1.5])
    assert abs(buf.advantages.mean()) < 1e-12 and buf.advantages.std() == pytest.approx(1, abs=1e-6)


def test_returns_reset_at_episode_boundary():
    buf = compute_returns_advantages(buffer_of([1, 1, 5], [False, True, True]), 0.5, 0.95)
    np.testing.assert_allclose(buf.returns, [1.5, 1.0, 5.0])


def test_returns_empty_buffer():
    with pytest.raises(ValueError):
        compute_returns_advantages(RolloutBuffer(), 0.99, 0.95)


def test_clip_saturation():
    surr, dsurr = clipped_surrogate(np.array([1.5]), np.array([2.0]), 0.1)
    assert surr[0] == pytest.approx(1.1 * 2.0) and dsurr[0] == 0.0
    surr, dsurr = clipped_surrogate(np.array([1.0]), np.array([-3.0]), 0.1)
    assert surr[0] == -3.0 and dsurr[0] == -3.0


def test_ratio_one_equals_vanilla_policy_gradient():
    rng = np.random.default_rng(6)
    p = ConvNet(W, "policy", rng, head_scale=1.0)
    obs = rng.standard_normal((4, 3, W))
    legal = np.ones((4, W), bool)
    logp = masked_log_softmax(p(obs), legal)
    actions = np.array([1, 3, 5, 7])
    adv = rng.standard_normal(4)
    _, g, _ = policy_loss_and_grad(p, obs, legal, actions, logp[np.arange(4), actions], adv, 0.1, 0.0)
    probs = np.exp(logp)
    onehot = np.eye(W)[actions]
    _, cache = p.forward(obs)
    vanilla = p.backward(cache, -(adv[:, None] * (onehot - probs)) / 4)
    for k in g:
        np.testing.assert_allclose(g[k], vanilla[k], atol=1e-12)


def test_entropy_uniform():
    for n in (1, 2, 7, 16):
        p = np.full(n, 1 / n)
        assert entropy(p, np.log(p)) == pytest.approx(np.log(n), abs=1e-12)


def test_nan_loss_aborts():
    agent = PPOAgent(W, PPOConfig(horizon=4, minibatch=4, epochs=1), seed=0)
    buf = buffer_of([1, 0, 1, 0], [True] * 4)
    compute_returns_advantages(buf, 0.99, 0.95)
    buf.returns[0] = np.nan
    before = {k: v.copy() for k, v in agent.value.params.items()}
    with pytest.raises(NonFiniteLossError):
        ppo_update(agent.policy, agent.value, buf, agent.policy_opt, agent.value_opt,
                   agent.cfg, np.random.default_rng(0))
    for k, v in agent.value.params.items():
        assert np.array_equal(v, before[k])


def test_update_requires_advantages():
    agent = PPOAgent(W, seed=0)
    with pytest.raises(ValueError):
        ppo_update(agent.policy, agent.value, buffer_of([1], [True]), agent.policy_opt,
                   agent.value_opt, agent.cfg, np.random.default_rng(0))


def test_agent_greedy_and_sampled_legal():
    agent = PPOAgent(W, seed=1)
    legal = np.zeros(W, bool)
    legal[[2, 9]] = True
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, logp = agent.act(np.ones((3, W)), legal, rng)
        assert a in (2, 9) and logp <= 0
    a, _ = agent.act(np.ones((3, W)), legal, greedy=True)
    assert a in (2, 9)


# ---- Adam and schedule -----------------------------------------------------------------

def test_adam_first_step_is_sign():
    params = {"w": np.array([1.0, -2.0, 0.5])}
    opt = Adam(params)
    opt.step(params, {"w": np.array([3.0, -0.2, 1e-3])}, lr=0.01)
    np.testing.assert_allclose(params["w"], [0.99, -1.99, 0.49], atol=1e-7)


def test_adam_zero_grad_no_change():
    params = {"w": np.array([1.0, 2.0])}
    opt = Adam(params)
    for _ in range(5):
        opt.step(params, {"w": np.zeros(2)}, lr=0.1)
    assert params["w"].tolist() == [1.0, 2.0]


def test_adam_elementwise_independent():
    params = {"w": np.zeros(2)}
    opt = Adam(params)
    rng = np.random.default_rng(0)
    for _ in range(10):
        g = rng.standard_normal()
        opt.step(params, {"w": np.array([g, g])}, lr=0.05)
    assert params["w"][0] == params["w"][1]


def test_adam_shape_mismatch():
    params = {"w": np.zeros(2)}
    opt = Adam(params)
    with pytest.raises(ValueError):
        opt.step(params, {"w": np.zeros(3)}, 0.1)
    with pytest.raises(ValueError):
        opt.step(params, {"v": np.zeros(2)}, 0.1)


def test_linear_decay():
    assert linear_decay(1e-3, 0, 100) == 1e-3
    assert linear_decay(1e-3, 50, 100) == pytest.approx(5e-4)
    assert linear_decay(1e-3, 100, 100) == 0.0
    assert linear_decay(1e-3, 150, 100) == 0.0
    lrs = [linear_decay(5e-5, t, 10) for t in range(11)]
    assert all(a >= b >= 0 for a, b in zip(lrs, lrs[1:]))


def test_clip_grad_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_grad_norm(g, 0.5) == pytest.approx(5.0)
    assert np.sqrt(g["a"] ** 2 + g["b"] ** 2)[0] == pytest.approx(0.5)


# ---- checkpoints ------------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    p = ConvNet(W, "policy", np.random.default_rng(8), dtype=np.float32)
    save_checkpoint(p, tmp_path / "p.ckpt")
    q = load_checkpoint(tmp_path / "p.ckpt", expected="policy")
    for k in p.params:
        assert np.array_equal(p.params[k].astype(np.float64), q.params[k])
    save_checkpoint(q, tmp_path / "q.ckpt")
    assert (tmp_path / "p.ckpt").read_bytes() == (tmp_path / "q.ckpt").read_bytes()


def test_checkpoint_float64_params_stored_as_float32(tmp_path):
    p = ConvNet(W, "value", np.random.default_rng(9))
    save_checkpoint(p, tmp_path / "v.ckpt")
    q = load_checkpoint(tmp_path / "v.ckpt", expected=p)
    for k in p.params:
        assert np.array_equal(p.params[k].astype(np.float32).astype(np.float64), q.params[k])


def test_checkpoint_truncated(tmp_path):
    p = ConvNet(W, "policy")
    path = tmp_path / "p.ckpt"
    save_checkpoint(p, path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_kind_mismatch(tmp_path):
    path = tmp_path / "p.ckpt"
    save_checkpoint(ConvNet(W, "policy"), path)
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected="value")
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected=ConvNet(W, "value"))


def test_checkpoint_version_and_garbage(tmp_path):
    path = tmp_path / "p.ckpt"
    save_checkpoint(ConvNet(W, "policy"), path)
    path.write_bytes(path.read_bytes().replace(b"version=1", b"version=9", 1))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_bytes(b"hello\nworld\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
