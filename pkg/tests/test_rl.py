"""RL agents: network gradients, losses, GAE, buffers, featurization and persistence."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slobench import checkpoint
from slobench.env.actions import N_ACTIONS, StreamConfig, enumerate_actions
from slobench.env.dataset import FeatureStats, SyntheticSource
from slobench.env.environment import StreamingEnv
from slobench.env.generator import synthesize
from slobench.env.metrics import MetricsBatch
from slobench.errors import CheckpointError, ContractViolation, DomainError
from slobench.rl.agents import A2cAgent, A2cParams, DqnAgent, DqnParams, PpoAgent, PpoParams
from slobench.rl.buffers import ReplayBuffer
from slobench.rl.featurize import BLOCKS, OBS_DIM, featurize, featurize_batch
from slobench.rl.losses import (a2c_loss, dqn_loss, dqn_targets, entropy, gae, huber,
                                log_softmax, normalize, ppo_loss, softmax)
from slobench.rl.nn import MLP, Adam, NetSpec
from slobench.slo import compliance, preset
from oracles import rel_err, finite_diff, gae_brute, away_from_kinks

CHI2_99_DF107 = 143.94  # 99th percentile of chi-square with 107 degrees of freedom


def small_net(heads, seed=0, gains=None):
    return MLP(NetSpec(24, (8,), heads, gains), np.random.default_rng(seed))


# ----- network --------------------------------------------------------------------
def test_hand_computed_linear_layer():
    net = MLP(NetSpec(2, (), (2,)))
    net.params[:] = [1.0, 2.0, 3.0, 4.0, 0.5, -0.5]   # W row-major (in x out), then b
    out = net(np.array([[1.0, 1.0], [2.0, -1.0]]))[0]
    assert np.array_equal(out, np.array([[4.5, 5.5], [-0.5, -0.5]]))


def test_zero_weights_give_uniform_policy_and_action_zero():
    agent = A2cAgent(seed=0)
    agent.net.params[:] = 0.0
    logits, values = agent.policy(np.ones(OBS_DIM))
    assert np.all(logits == 0) and np.all(values == 0)
    assert np.allclose(softmax(logits), 1 / N_ACTIONS)
    assert agent.act(np.ones(OBS_DIM), explore=False) == 0


def test_same_seed_same_outputs():
    x = np.random.default_rng(1).normal(size=(3, 24))
    a, b = small_net((4,), seed=5), small_net((4,), seed=5)
    assert np.array_equal(a(x)[0], b(x)[0])


def _check(net, loss_of_outputs, x, tol=1e-4):
    def f(p):
        return loss_of_outputs(net(x, p))[0]

    outs, cache = net.forward(x)
    d_outs = loss_of_outputs(outs)[1]
    analytic = net.backward(cache, d_outs)
    numeric = finite_diff(f, net.params.copy())
    assert rel_err(analytic, numeric) < tol


def test_dqn_gradient():
    rng = np.random.default_rng(2)
    net = small_net((4,))
    x = away_from_kinks(net, rng, 16)
    actions = rng.integers(0, 4, 16)
    targets = rng.normal(size=16) * 2

    def loss(outs):
        val, dq = dqn_loss(outs[0], actions, targets)
        return val, [dq]

    _check(net, loss, x)


def test_a2c_gradient():
    rng = np.random.default_rng(3)
    net = small_net((4, 1), gains=(0.5, 1.0))
    x = away_from_kinks(net, rng, 16)
    actions = rng.integers(0, 4, 16)
    adv, ret = rng.normal(size=16), rng.normal(size=16)

    def loss(outs):
        val, dl, dv, _ = a2c_loss(outs[0], outs[1][:, 0], actions, adv, ret, 0.75, 0.01)
        return val, [dl, dv[:, None]]

    _check(net, loss, x)


def test_ppo_gradient():
    rng = np.random.default_rng(4)
    net = small_net((4, 1), gains=(0.5, 1.0))
    x = away_from_kinks(net, rng, 16)
    actions = rng.integers(0, 4, 16)
    logits0 = net(x)[0]
    # perturbed old policy so some ratios sit inside and some outside the clip range
    old_logp = log_softmax(logits0)[np.arange(16), actions] + rng.normal(0, 0.3, 16)
    adv, ret = rng.normal(size=16), rng.normal(size=16)

    def loss(outs):
        val, dl, dv, _ = ppo_loss(outs[0], outs[1][:, 0], actions, old_logp, adv, ret,
                                  0.2, 0.25, 0.01)
        return val, [dl, dv[:, None]]

    _check(net, loss, x)


def test_backward_is_linear_in_output_gradient():
    rng = np.random.default_rng(5)
    net = small_net((4, 1))
    outs, cache = net.forward(rng.normal(size=(6, 24)))
    d = [rng.normal(size=o.shape) for o in outs]
    g = net.backward(cache, d)
    assert np.allclose(net.backward(cache, [2 * x for x in d]), 2 * g, rtol=0, atol=1e-15)
    assert not net.backward(cache, [np.zeros_like(o) for o in outs]).any()


def test_adam_first_step_moves_by_learning_rate():
    p = np.zeros(3)
    Adam(3, lr=1e-4).step(p, np.array([2.0, -3.0, 0.0]))
    assert np.allclose(p, [-1e-4, 1e-4, 0.0], rtol=1e-6)


# ----- DQN ----------------------------------------------------------------------------
def test_dqn_targets_and_huber():
    r = np.array([0.5, 1.0])
    nxt = np.array([[1.0, 3.0], [2.0, -1.0]])
    assert np.array_equal(dqn_targets(r, nxt, 0.0), r)
    assert np.allclose(dqn_targets(r, nxt, 0.9), [0.5 + 2.7, 1.0 + 1.8])
    q = np.array([[0.2, 0.7]])
    loss, dq = dqn_loss(q, [1], np.array([0.4]))
    assert loss == pytest.approx(0.5 * 0.3 ** 2, rel=1e-12)
    loss, dq = dqn_loss(q, [0], np.array([3.2]))
    assert loss == pytest.approx(3.0 - 0.5, rel=1e-12) and dq[0, 0] == -1.0
    assert huber(np.array([1.0]))[0][0] == 0.5


def test_uniform_exploration_chi_square():
    agent = DqnAgent(budget=1000, seed=3)
    assert agent.epsilon == 1.0
    obs = np.zeros(OBS_DIM)
    counts = np.bincount([agent.act(obs) for _ in range(100_000)], minlength=N_ACTIONS)
    expected = 100_000 / N_ACTIONS
    assert np.sum((counts - expected) ** 2 / expected) < CHI2_99_DF107


def test_epsilon_schedule():
    agent = DqnAgent(budget=1000, seed=0)
    agent.steps = 50
    assert agent.epsilon == pytest.approx(1.0 - 0.5 * 0.95)
    agent.steps = 100
    assert agent.epsilon == pytest.approx(0.05)
    agent.steps = 900
    assert agent.epsilon == pytest.approx(0.05)


def test_target_network_sync_interval():
    agent = DqnAgent(budget=20_000, seed=1, params=DqnParams(hidden=(8,)))
    rng = np.random.default_rng(0)
    obs = rng.normal(size=OBS_DIM)
    initial = agent.target.copy()
    for t in range(1, 10_001):
        nxt = rng.normal(size=OBS_DIM)
        agent.step(obs, int(rng.integers(N_ACTIONS)), float(rng.random()), nxt)
        obs = nxt
        if t == 9_999:
            assert np.array_equal(agent.target, initial)
            assert not np.array_equal(agent.target, agent.net.params)
    assert agent.steps == 10_000
    assert np.array_equal(agent.target, agent.net.params)
    assert agent.updates == 4 * ((10_000 - 128) // 4 + 1)


def test_replay_buffer_bounds():
    buf = ReplayBuffer(200, 3)
    rng = np.random.default_rng(0)
    with pytest.raises(ContractViolation):
        buf.sample(1, rng)
    for i in range(127):
        buf.add(np.full(3, i), i % 5, float(i), np.full(3, i + 1))
    with pytest.raises(ContractViolation):
        buf.sample(32, rng)
    for i in range(127, 1000):
        buf.add(np.full(3, i), i % 5, float(i), np.full(3, i + 1))
        assert len(buf) <= 200
    obs, actions, rewards, nxt = buf.sample(64, rng)
    assert np.all(rewards >= 800) and np.array_equal(obs[:, 0] + 1, nxt[:, 0])


# ----- GAE ------------------------------------------------------------------------------
def test_gae_matches_brute_force():
    rng = np.random.default_rng(6)
    for T in range(1, 17):
        for _ in range(20):
            r, v = rng.normal(size=T), rng.normal(size=T)
            boot, gamma, lam = rng.normal(), rng.uniform(0.8, 1), rng.uniform(0, 1)
            adv, ret = gae(r, v, boot, gamma, lam)
            assert np.allclose(adv, gae_brute(r, v, boot, gamma, lam), rtol=1e-12, atol=1e-12)
            assert np.allclose(ret, adv + v, rtol=0, atol=0)


def test_gae_special_cases():
    adv, _ = gae([1.0], [0.3], 2.0, 0.99, 0.95)
    assert adv[0] == pytest.approx(1.0 + 0.99 * 2.0 - 0.3, rel=1e-15)
    r, v = np.array([1.0, 0.0, 2.0]), np.array([0.5, 0.1, -0.2])
    adv, _ = gae(r, v, 0.7, 0.9, 0.0)
    assert np.allclose(adv, r + 0.9 * np.array([0.1, -0.2, 0.7]) - v, atol=1e-15)
    with pytest.raises(ContractViolation):
        gae([1.0, 2.0], [1.0], 0.0, 0.9, 0.9)


# ----- A2C and PPO losses ------------------------------------------------------------------
def test_entropy_of_uniform_policy():
    assert entropy(np.zeros((1, N_ACTIONS)))[0] == pytest.approx(math.log(108), rel=1e-12)
    assert round(math.log(108), 3) == 4.682


def test_constant_advantages_normalize_to_zero():
    adv = normalize(np.full(8, 0.37))
    assert np.all(adv == 0)
    logits = np.random.default_rng(0).normal(size=(8, 5))
    _, d_logits, _, parts = a2c_loss(logits, np.zeros(8), np.arange(8) % 5, adv, np.zeros(8),
                                     0.75, 0.0)
    assert parts["policy"] == 0 and not d_logits.any()


def test_a2c_hand_computed_two_action_rollout():
    logits = np.array([[0.0, math.log(3.0)], [math.log(2.0), 0.0]])   # p = (1/4, 3/4), (2/3, 1/3)
    values = np.array([0.5, -0.5])
    actions = np.array([1, 0])
    adv = np.array([1.0, -2.0])
    ret = np.array([1.0, 0.0])
    loss, *_ , parts = a2c_loss(logits, values, actions, adv, ret, 0.75, 0.01)
    pg = -(1.0 * math.log(3 / 4) + -2.0 * math.log(2 / 3)) / 2
    vl = ((1.0 - 0.5) ** 2 + (0.0 + 0.5) ** 2) / 2
    h1 = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
    h2 = -(2 / 3 * math.log(2 / 3) + 1 / 3 * math.log(1 / 3))
    want = pg + 0.75 * vl - 0.01 * (h1 + h2) / 2
    assert loss == pytest.approx(want, abs=1e-10)


def test_ppo_identity_ratio_and_clipping():
    rng = np.random.default_rng(7)
    logits = rng.normal(size=(6, 4))
    actions = rng.integers(0, 4, 6)
    logp = log_softmax(logits)[np.arange(6), actions]
    adv = rng.normal(size=6)
    _, d_ppo, _, parts = ppo_loss(logits, np.zeros(6), actions, logp, adv, np.zeros(6),
                                  0.2, 0.0, 0.0)
    _, d_a2c, _, _ = a2c_loss(logits, np.zeros(6), actions, adv, np.zeros(6), 0.0, 0.0)
    assert parts["policy"] == pytest.approx(-adv.mean(), rel=1e-12)
    assert np.allclose(d_ppo, d_a2c, atol=1e-15)
    # ratio 1.5 with a positive advantage: the clipped branch is active and flat
    old = logp - math.log(1.5)
    _, d_clip, _, parts = ppo_loss(logits, np.zeros(6), actions, old, np.ones(6), np.zeros(6),
                                   0.2, 0.0, 0.0)
    assert parts["policy"] == pytest.approx(-1.2, rel=1e-12) and not d_clip.any()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_policy_is_a_distribution(seed):
    logits = np.random.default_rng(seed).normal(0, 30, size=(4, N_ACTIONS))
    p = softmax(logits)
    assert np.all(p >= 0) and np.all(np.abs(p.sum(axis=1) - 1) < 1e-9)


def test_ppo_update_decreases_loss_on_fixed_rollout():
    params = PpoParams(n_steps=64, batch_size=64, n_epochs=1, hidden=(16,), learning_rate=1e-2)
    agent = PpoAgent(seed=0, params=params)
    rng = np.random.default_rng(8)
    for _ in range(64):
        o = rng.normal(size=OBS_DIM)
        a = int(rng.integers(4))
        agent.rollout.add(o, a, float(a == 2), o)
    r = agent.rollout
    adv, ret = agent._advantages()
    logits, _ = agent.policy(r.obs)
    old_logp = log_softmax(logits)[np.arange(64), r.actions]
    a = normalize(adv)

    def current():
        lg, v = agent.policy(r.obs)
        return ppo_loss(lg, v, r.actions, old_logp, a, ret, 0.2, 0.25, 0.01)

    before = current()[0]
    agent.rng = np.random.default_rng(0)
    agent.update()
    loss, _, _, parts = current()
    assert loss < before and math.isfinite(parts["approx_kl"])


# ----- featurization and reward ------------------------------------------------------------------
def test_observation_layout():
    b = synthesize(StreamConfig(10, 360, 20), 50, rng=np.random.default_rng(0))
    stats = FeatureStats.from_batch(b)
    for cfg in enumerate_actions()[::7]:
        obs = featurize_batch(b, cfg, stats)
        assert obs.shape == (50, OBS_DIM) == (50, 24)
        for name, sl in BLOCKS.items():
            if name != "continuous":
                assert np.all(obs[:, sl].sum(axis=1) == 1)
    mean_sample = MetricsBatch(*(np.array([m]) for m in stats.mean), thermal=[0],
                               stream_count=[1])
    obs = featurize(mean_sample[0], StreamConfig(1, 180, 5), stats)
    assert np.all(obs[:5] == 0)
    for name in ("streams", "resolution", "fps"):
        assert obs[BLOCKS[name]][0] == 1
    with pytest.raises(DomainError):
        featurize_batch(b, 3, stats)


def test_reward_is_overall_compliance():
    slos = preset("basic")
    env = StreamingEnv(SyntheticSource(np.random.SeedSequence(0)), slos)
    rng = np.random.default_rng(1)
    for _ in range(20):
        env.configure(int(rng.integers(N_ACTIONS)))
        batch, rewards = env.sample(50)
        for s, r in zip(batch, rewards):
            assert r == compliance(s, slos).s_overall


# ----- determinism and checkpoints -------------------------------------------------------------------
def _drive(agent, n, seed):
    rng = np.random.default_rng(seed)
    obs = rng.normal(size=OBS_DIM)
    hashes = []
    for _ in range(n):
        a = agent.act(obs)
        nxt = rng.normal(size=OBS_DIM)
        agent.step(obs, a, float(a % 3 == 0), nxt)
        obs = nxt
        hashes.append(agent.param_hash())
    return hashes


SMALL = {"dqn": lambda: DqnAgent(2000, seed=4, params=DqnParams(hidden=(16,))),
         "a2c": lambda: A2cAgent(seed=4, params=A2cParams(hidden=(16,))),
         "ppo": lambda: PpoAgent(seed=4, params=PpoParams(hidden=(16,), n_steps=128, batch_size=32,
                                                          n_epochs=2))}


@pytest.mark.parametrize("name", sorted(SMALL))
def test_parameter_trajectory_is_deterministic(name):
    assert _drive(SMALL[name](), 400, 9) == _drive(SMALL[name](), 400, 9)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_checkpoint_resumes_bit_for_bit(name):
    a = SMALL[name]()
    _drive(a, 300, 1)
    blob = checkpoint.dumps(a.state_header(), a.state_arrays())
    b = SMALL[name]()
    header, arrays = checkpoint.loads(blob)
    b.load_state(header, arrays)
    assert b.param_hash() == a.param_hash()
    assert _drive(a, 300, 2) == _drive(b, 300, 2)


def test_checkpoint_rejects_other_architecture_or_agent():
    a = SMALL["a2c"]()
    with pytest.raises(CheckpointError):
        A2cAgent(seed=0).load_state(a.state_header(), a.state_arrays())
    with pytest.raises(CheckpointError):
        SMALL["ppo"]().load_state(a.state_header(), a.state_arrays())
