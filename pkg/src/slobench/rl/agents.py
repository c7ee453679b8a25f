"""DQN, A2C and PPO over the 108-way configuration action space."""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass

import numpy as np

from slobench.env.actions import N_ACTIONS
from slobench.errors import CheckpointError
from slobench.rl.buffers import ReplayBuffer, RolloutBuffer
from slobench.rl.featurize import OBS_DIM
from slobench.rl.losses import a2c_loss, dqn_loss, dqn_targets, gae, log_softmax, normalize, ppo_loss
from slobench.rl.nn import MLP, Adam, NetSpec


@dataclass(frozen=True)
class DqnParams:
    learning_rate: float = 1e-4
    batch_size: int = 128
    buffer_size: int = 100_000
    gamma: float = 0.99
    train_freq: int = 4
    gradient_steps: int = 4
    target_update_interval: int = 10_000
    exploration_initial_eps: float = 1.0
    exploration_final_eps: float = 0.05
    exploration_fraction: float = 0.1
    hidden: tuple = (128, 128)


@dataclass(frozen=True)
class A2cParams:
    learning_rate: float = 1e-4
    n_steps: int = 64
    gamma: float = 0.99
    gae_lambda: float = 0.9
    vf_coef: float = 0.75
    ent_coef: float = 0.01
    normalize_advantage: bool = True
    hidden: tuple = (128, 128)


@dataclass(frozen=True)
class PpoParams:
    learning_rate: float = 1e-4
    n_steps: int = 1280
    batch_size: int = 128
    n_epochs: int = 10
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    vf_coef: float = 0.25
    ent_coef: float = 0.01
    normalize_advantage: bool = True
    hidden: tuple = (64, 64)


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


class RlAgent:
    name = "rl"

    def __init__(self, params, spec: NetSpec, seed):
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.net = MLP(spec, self.rng)
        self.opt = Adam(spec.n_params(), lr=params.learning_rate)
        self.steps = 0
        self.updates = 0
        self.last_loss = float("nan")

    def param_hash(self) -> str:
        return hashlib.sha256(self.net.params.tobytes()).hexdigest()

    # subclasses provide act/act_batch/step
    def _base_arrays(self) -> dict:
        return {"params": self.net.params, "adam_m": self.opt.m, "adam_v": self.opt.v}

    def state_header(self) -> dict:
        params = asdict(self.params)
        params["hidden"] = list(params["hidden"])
        return {"agent": self.name, "params": params, "spec": [self.net.spec.in_dim,
                list(self.net.spec.hidden), list(self.net.spec.heads)],
                "steps": self.steps, "updates": self.updates, "adam_t": self.opt.t,
                "rng": _rng_state(self.rng)}

    def load_state(self, header: dict, arrays: dict):
        if header.get("agent") != self.name:
            raise CheckpointError(f"checkpoint holds agent {header.get('agent')!r}, not {self.name!r}")
        spec = [self.net.spec.in_dim, list(self.net.spec.hidden), list(self.net.spec.heads)]
        if header["spec"] != spec or arrays["params"].shape != self.net.params.shape:
            raise CheckpointError(f"architecture {header['spec']} does not match {spec}")
        self.net.params[:] = arrays["params"]
        self.opt.m[:] = arrays["adam_m"]
        self.opt.v[:] = arrays["adam_v"]
        self.opt.t = header["adam_t"]
        self.steps, self.updates = header["steps"], header["updates"]
        self.rng.bit_generator.state = header["rng"]


class DqnAgent(RlAgent):
    name = "dqn"

    def __init__(self, budget: int, seed=0, params: DqnParams = DqnParams()):
        super().__init__(params, NetSpec(OBS_DIM, tuple(params.hidden), (N_ACTIONS,)), seed)
        self.budget = budget
        self.target = self.net.params.copy()
        self.buffer = ReplayBuffer(params.buffer_size, OBS_DIM, params.batch_size)

    @property
    def epsilon(self) -> float:
        p = self.params
        span = p.exploration_fraction * self.budget
        frac = 1.0 if span <= 0 else min(1.0, self.steps / span)
        return p.exploration_initial_eps + frac * (p.exploration_final_eps - p.exploration_initial_eps)

    def q_values(self, obs) -> np.ndarray:
        return self.net(np.atleast_2d(obs))[0]

    def act(self, obs, explore: bool = True) -> int:
        if explore and self.rng.random() < self.epsilon:
            return int(self.rng.integers(N_ACTIONS))
        return int(np.argmax(self.q_values(obs)[0]))

    def act_batch(self, obs) -> np.ndarray:
        return np.argmax(self.q_values(obs), axis=1)

    def step(self, obs, action: int, reward: float, next_obs):
        p = self.params
        self.buffer.add(obs, action, reward, next_obs)
        self.steps += 1
        if self.steps % p.train_freq == 0 and len(self.buffer) >= p.batch_size:
            for _ in range(p.gradient_steps):
                self.last_loss = self.update()
        if self.steps % p.target_update_interval == 0:
            self.target[:] = self.net.params

    def update(self) -> float:
        p = self.params
        obs, actions, rewards, next_obs = self.buffer.sample(p.batch_size, self.rng)
        y = dqn_targets(rewards, self.net(next_obs, self.target)[0], p.gamma)
        (q,), cache = self.net.forward(obs)
        loss, dq = dqn_loss(q, actions, y)
        self.opt.step(self.net.params, self.net.backward(cache, [dq]))
        self.updates += 1
        return loss

    def state_header(self) -> dict:
        h = super().state_header()
        h["budget"] = self.budget
        return h

    def state_arrays(self) -> dict:
        return {**self._base_arrays(), "target": self.target, **self.buffer.state_arrays()}

    def load_state(self, header: dict, arrays: dict):
        super().load_state(header, arrays)
        self.budget = header["budget"]
        self.target[:] = arrays["target"]
        self.buffer.load_arrays(arrays)


class _ActorCritic(RlAgent):
    def __init__(self, params, seed):
        spec = NetSpec(OBS_DIM, tuple(params.hidden), (N_ACTIONS, 1), head_gains=(0.01, 1.0))
        super().__init__(params, spec, seed)
        self.rollout = RolloutBuffer(params.n_steps, OBS_DIM)

    def policy(self, obs):
        logits, values = self.net(np.atleast_2d(obs))
        return logits, values[:, 0]

    def act(self, obs, explore: bool = True) -> int:
        logits = self.policy(obs)[0][0]
        if not explore:
            return int(np.argmax(logits))
        cdf = np.cumsum(np.exp(log_softmax(logits)))
        return int(min(np.searchsorted(cdf, self.rng.random() * cdf[-1], side="right"),
                       N_ACTIONS - 1))

    def act_batch(self, obs) -> np.ndarray:
        return np.argmax(self.policy(obs)[0], axis=1)

    def step(self, obs, action: int, reward: float, next_obs):
        self.rollout.add(obs, action, reward, next_obs)
        self.steps += 1
        if self.rollout.full:
            self.last_loss = self.update()
            self.rollout.clear()

    def _advantages(self):
        r = self.rollout
        _, values = self.policy(r.obs)
        bootstrap = float(self.policy(r.last_obs)[1][0])
        adv, returns = gae(r.rewards, values, bootstrap, self.params.gamma, self.params.gae_lambda)
        return adv, returns

    def state_arrays(self) -> dict:
        return {**self._base_arrays(), **self.rollout.state_arrays()}

    def load_state(self, header: dict, arrays: dict):
        super().load_state(header, arrays)
        self.rollout.load_arrays(arrays)


class A2cAgent(_ActorCritic):
    name = "a2c"

    def __init__(self, budget: int = 0, seed=0, params: A2cParams = A2cParams()):
        super().__init__(params, seed)

    def update(self) -> float:
        p, r = self.params, self.rollout
        adv, returns = self._advantages()
        if p.normalize_advantage:
            adv = normalize(adv)
        (logits, values), cache = self.net.forward(r.obs)
        loss, d_logits, d_values, _ = a2c_loss(logits, values[:, 0], r.actions, adv, returns,
                                               p.vf_coef, p.ent_coef)
        self.opt.step(self.net.params, self.net.backward(cache, [d_logits, d_values[:, None]]))
        self.updates += 1
        return loss


class PpoAgent(_ActorCritic):
    name = "ppo"

    def __init__(self, budget: int = 0, seed=0, params: PpoParams = PpoParams()):
        super().__init__(params, seed)

    def update(self) -> float:
        p, r = self.params, self.rollout
        adv, returns = self._advantages()
        logits, _ = self.policy(r.obs)
        old_logp = log_softmax(logits)[np.arange(r.size), r.actions]
        losses = []
        for _ in range(p.n_epochs):
            order = self.rng.permutation(r.size)
            for start in range(0, r.size, p.batch_size):
                idx = order[start:start + p.batch_size]
                a = normalize(adv[idx]) if p.normalize_advantage and len(idx) > 1 else adv[idx]
                (lg, vals), cache = self.net.forward(r.obs[idx])
                loss, d_logits, d_values, _ = ppo_loss(lg, vals[:, 0], r.actions[idx],
                                                       old_logp[idx], a, returns[idx],
                                                       p.clip_range, p.vf_coef, p.ent_coef)
                self.opt.step(self.net.params,
                              self.net.backward(cache, [d_logits, d_values[:, None]]))
                self.updates += 1
                losses.append(loss)
        return float(np.mean(losses))


AGENTS = {"dqn": DqnAgent, "a2c": A2cAgent, "ppo": PpoAgent}
