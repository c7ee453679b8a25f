"""Training loops, corner-seeded evaluation and agent construction."""
from __future__ import annotations

import logging

import numpy as np

from slobench import checkpoint
from slobench.aif.agent import AifAgent, AifParams
from slobench.env.actions import CORNER_INDICES, StreamConfig
from slobench.errors import CheckpointError, ConfigError
from slobench.harness.oracle import oracle_best
from slobench.harness.resources import ResourceMeter
from slobench.harness.runlog import RunLog
from slobench.harness.scenario import BATCH, EVAL_STREAM, TRAIN_STREAM, ScenarioSpec
from slobench.harness.stats import aggregate
from slobench.rl.agents import AGENTS
from slobench.rl.featurize import featurize_batch

log = logging.getLogger(__name__)

AGENT_NAMES = ("aif", "dqn", "a2c", "ppo")
EVAL_SEQUENCES = len(CORNER_INDICES)
EVAL_STEPS = 640
AGENT_STREAM = 2


def make_agent(name: str, scenario: ScenarioSpec, seed: int, aif_params: AifParams | None = None):
    agent_seed = np.random.SeedSequence([seed, AGENT_STREAM])
    if name == "aif":
        return AifAgent(scenario.slos, aif_params or AifParams())
    if name not in AGENTS:
        raise ConfigError(f"unknown agent {name!r}; choose from {AGENT_NAMES}")
    return AGENTS[name](budget=scenario.budget, seed=agent_seed)


def agent_checkpoint(agent, scenario: ScenarioSpec, seed: int) -> bytes:
    header = {"scenario": scenario.name, "seed": seed, "state": agent.state_header()}
    return checkpoint.dumps(header, agent.state_arrays())


def restore_agent(agent, data: bytes, expect_scenario: str | None = None) -> dict:
    header, arrays = checkpoint.loads(data)
    if expect_scenario is not None and header.get("scenario") != expect_scenario:
        raise CheckpointError(f"checkpoint comes from scenario {header.get('scenario')!r}, "
                              f"expected {expect_scenario!r}")
    agent.load_state(header["state"], arrays)
    return header


def param_fingerprint(agent) -> str:
    """Hash of everything evaluation must not change."""
    return checkpoint.sha256(checkpoint.dumps({}, agent.state_arrays()))


# ----- evaluation ---------------------------------------------------------
def evaluate(agent, scenario: ScenarioSpec, seed: int, stats=None,
             temperature: float | None = None) -> np.ndarray:
    """Rewards of 8 frozen-agent sequences of 640 steps, one per starting corner."""
    envs = []
    for i, corner in enumerate(CORNER_INDICES):
        env = scenario.make_env(seed, EVAL_STREAM, i, start=corner)
        if env.thermal is not None and temperature is not None:
            env.thermal.T = temperature
        envs.append(env)
    raw = np.zeros((EVAL_SEQUENCES, EVAL_STEPS))
    if isinstance(agent, AifAgent):
        choice = agent.act()
        for b in range(EVAL_STEPS // BATCH):
            for i, env in enumerate(envs):
                if b > 0:
                    env.configure(choice)
                raw[i, b * BATCH:(b + 1) * BATCH] = env.sample(BATCH)[1]
        return raw
    stats = stats if stats is not None else scenario.stats()
    for t in range(EVAL_STEPS):
        obs = np.empty((EVAL_SEQUENCES, 24))
        for i, env in enumerate(envs):
            batch, r = env.sample(1)
            raw[i, t] = r[0]
            obs[i] = featurize_batch(batch, env.config, stats)[0]
        for env, a in zip(envs, agent.act_batch(obs)):
            env.configure(int(a))
    return raw


# ----- training -----------------------------------------------------------
def _measure(meter, usage: np.ndarray, b: int):
    # preallocated so that logging itself does not grow the heap during the run
    cpu_ms, rss = meter.measure()
    usage[b] = (cpu_ms, np.nan if rss is None else rss)


def _usage_rows(usage: np.ndarray) -> list[tuple]:
    return [(b, float(c), None if np.isnan(r) else int(r)) for b, (c, r) in enumerate(usage)]


def _train_aif(agent: AifAgent, scenario, env, seed, log_: RunLog, meter, on_eval):
    n_batches = scenario.budget // BATCH
    per_eval = scenario.cadence // BATCH
    rewards = np.zeros(scenario.budget)
    gates = np.zeros((n_batches, 3))
    usage = np.full((n_batches, 2), np.nan)
    action = agent.select_action()
    for b in range(n_batches):
        env.configure(action)
        batch, r = env.sample(BATCH)
        rewards[b * BATCH:(b + 1) * BATCH] = r
        action = agent.observe(batch, action)
        gates[b] = (agent.last_surprise, *agent.last_gate)
        _measure(meter, usage, b)
        if (b + 1) % per_eval == 0:
            on_eval(env)
            meter.reset()
    log_.gate_trace = [(b, float(s), bool(p), bool(g)) for b, (s, p, g) in enumerate(gates)]
    log_.resources = _usage_rows(usage)
    return rewards


def _train_rl(agent, scenario, env, seed, log_: RunLog, meter, on_eval, stats):
    rewards = np.zeros(scenario.budget)
    usage = np.full((scenario.budget // BATCH, 2), np.nan)
    batch, _ = env.sample(1)
    obs = featurize_batch(batch, env.config, stats)[0]
    for t in range(scenario.budget):
        action = agent.act(obs, explore=True)
        env.configure(action)
        batch, r = env.sample(1)
        next_obs = featurize_batch(batch, env.config, stats)[0]
        agent.step(obs, action, float(r[0]), next_obs)
        rewards[t] = r[0]
        obs = next_obs
        if (t + 1) % BATCH == 0:
            _measure(meter, usage, (t + 1) // BATCH - 1)
        if (t + 1) % scenario.cadence == 0:
            on_eval(env)
            meter.reset()
    log_.resources = _usage_rows(usage)
    return rewards


def train(agent_name: str, scenario: ScenarioSpec, seed: int, pretrained: bytes | None = None,
          aif_params: AifParams | None = None, with_oracle: bool = True,
          keep_raw: bool = True) -> tuple[RunLog, object]:
    """Run one (agent, scenario, seed) to its budget; returns the RunLog and the final agent."""
    agent = make_agent(agent_name, scenario, seed, aif_params)
    pre_sha = ""
    if scenario.pretrained is not None:
        if pretrained is None:
            raise CheckpointError(f"scenario {scenario.name!r} needs the final checkpoint of "
                                  f"{scenario.pretrained!r} for agent {agent_name!r}")
        restore_agent(agent, pretrained, expect_scenario=scenario.pretrained)
        pre_sha = checkpoint.sha256(pretrained)
    elif pretrained is not None:
        restore_agent(agent, pretrained)
        pre_sha = checkpoint.sha256(pretrained)
    if isinstance(agent, AifAgent):
        agent.slos = scenario.slos

    log_ = RunLog(scenario=scenario.name, agent=agent_name, seed=seed,
                  budget=scenario.budget, cadence=scenario.cadence, pretrained_sha256=pre_sha)
    env = scenario.make_env(seed, TRAIN_STREAM)
    # shared environment setup, done for every agent so resource baselines match
    stats = scenario.stats()
    mus, sigmas, raws = [], [], []

    def on_eval(train_env):
        temperature = None if train_env.thermal is None else train_env.thermal.T
        raw = evaluate(agent, scenario, seed, stats, temperature)
        mu, sigma = aggregate(raw, BATCH)
        mus.append(mu)
        sigmas.append(sigma)
        if keep_raw:
            raws.append(raw)

    meter = ResourceMeter()
    if isinstance(agent, AifAgent):
        rewards = _train_aif(agent, scenario, env, seed, log_, meter, on_eval)
    else:
        rewards = _train_rl(agent, scenario, env, seed, log_, meter, on_eval, stats)

    log_.train_rewards = rewards
    log_.eval_mu = np.array(mus)
    log_.eval_sigma = np.array(sigmas)
    log_.eval_raw = np.array(raws) if keep_raw else None
    log_.checkpoint = agent_checkpoint(agent, scenario, seed)
    log_.checkpoint_sha256 = checkpoint.sha256(log_.checkpoint)
    if with_oracle:
        o = oracle_best(scenario)
        log_.oracle = {"value": o.value, "stderr": o.stderr, "config": str(o.config),
                       "index": o.index}
    return log_, agent
