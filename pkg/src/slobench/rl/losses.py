"""Losses of the three RL agents with gradients with respect to network outputs."""
from __future__ import annotations

import numpy as np

from slobench.errors import ContractViolation

ADV_EPS = 1e-8


def huber(x, delta: float = 1.0):
    """Elementwise Huber value and derivative."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) <= delta
    value = np.where(small, 0.5 * x * x, delta * (np.abs(x) - 0.5 * delta))
    deriv = np.where(small, x, delta * np.sign(x))
    return value, deriv


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def entropy(logits: np.ndarray) -> np.ndarray:
    logp = log_softmax(logits)
    return -(np.exp(logp) * logp).sum(axis=-1)


def normalize(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + ADV_EPS)


def dqn_targets(rewards, next_q_target, gamma: float) -> np.ndarray:
    """r + gamma * max_a' Q_target(s', a'); the task never terminates."""
    return np.asarray(rewards, dtype=float) + gamma * next_q_target.max(axis=1)


def dqn_loss(q: np.ndarray, actions, targets):
    """Mean Huber loss on the taken actions; returns (loss, dL/dq)."""
    n = len(q)
    actions = np.asarray(actions)
    td = q[np.arange(n), actions] - targets
    value, deriv = huber(td)
    dq = np.zeros_like(q)
    dq[np.arange(n), actions] = deriv / n
    return float(value.mean()), dq


def _policy_terms(logits, actions):
    n = len(logits)
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    onehot = np.zeros_like(logits)
    onehot[np.arange(n), actions] = 1.0
    logp = logp_all[np.arange(n), actions]
    ent = -(probs * logp_all).sum(axis=1)
    d_logp = onehot - probs                             # d logp(a) / d logits
    d_ent = -probs * (logp_all + ent[:, None])          # d H / d logits
    return logp, ent, d_logp, d_ent


def a2c_loss(logits, values, actions, advantages, returns, vf_coef: float, ent_coef: float):
    """Policy gradient + vf_coef * MSE - ent_coef * entropy.

    ``advantages`` are used as given (normalise before calling). Returns
    (loss, dL/dlogits, dL/dvalues, parts).
    """
    n = len(logits)
    actions = np.asarray(actions)
    logp, ent, d_logp, d_ent = _policy_terms(logits, actions)
    pg = -np.mean(advantages * logp)
    err = returns - values
    vl = np.mean(err * err)
    loss = pg + vf_coef * vl - ent_coef * ent.mean()
    d_logits = (-(advantages[:, None] * d_logp) - ent_coef * d_ent) / n
    d_values = vf_coef * (-2.0 * err) / n
    return float(loss), d_logits, d_values, {"policy": pg, "value": vl, "entropy": float(ent.mean())}


def ppo_loss(logits, values, actions, old_logp, advantages, returns, clip: float,
             vf_coef: float, ent_coef: float):
    """Clipped surrogate + vf_coef * MSE - ent_coef * entropy.

    Returns (loss, dL/dlogits, dL/dvalues, parts). Where the clipped branch
    is the minimum the surrogate has zero gradient.
    """
    n = len(logits)
    actions = np.asarray(actions)
    logp, ent, d_logp, d_ent = _policy_terms(logits, actions)
    ratio = np.exp(logp - old_logp)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages
    pg = -np.mean(np.minimum(surr1, surr2))
    d_ratio = np.where(surr1 <= surr2, advantages, 0.0)
    err = returns - values
    vl = np.mean(err * err)
    loss = pg + vf_coef * vl - ent_coef * ent.mean()
    d_logits = (-(d_ratio * ratio)[:, None] * d_logp - ent_coef * d_ent) / n
    d_values = vf_coef * (-2.0 * err) / n
    kl = float(np.mean(old_logp - logp))
    return float(loss), d_logits, d_values, {"policy": pg, "value": vl,
                                             "entropy": float(ent.mean()), "approx_kl": kl}


def gae(rewards, values, bootstrap: float, gamma: float, lam: float):
    """Generalized advantage estimates and returns for a continuing rollout."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.shape != values.shape or rewards.ndim != 1 or len(rewards) < 1:
        raise ContractViolation(f"rewards {rewards.shape} and values {values.shape} must be "
                                "equal-length non-empty vectors")
    adv = np.zeros_like(rewards)
    next_value, last = bootstrap, 0.0
    for t in range(len(rewards) - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        last = delta + gamma * lam * last
        adv[t] = last
        next_value = values[t]
    return adv, adv + values
