"""Per-minibatch parameter gradients for every agent, plus action selection.

All gradients are descent directions: callers apply params -= lr * grad.
Bootstrap values (the hat quantities) always come from the target snapshot,
including the sampled action's probability inside the state target, so the
normalization term survives between sync points. PCL-R is the one variant
that bootstraps from the live network instead.
"""

from dataclasses import dataclass

import numpy as np

from .replay import DEMO
from .softmath import entropies_batch, policies_batch, policy_from_q, soft_values_batch

AGENT_KINDS = ("nac", "nac-is", "soft-q", "hard-q", "dqfd", "bc", "pcl", "pcl-r")

SOFT_EXPLORERS = {"nac", "nac-is", "soft-q", "pcl", "pcl-r"}
EPS_EXPLORERS = {"hard-q", "dqfd", "bc"}


@dataclass(frozen=True)
class LossGradient:
    grad: np.ndarray
    bellman_error: float
    entropy: float
    importance_weight: float = 1.0


def _unpack(batch, model):
    recs = batch.records
    if model.kind == "tabular":
        obs = np.array([r.obs for r in recs], dtype=np.intp)
        nxt = np.array([r.next_obs for r in recs], dtype=np.intp)
    else:
        obs = np.stack([np.asarray(r.obs, dtype=np.float64) for r in recs])
        nxt = np.stack([np.asarray(r.next_obs, dtype=np.float64) for r in recs])
    actions = np.array([r.action for r in recs], dtype=np.intp)
    rewards = np.array([r.reward for r in recs])
    cont = np.array([0.0 if r.done else 1.0 for r in recs])
    return obs, actions, rewards, cont, nxt


def _one_hot(actions, n):
    out = np.zeros((actions.shape[0], n))
    out[np.arange(actions.shape[0]), actions] = 1.0
    return out


def nac_upstreams(q_rows, actions, q_hat, v_hat, alpha):
    """Actor and critic dL/dQ rows for the normalized actor-critic update.

    The actor row is (one_hot - pi) * (Q(s,a) - q_hat): it moves the sampled
    action's value toward its target while shifting every other action the
    opposite way, in proportion to its policy probability, so the row's total
    is conserved. The critic row is pi * (V - v_hat).
    """
    n = q_rows.shape[0]
    pi = policies_batch(q_rows, alpha)
    v = soft_values_batch(q_rows, alpha)
    qa = q_rows[np.arange(n), actions]
    actor = (_one_hot(actions, q_rows.shape[1]) - pi) * (qa - q_hat)[:, None]
    critic = pi * (v - v_hat)[:, None]
    return actor, critic, qa, pi


def _targets(target, obs, nxt, actions, rewards, cont, hp):
    v_next = soft_values_batch(target.q_rows(nxt), hp.alpha)
    q_hat = rewards + hp.gamma * cont * v_next
    # alpha*ln pi_t(a|s) evaluated in log space: exponentiating first would
    # underflow to 0 once Q gaps exceed ~40*alpha
    q_tgt = target.q_rows(obs)
    v_tgt = soft_values_batch(q_tgt, hp.alpha)
    log_pi_a = (q_tgt[np.arange(len(actions)), actions] - v_tgt) / hp.alpha
    v_hat = q_hat - hp.alpha * log_pi_a
    return q_hat, v_hat


def nac_gradient(model, target, batch, hp):
    obs, actions, rewards, cont, nxt = _unpack(batch, model)
    q_hat, v_hat = _targets(target, obs, nxt, actions, rewards, cont, hp)
    q_rows = model.q_rows(obs)
    actor, critic, qa, pi = nac_upstreams(q_rows, actions, q_hat, v_hat, hp.alpha)
    upstream = (actor + critic) / len(batch)
    grad = model.q_backward_batch(obs, upstream)
    return LossGradient(
        grad=grad,
        bellman_error=float(((qa - q_hat) ** 2).mean()),
        entropy=float(entropies_batch(pi).mean()),
    )


def nac_is_gradient(model, target, batch, hp):
    mu = np.array([r.behavior_prob for r in batch.records], dtype=np.float64)
    if (mu <= 0.0).any() or not np.isfinite(mu).all():
        raise ValueError("importance sampling requires positive behavior probabilities")
    obs, actions, rewards, cont, nxt = _unpack(batch, model)
    q_hat, v_hat = _targets(target, obs, nxt, actions, rewards, cont, hp)
    q_rows = model.q_rows(obs)
    actor, critic, qa, pi = nac_upstreams(q_rows, actions, q_hat, v_hat, hp.alpha)
    beta = np.minimum(pi[np.arange(len(batch)), actions] / mu, hp.c)
    upstream = (actor + critic) * beta[:, None] / len(batch)
    grad = model.q_backward_batch(obs, upstream)
    return LossGradient(
        grad=grad,
        bellman_error=float(((qa - q_hat) ** 2).mean()),
        entropy=float(entropies_batch(pi).mean()),
        importance_weight=float(beta.mean()),
    )


def soft_q_gradient(model, target, batch, hp):
    obs, actions, rewards, cont, nxt = _unpack(batch, model)
    v_next = soft_values_batch(target.q_rows(nxt), hp.alpha)
    q_hat = rewards + hp.gamma * cont * v_next
    q_rows = model.q_rows(obs)
    qa = q_rows[np.arange(len(batch)), actions]
    upstream = _one_hot(actions, q_rows.shape[1]) * (qa - q_hat)[:, None] / len(batch)
    grad = model.q_backward_batch(obs, upstream)
    pi = policies_batch(q_rows, hp.alpha)
    return LossGradient(
        grad=grad,
        bellman_error=float(((qa - q_hat) ** 2).mean()),
        entropy=float(entropies_batch(pi).mean()),
    )


def hard_q_gradient(model, target, batch, hp):
    obs, actions, rewards, cont, nxt = _unpack(batch, model)
    y = rewards + hp.gamma * cont * target.q_rows(nxt).max(axis=1)
    q_rows = model.q_rows(obs)
    qa = q_rows[np.arange(len(batch)), actions]
    upstream = _one_hot(actions, q_rows.shape[1]) * (qa - y)[:, None] / len(batch)
    grad = model.q_backward_batch(obs, upstream)
    pi = policies_batch(q_rows, hp.alpha)
    return LossGradient(
        grad=grad,
        bellman_error=float(((qa - y) ** 2).mean()),
        entropy=float(entropies_batch(pi).mean()),
    )


def hinge_values(q_rows, demo_actions, margin):
    """Large-margin loss values and the maximizing actions per row."""
    n = q_rows.shape[0]
    aug = q_rows + margin * (1.0 - _one_hot(demo_actions, q_rows.shape[1]))
    a_star = np.argmax(aug, axis=1)
    losses = aug[np.arange(n), a_star] - q_rows[np.arange(n), demo_actions]
    return losses, a_star


def dqfd_gradient(model, target, batch, hp):
    obs, actions, rewards, cont, nxt = _unpack(batch, model)
    n, n_act = len(batch), model.n_actions
    y = rewards + hp.gamma * cont * target.q_rows(nxt).max(axis=1)
    q_rows = model.q_rows(obs)
    qa = q_rows[np.arange(n), actions]
    upstream = _one_hot(actions, n_act) * (qa - y)[:, None]

    demo_mask = np.array([s == DEMO for s in batch.sources])
    if demo_mask.any():
        _, a_star = hinge_values(q_rows, actions, hp.margin)
        rows = np.arange(n)[demo_mask]
        hinge_up = np.zeros_like(upstream)
        hinge_up[rows, a_star[demo_mask]] += 1.0
        hinge_up[rows, actions[demo_mask]] -= 1.0
        upstream = upstream + hp.lambda_hinge * hinge_up

    grad = model.q_backward_batch(obs, upstream / n)
    grad = grad + hp.lambda_wd * model.get_params()
    pi = policies_batch(q_rows, hp.alpha)
    return LossGradient(
        grad=grad,
        bellman_error=float(((qa - y) ** 2).mean()),
        entropy=float(entropies_batch(pi).mean()),
    )


def bc_gradient(model, batch, hp):
    obs, actions, _, _, _ = _unpack(batch, model)
    q_rows = model.q_rows(obs)
    p = policies_batch(q_rows, 1.0)  # logits at temperature 1
    n = len(batch)
    upstream = (p - _one_hot(actions, q_rows.shape[1])) / n
    grad = model.q_backward_batch(obs, upstream)
    nll = -np.log(p[np.arange(n), actions])
    return LossGradient(
        grad=grad,
        bellman_error=float(nll.mean()),  # cross-entropy stands in here
        entropy=float(entropies_batch(p).mean()),
    )


def path_consistency_residual(model, target, path, hp, use_target):
    """C for one sub-trajectory and the (obs, upstream-row) contributions."""
    alpha, gamma = hp.alpha, hp.gamma
    contribs = []
    s0 = path[0].obs
    q0 = model.q_forward(s0)
    pi0 = policy_from_q(q0, alpha)
    v0 = float(soft_values_batch(q0[None, :], alpha)[0])
    c = -v0
    contribs.append((s0, -pi0.copy()))
    for i, rec in enumerate(path):
        qi = model.q_forward(rec.obs)
        pii = policy_from_q(qi, alpha)
        log_pi = (qi[rec.action] - float(soft_values_batch(qi[None, :], alpha)[0])) / alpha
        c += gamma ** i * (rec.reward - alpha * log_pi)
        row = np.zeros_like(qi)
        row[rec.action] = 1.0
        contribs.append((rec.obs, -(row - pii) * gamma ** i))
    last = path[-1]
    if not last.done:
        boot = target if use_target else model
        qj = boot.q_forward(last.next_obs)
        vj = float(soft_values_batch(qj[None, :], alpha)[0])
        c += gamma ** len(path) * vj
        if not use_target:
            pij = policy_from_q(qj, alpha)
            contribs.append((last.next_obs, gamma ** len(path) * pij))
    return c, contribs


def pcl_gradient(model, target, batch_paths, hp, use_target=True):
    if not batch_paths:
        raise ValueError("empty path batch")
    depth = hp.pcl_rollout
    for path in batch_paths:
        if len(path) > depth or (len(path) < depth and not path[-1].done):
            raise ValueError("paths must have the rollout length unless cut by a terminal")
    n = len(batch_paths)
    all_obs, all_up = [], []
    sq = 0.0
    for path in batch_paths:
        c, contribs = path_consistency_residual(model, target, path, hp, use_target)
        sq += 0.5 * c * c
        for obs, row in contribs:
            all_obs.append(obs)
            all_up.append(row * c / n)
    if model.kind == "tabular":
        obs_batch = np.array(all_obs, dtype=np.intp)
        starts = np.array([p[0].obs for p in batch_paths], dtype=np.intp)
    else:
        obs_batch = np.stack([np.asarray(o, dtype=np.float64) for o in all_obs])
        starts = np.stack([np.asarray(p[0].obs, dtype=np.float64) for p in batch_paths])
    grad = model.q_backward_batch(obs_batch, np.stack(all_up))
    ent = entropies_batch(policies_batch(model.q_rows(starts), hp.alpha))
    return LossGradient(
        grad=grad,
        bellman_error=float(sq / n),  # mean half-squared consistency residual
        entropy=float(ent.mean()),
    )


GRADIENT_FNS = {
    "nac": nac_gradient,
    "nac-is": nac_is_gradient,
    "soft-q": soft_q_gradient,
    "hard-q": hard_q_gradient,
    "dqfd": dqfd_gradient,
}


def batch_gradient(algo, model, target, batch, hp):
    """Dispatch a flat-batch gradient; PCL variants take paths instead."""
    if algo == "bc":
        return bc_gradient(model, batch, hp)
    if algo in ("pcl", "pcl-r"):
        raise ValueError("pcl gradients need path batches; use pcl_gradient")
    return GRADIENT_FNS[algo](model, target, batch, hp)


# --------------------------------------------------------- action selection

def select_action(model, obs, mode, alpha, rng, epsilon=0.01):
    """Pick an action: 'sample-soft', 'greedy', or 'eps-greedy'."""
    q = model.q_forward(obs)
    if mode == "sample-soft":
        p = policy_from_q(q, alpha)
        return int(rng.choice(len(p), p=p))
    if mode == "greedy":
        return int(np.argmax(q))
    if mode == "eps-greedy":
        if rng.random() < epsilon:
            return int(rng.integers(len(q)))
        return int(np.argmax(q))
    raise ValueError(f"unknown selection mode {mode!r}")


def action_distribution(q_row, mode, alpha, epsilon=0.01):
    """Probability of each action under a selection mode (for behavior_prob)."""
    n = len(q_row)
    if mode == "sample-soft":
        return policy_from_q(q_row, alpha)
    greedy = np.zeros(n)
    greedy[int(np.argmax(q_row))] = 1.0
    if mode == "greedy":
        return greedy
    if mode == "eps-greedy":
        return (1.0 - epsilon) * greedy + epsilon / n
    raise ValueError(f"unknown selection mode {mode!r}")


def exploration_mode(algo):
    return "sample-soft" if algo in SOFT_EXPLORERS else "eps-greedy"
