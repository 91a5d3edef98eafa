"""Soft value function, Boltzmann policy, entropy, and bootstrap targets.

A Q-row is a 1-D float array of action values for one state; a policy row is
the induced action distribution. All agents share these definitions, and the
batched variants delegate to the kernels module.
"""

import math
from typing import NamedTuple

import numpy as np

from . import kernels


class BootstrapTargets(NamedTuple):
    q_hat: float
    v_hat: float


def _check_alpha(alpha):
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")


def soft_state_value(q, alpha):
    """alpha-scaled log-sum-exp of a Q-row, computed with max subtraction.

    Lies in [max(q), max(q) + alpha*ln(len(q))]; safe for entries up to
    about 1e6 in magnitude at any positive alpha.
    """
    _check_alpha(alpha)
    q = np.asarray(q, dtype=np.float64)
    m = float(q.max())
    s = float(np.exp((q - m) / alpha).sum())
    return m + alpha * math.log(s)


def policy_from_q(q, alpha):
    """Boltzmann policy exp((q - v)/alpha); invariant to shifting q."""
    _check_alpha(alpha)
    q = np.asarray(q, dtype=np.float64)
    e = np.exp((q - q.max()) / alpha)
    return e / e.sum()


def policy_entropy(p):
    """-sum p ln p with 0 ln 0 = 0; lies in [0, ln(len(p))]."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def bootstrap_targets(t, v_next_target, pi_a, alpha, gamma):
    """One-step soft targets for a sampled transition.

    t needs .reward and .done. q_hat bootstraps the next state's soft value
    from the target network (dropped when the transition is terminal). v_hat
    is the single-sample estimate of the entropy-augmented state target,
    q_hat - alpha*ln pi_a, where pi_a is the sampled action's probability
    under the target policy.
    """
    _check_alpha(alpha)
    if not pi_a > 0.0:
        raise ValueError(f"pi_a must be positive, got {pi_a}")
    q_hat = t.reward if t.done else t.reward + gamma * v_next_target
    v_hat = q_hat - alpha * math.log(pi_a)
    return BootstrapTargets(q_hat=q_hat, v_hat=v_hat)


def soft_values_batch(q_rows, alpha):
    _check_alpha(alpha)
    return kernels.logsumexp_rows(np.ascontiguousarray(q_rows), alpha)


def policies_batch(q_rows, alpha):
    _check_alpha(alpha)
    return kernels.softmax_rows(np.ascontiguousarray(q_rows), alpha)


def entropies_batch(p_rows):
    return kernels.entropy_rows(np.ascontiguousarray(p_rows))
