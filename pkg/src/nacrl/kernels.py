"""Hot numeric kernels with optional numba JIT.

Every kernel has a pure-numpy implementation (the ``*_np`` name). When numba
is importable and the ``NACRL_NUMBA`` environment variable is not ``"0"``,
the batch MLP and row-wise soft-value kernels are JIT compiled; otherwise the
numpy versions are used directly. ``benchmarks/bench_kernels.py`` compares
the two paths.
"""

import os

import numpy as np

NUMBA_ENABLED = False
if os.environ.get("NACRL_NUMBA", "1") != "0":
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def mlp_forward_np(x, w1, b1, w2, b2, w3, b3):
    """Batched forward pass of the two-hidden-layer ReLU net.

    x is (n, in); returns (q, z1, a1, z2, a2) with q of shape (n, out).
    The intermediate activations are kept for the backward pass.
    """
    z1 = np.dot(x, w1) + b1
    a1 = np.maximum(z1, 0.0)
    z2 = np.dot(a1, w2) + b2
    a2 = np.maximum(z2, 0.0)
    q = np.dot(a2, w3) + b3
    return q, z1, a1, z2, a2


def mlp_backward_np(x, w2, w3, z1, a1, z2, a2, upstream):
    """Parameter gradients of sum_ij upstream[i,j] * q[i,j].

    Gradients are summed over the batch (callers divide by n for means).
    """
    dw3 = np.dot(a2.T, upstream)
    db3 = upstream.sum(axis=0)
    da2 = np.dot(upstream, w3.T)
    dz2 = np.where(z2 > 0.0, da2, 0.0)
    dw2 = np.dot(a1.T, dz2)
    db2 = dz2.sum(axis=0)
    da1 = np.dot(dz2, w2.T)
    dz1 = np.where(z1 > 0.0, da1, 0.0)
    dw1 = np.dot(x.T, dz1)
    db1 = dz1.sum(axis=0)
    return dw1, db1, dw2, db2, dw3, db3


def logsumexp_rows_np(q, alpha):
    """alpha * log sum_a exp(q[i,a] / alpha) per row, max-subtracted."""
    m = q.max(axis=1)
    s = np.exp((q - m[:, None]) / alpha).sum(axis=1)
    return m + alpha * np.log(s)


def softmax_rows_np(q, alpha):
    """Row-wise Boltzmann distribution exp((q - v)/alpha), normalized."""
    m = q.max(axis=1)
    e = np.exp((q - m[:, None]) / alpha)
    return e / e.sum(axis=1)[:, None]


def entropy_rows_np(p):
    """Row-wise -sum p ln p with the 0 ln 0 = 0 convention."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -t.sum(axis=1)


def _logsumexp_rows_loop(q, alpha):
    n, m = q.shape
    out = np.empty(n)
    for i in range(n):
        mx = q[i, 0]
        for j in range(1, m):
            if q[i, j] > mx:
                mx = q[i, j]
        s = 0.0
        for j in range(m):
            s += np.exp((q[i, j] - mx) / alpha)
        out[i] = mx + alpha * np.log(s)
    return out


def _softmax_rows_loop(q, alpha):
    n, m = q.shape
    out = np.empty((n, m))
    for i in range(n):
        mx = q[i, 0]
        for j in range(1, m):
            if q[i, j] > mx:
                mx = q[i, j]
        s = 0.0
        for j in range(m):
            out[i, j] = np.exp((q[i, j] - mx) / alpha)
            s += out[i, j]
        for j in range(m):
            out[i, j] /= s
    return out


def _entropy_rows_loop(p):
    n, m = p.shape
    out = np.empty(n)
    for i in range(n):
        h = 0.0
        for j in range(m):
            if p[i, j] > 0.0:
                h -= p[i, j] * np.log(p[i, j])
        out[i] = h
    return out


if NUMBA_ENABLED:
    mlp_forward = _njit(cache=True)(mlp_forward_np)
    mlp_backward = _njit(cache=True)(mlp_backward_np)
    logsumexp_rows = _njit(cache=True)(_logsumexp_rows_loop)
    softmax_rows = _njit(cache=True)(_softmax_rows_loop)
    entropy_rows = _njit(cache=True)(_entropy_rows_loop)
else:
    mlp_forward = mlp_forward_np
    mlp_backward = mlp_backward_np
    logsumexp_rows = logsumexp_rows_np
    softmax_rows = softmax_rows_np
    entropy_rows = entropy_rows_np
