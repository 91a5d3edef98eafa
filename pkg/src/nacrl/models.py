"""Q-function representations: tabular table and a small ReLU perceptron.

Both expose the same surface: forward Q-rows, exact parameter gradients for
a weighted sum of outputs, flat parameter get/set, frozen target snapshots,
and a binary checkpoint format. A central-difference gradient oracle lives
here too so callers can verify any scalar loss against backprop.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels

CHECKPOINT_MAGIC = b"NACQ1"


class NumericError(RuntimeError):
    """Raised when a gradient or parameter update is not finite."""


class TabularQ:
    """Dense |S| x |A| table of action values, zero initialized."""

    kind = "tabular"

    def __init__(self, n_states, n_actions):
        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        self.table = np.zeros((self.n_states, self.n_actions))

    @property
    def param_count(self):
        return self.table.size

    def get_params(self):
        return self.table.ravel().copy()

    def set_params(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.param_count,):
            raise ValueError(f"parameter vector length {vec.shape} != {self.param_count}")
        self.table = vec.reshape(self.n_states, self.n_actions).copy()

    def _state_index(self, obs):
        s = int(obs)
        if not 0 <= s < self.n_states:
            raise ValueError(f"state index {s} out of range [0, {self.n_states})")
        return s

    def q_forward(self, obs):
        return self.table[self._state_index(obs)].copy()

    def q_rows(self, obs_batch):
        idx = np.asarray(obs_batch, dtype=np.intp)
        if idx.ndim != 1 or (idx < 0).any() or (idx >= self.n_states).any():
            raise ValueError("bad state index batch")
        return self.table[idx]

    def q_backward(self, obs, upstream):
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != (self.n_actions,):
            raise ValueError(f"upstream shape {upstream.shape} != ({self.n_actions},)")
        grad = np.zeros_like(self.table)
        grad[self._state_index(obs)] = upstream
        return grad.ravel()

    def q_backward_batch(self, obs_batch, upstream_batch):
        idx = np.asarray(obs_batch, dtype=np.intp)
        up = np.asarray(upstream_batch, dtype=np.float64)
        if up.shape != (idx.shape[0], self.n_actions):
            raise ValueError("upstream batch shape mismatch")
        grad = np.zeros_like(self.table)
        np.add.at(grad, idx, up)
        return grad.ravel()

    def header(self):
        return {"kind": "tabular", "n_states": self.n_states, "n_actions": self.n_actions}


class MlpQ:
    """Two-hidden-layer ReLU perceptron mapping feature vectors to Q-rows.

    Weights are fan-in-scaled uniform, biases zero, drawn from a seeded
    generator so initialization is reproducible.
    """

    kind = "mlp"

    def __init__(self, input_dim, n_actions, hidden=(64, 64), frame_stack=4, seed=0):
        if len(hidden) != 2:
            raise ValueError("MlpQ uses exactly two hidden layers")
        self.input_dim = int(input_dim)
        self.n_actions = int(n_actions)
        self.hidden = (int(hidden[0]), int(hidden[1]))
        self.frame_stack = int(frame_stack)
        rng = np.random.default_rng(seed)
        h1, h2 = self.hidden
        self.w1 = self._fan_in_uniform(rng, self.input_dim, h1)
        self.b1 = np.zeros(h1)
        self.w2 = self._fan_in_uniform(rng, h1, h2)
        self.b2 = np.zeros(h2)
        self.w3 = self._fan_in_uniform(rng, h2, self.n_actions)
        self.b3 = np.zeros(self.n_actions)

    @staticmethod
    def _fan_in_uniform(rng, fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    def _layers(self):
        return [(self.w1, self.b1), (self.w2, self.b2), (self.w3, self.b3)]

    @property
    def param_count(self):
        return sum(w.size + b.size for w, b in self._layers())

    def get_params(self):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in self._layers()])

    def set_params(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.param_count,):
            raise ValueError(f"parameter vector length {vec.shape} != {self.param_count}")
        pos = 0
        out = []
        for w, b in self._layers():
            nw = w.size
            out.append(vec[pos:pos + nw].reshape(w.shape).copy())
            pos += nw
            out.append(vec[pos:pos + b.size].copy())
            pos += b.size
        self.w1, self.b1, self.w2, self.b2, self.w3, self.b3 = out

    def _check_obs(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim == 1:
            if x.shape != (self.input_dim,):
                raise ValueError(f"observation shape {x.shape} != ({self.input_dim},)")
            return x[None, :]
        if x.ndim == 2 and x.shape[1] == self.input_dim:
            return x
        raise ValueError(f"observation batch shape {x.shape} incompatible with input {self.input_dim}")

    def q_forward(self, obs):
        q, *_ = kernels.mlp_forward(self._check_obs(obs), self.w1, self.b1,
                                    self.w2, self.b2, self.w3, self.b3)
        return q[0].copy()

    def q_rows(self, obs_batch):
        q, *_ = kernels.mlp_forward(self._check_obs(obs_batch), self.w1, self.b1,
                                    self.w2, self.b2, self.w3, self.b3)
        return q

    def q_backward(self, obs, upstream):
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != (self.n_actions,):
            raise ValueError(f"upstream shape {upstream.shape} != ({self.n_actions},)")
        return self.q_backward_batch(self._check_obs(obs), upstream[None, :])

    def q_backward_batch(self, obs_batch, upstream_batch):
        x = self._check_obs(obs_batch)
        up = np.ascontiguousarray(upstream_batch, dtype=np.float64)
        if up.shape != (x.shape[0], self.n_actions):
            raise ValueError("upstream batch shape mismatch")
        _, z1, a1, z2, a2 = kernels.mlp_forward(x, self.w1, self.b1,
                                                self.w2, self.b2, self.w3, self.b3)
        grads = kernels.mlp_backward(x, self.w2, self.w3, z1, a1, z2, a2, up)
        return np.concatenate([g.ravel() for g in grads])

    def header(self):
        return {
            "kind": "mlp",
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "n_actions": self.n_actions,
            "frame_stack": self.frame_stack,
        }


@dataclass(frozen=True)
class TargetSnapshot:
    """Frozen parameter copy taken at a sync point; forwards like a model."""

    model: object
    step: int

    def q_forward(self, obs):
        return self.model.q_forward(obs)

    def q_rows(self, obs_batch):
        return self.model.q_rows(obs_batch)

    @property
    def n_actions(self):
        return self.model.n_actions

    def get_params(self):
        return self.model.get_params()


def clone_model(model):
    frozen = object.__new__(type(model))
    frozen.__dict__.update(model.__dict__)
    if model.kind == "tabular":
        frozen.table = model.table.copy()
        frozen.table.setflags(write=False)
    else:
        for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
            arr = getattr(model, name).copy()
            arr.setflags(write=False)
            setattr(frozen, name, arr)
    return frozen


def sync_target(model, step=0):
    """Snapshot the model's parameters; later updates leave it untouched."""
    return TargetSnapshot(model=clone_model(model), step=int(step))


def apply_update(model, grad, lr, clip_norm, clip_mode="global"):
    """Gradient-descent step with clipping; raises on non-finite gradients."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != (model.param_count,):
        raise ValueError(f"gradient length {grad.shape} != {model.param_count}")
    if not np.isfinite(grad).all():
        raise NumericError("non-finite gradient; update skipped")
    if clip_mode == "global":
        norm = float(np.linalg.norm(grad))
        if norm > clip_norm:
            grad = grad * (clip_norm / norm)
    elif clip_mode == "element":
        grad = np.clip(grad, -clip_norm, clip_norm)
    else:
        raise ValueError(f"unknown clip_mode {clip_mode!r}")
    model.set_params(model.get_params() - lr * grad)


def finite_diff_gradient(model, loss_fn, eps=1e-5):
    """Central-difference gradient of loss_fn(model) over all parameters.

    Restores the model's parameters bitwise before returning.
    """
    base = model.get_params()
    grad = np.empty_like(base)
    work = base.copy()
    for i in range(base.size):
        work[i] = base[i] + eps
        model.set_params(work)
        up = loss_fn(model)
        work[i] = base[i] - eps
        model.set_params(work)
        down = loss_fn(model)
        grad[i] = (up - down) / (2.0 * eps)
        work[i] = base[i]
    model.set_params(base)
    return grad


def save_checkpoint(model, path, step=0):
    header = model.header()
    header["step"] = int(step)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC + b"\n")
        f.write(json.dumps(header).encode() + b"\n")
        f.write(model.get_params().astype("<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        header = json.loads(f.readline().decode())
        raw = f.read()
    params = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if header["kind"] == "tabular":
        model = TabularQ(header["n_states"], header["n_actions"])
    elif header["kind"] == "mlp":
        model = MlpQ(header["input_dim"], header["n_actions"],
                     hidden=header["hidden"], frame_stack=header.get("frame_stack", 4))
    else:
        raise ValueError(f"unknown model kind {header['kind']!r}")
    model.set_params(params)
    return model, header
