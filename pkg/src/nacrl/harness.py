"""Training loop, hyperparameters, evaluation, metrics, and run manifests.

The loop follows the two-phase schedule: the first k steps sample minibatches
from the demonstration corpus, later steps take one environment action per
step (stored into the replay buffer) and sample from the buffer. One gradient
application happens per step; the target network is re-synced every T steps;
the learning rate anneals linearly over the first anneal_fraction of the run
and stays constant after.
"""

import copy
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import agents
from .demos import TransitionRecord, corpus_stats
from .envs import ConfigError
from .models import MlpQ, NumericError, TabularQ, apply_update, save_checkpoint, sync_target
from .replay import DEMO, ENV, ReplayBuffer, phase_for_step, sample, sample_paths
from .softmath import soft_values_batch


@dataclass
class HyperParams:
    alpha: float = 0.1
    gamma: float = 0.99
    k: float = 0
    T: int = 10_000
    lr_start: float = 1e-4
    lr_end: float = 5e-5
    anneal_fraction: float = 0.1
    clip_norm: float = 10.0
    clip_mode: str = "global"
    batch_size: int = 32
    c: float = 10.0
    epsilon_explore: float = 0.01
    margin: float = 0.8
    lambda_hinge: float = 1.0
    lambda_wd: float = 1e-5
    pcl_rollout: int = 1
    rho_demo: float = 0.25
    total_steps: int = 50_000
    eval_interval: int = 1_000
    eval_episodes: int = 20
    val_size: int = 4_500
    replay_capacity: int = 1_000_000
    seed: int = 0

    def validate(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.lr_end > self.lr_start:
            raise ConfigError("lr_end must not exceed lr_start")
        for name in ("T", "batch_size", "eval_interval", "eval_episodes",
                     "total_steps", "replay_capacity", "pcl_rollout"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if not (self.k >= 0):
            raise ConfigError("k must be non-negative")
        if not 0.0 <= self.rho_demo <= 1.0:
            raise ConfigError("rho_demo must lie in [0, 1]")
        return self


ENV_PROFILES = {
    "gridnav": {"gamma": 0.95, "total_steps": 50_000, "k": 10_000, "T": 500,
                "val_size": 200},
    "tracksim": {"gamma": 0.99, "total_steps": 300_000, "k": 100_000, "T": 10_000,
                 "val_size": 4_500},
}

_BOOL_STRINGS = {"true": True, "false": False, "1": True, "0": False}


def _parse_value(name, field_type, raw):
    raw = raw.strip() if isinstance(raw, str) else raw
    try:
        if name == "k":
            if isinstance(raw, str) and raw.lower() in ("inf", "infinity"):
                return math.inf
            v = float(raw)
            if v == math.inf:
                return v
            if v < 0 or v != int(v):
                raise ValueError
            return int(v)
        if field_type is int:
            return int(raw)
        if field_type is float:
            return float(raw)
        if field_type is bool:
            if isinstance(raw, bool):
                return raw
            return _BOOL_STRINGS[str(raw).lower()]
        return str(raw)
    except (ValueError, KeyError) as e:
        raise ConfigError(f"cannot parse value {raw!r} for key {name!r}") from e


def parse_config(path=None, overrides=None, env_id=None):
    """Resolve hyperparameters: defaults < env profile < file < CLI overrides."""
    fields = {f.name: f.type for f in dataclasses.fields(HyperParams)}
    types = {"k": float, "alpha": float, "gamma": float}
    resolved = dataclasses.asdict(HyperParams())
    if env_id is not None:
        if env_id not in ENV_PROFILES:
            raise ConfigError(f"unknown environment id {env_id!r}")
        resolved.update(ENV_PROFILES[env_id])

    def apply(name, raw, where):
        if name not in fields:
            raise ConfigError(f"unknown config key {name!r} ({where})")
        ftype = type(getattr(HyperParams(), name))
        resolved[name] = _parse_value(name, types.get(name, ftype), raw)

    if path is not None:
        with open(path) as f:
            for lineno, line in enumerate(f, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}: line {lineno}: expected key = value")
                key, _, value = line.partition("=")
                apply(key.strip(), value.strip(), f"{path}:{lineno}")
    for key, value in (overrides or {}).items():
        if value is not None:
            apply(key, value, "command line")
    return HyperParams(**resolved).validate()


def lr_for_step(hp, step):
    """Learning rate at zero-based step: linear anneal, then constant."""
    anneal_end = hp.anneal_fraction * hp.total_steps
    if anneal_end <= 0 or step >= anneal_end:
        return hp.lr_end
    return hp.lr_start + (hp.lr_end - hp.lr_start) * (step / anneal_end)


@dataclass
class MetricsRow:
    step: int
    phase: str
    algo: str
    seed: int
    mean_return: float
    std_return: float
    val_bellman_error: float


CSV_HEADER = "step,phase,algo,seed,mean_return,std_return,val_bellman_error"


def format_metrics_row(row):
    return (f"{row.step},{row.phase},{row.algo},{row.seed},"
            f"{row.mean_return:.6g},{row.std_return:.6g},{row.val_bellman_error:.6g}")


def write_metrics_csv(rows, path):
    with open(path, "w") as f:
        f.write(CSV_HEADER + "\n")
        for row in rows:
            f.write(format_metrics_row(row) + "\n")


def append_metrics_row(row, path):
    new = not os.path.exists(path)
    with open(path, "a") as f:
        if new:
            f.write(CSV_HEADER + "\n")
        f.write(format_metrics_row(row) + "\n")


def read_metrics_csv(path):
    rows = []
    with open(path) as f:
        header = f.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: unexpected metrics header {header!r}")
        for line in f:
            step, phase, algo, seed, mean, std, vbe = line.strip().split(",")
            rows.append(MetricsRow(int(step), phase, algo, int(seed),
                                   float(mean), float(std), float(vbe)))
    return rows


def default_model(env, seed):
    if env.env_id == "gridnav":
        return TabularQ(env.n_states, env.n_actions)
    return MlpQ(env.obs_dim, env.n_actions, hidden=(64, 64),
                frame_stack=env.frame_stack, seed=seed)


def greedy_rollout(model, env, max_steps=10_000):
    """Greedy episode; returns (undiscounted return, actions, observations)."""
    obs = env.reset()
    observations = [obs]
    actions = []
    total = 0.0
    done = False
    while not done and len(actions) < max_steps:
        action = int(np.argmax(model.q_forward(obs)))
        res = env.step(action)
        actions.append(action)
        observations.append(res.obs)
        total += res.reward
        obs = res.obs
        done = res.done
    return total, actions, observations


def evaluate_policy(model, env, episodes, seed=0):
    """Mean and population std of greedy-rollout returns."""
    if episodes < 1:
        raise ConfigError("episodes must be at least 1")
    env = copy.deepcopy(env)
    returns = []
    for _ in range(episodes):
        total, _, _ = greedy_rollout(model, env)
        returns.append(total)
    arr = np.array(returns)
    return float(arr.mean()), float(arr.std())


def validation_bellman_error(model, records, hp):
    """Mean squared one-step soft Bellman residual, model as its own target."""
    if not records:
        raise ConfigError("validation split is empty")
    if model.kind == "tabular":
        obs = np.array([r.obs for r in records], dtype=np.intp)
        nxt = np.array([r.next_obs for r in records], dtype=np.intp)
    else:
        obs = np.stack([np.asarray(r.obs, dtype=np.float64) for r in records])
        nxt = np.stack([np.asarray(r.next_obs, dtype=np.float64) for r in records])
    act = np.array([r.action for r in records])
    rew = np.array([r.reward for r in records])
    cont = np.array([0.0 if r.done else 1.0 for r in records])
    qa = model.q_rows(obs)[np.arange(len(records)), act]
    v_next = soft_values_batch(model.q_rows(nxt), hp.alpha)
    err = qa - (rew + hp.gamma * cont * v_next)
    return float((err ** 2).mean())


def corpus_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Trainer:
    """Runs the two-phase loop for one (algo, env, corpus, seed) combination."""

    def __init__(self, algo, env, corpus, hp, out_dir=None, model=None,
                 corpus_path=None):
        if algo not in agents.AGENT_KINDS:
            raise ConfigError(f"unknown algorithm {algo!r}; pick one of {agents.AGENT_KINDS}")
        hp.validate()
        if corpus is None and hp.k > 0:
            raise ConfigError("a demonstration corpus is required when k > 0")
        if corpus is not None:
            if corpus.env_id != env.env_id or corpus.n_actions != env.n_actions:
                raise ConfigError(
                    f"corpus recorded on {corpus.env_id!r} does not match env {env.env_id!r}")
        self.algo = algo
        self.env = env
        self.eval_env = copy.deepcopy(env)
        self.corpus = corpus
        self.corpus_path = corpus_path
        self.hp = hp
        self.out_dir = out_dir
        ss = np.random.SeedSequence(hp.seed)
        s_model, s_sample, s_explore = ss.spawn(3)
        self.sample_rng = np.random.default_rng(s_sample)
        self.explore_rng = np.random.default_rng(s_explore)
        self.model = model if model is not None else default_model(env, s_model)
        self.target = sync_target(self.model, step=0)
        self.buffer = ReplayBuffer(hp.replay_capacity)
        self.t = 0
        self._episode = 0
        self._ep_t = 0
        self._obs = env.reset()
        self.metrics = []
        if corpus is not None and hp.val_size > 0 and hp.val_size < len(corpus):
            self.validation = corpus_stats(corpus, hp.val_size).validation
        else:
            self.validation = []

    # ------------------------------------------------------------- loop

    def _env_step(self):
        mode = agents.exploration_mode(self.algo)
        q_row = self.model.q_forward(self._obs)
        dist = agents.action_distribution(q_row, mode, self.hp.alpha,
                                          self.hp.epsilon_explore)
        action = int(self.explore_rng.choice(len(dist), p=dist))
        res = self.env.step(action)
        self.buffer.push(TransitionRecord(
            episode=self._episode, t=self._ep_t, obs=self._obs, action=action,
            reward=res.reward, next_obs=res.obs, done=res.done,
            behavior_prob=float(dist[action]), corrupted=False))
        if res.done:
            self._episode += 1
            self._ep_t = 0
            self._obs = self.env.reset()
        else:
            self._ep_t += 1
            self._obs = res.obs

    def _batch(self, phase):
        hp = self.hp
        if phase == DEMO:
            return sample(self.corpus, hp.batch_size, self.sample_rng, DEMO)
        if self.algo == "dqfd" and self.corpus is not None:
            n_demo = int(round(hp.rho_demo * hp.batch_size))
            n_env = hp.batch_size - n_demo
            demo_part = sample(self.corpus, n_demo, self.sample_rng, DEMO) if n_demo else None
            env_part = sample(self.buffer, n_env, self.sample_rng, ENV) if n_env else None
            if demo_part is None:
                return env_part
            if env_part is None:
                return demo_part
            return type(demo_part)(records=demo_part.records + env_part.records,
                                   sources=demo_part.sources + env_part.sources)
        return sample(self.buffer, hp.batch_size, self.sample_rng, ENV)

    def _gradient(self, phase):
        hp = self.hp
        if self.algo in ("pcl", "pcl-r"):
            source = self.corpus if phase == DEMO else self.buffer
            flag = DEMO if phase == DEMO else ENV
            paths = sample_paths(source, hp.pcl_rollout, hp.batch_size,
                                 self.sample_rng, flag)
            return agents.pcl_gradient(self.model, self.target, paths, hp,
                                       use_target=self.algo == "pcl")
        batch = self._batch(phase)
        if self.algo == "bc" and phase == DEMO:
            return agents.bc_gradient(self.model, batch, hp)
        if self.algo == "bc":
            return agents.hard_q_gradient(self.model, self.target, batch, hp)
        return agents.batch_gradient(self.algo, self.model, self.target, batch, hp)

    def step(self):
        """One loop iteration: optional env interaction, one gradient update."""
        t = self.t + 1
        phase = phase_for_step(self.hp.k, t)
        if phase == ENV:
            self._env_step()
        out = self._gradient(phase)
        lr = lr_for_step(self.hp, t - 1)
        try:
            apply_update(self.model, out.grad, lr, self.hp.clip_norm, self.hp.clip_mode)
        except NumericError:
            self._dump_abort(t, out)
            raise
        if t % self.hp.T == 0:
            self.target = sync_target(self.model, step=t)
        self.t = t
        return out

    def _dump_abort(self, t, out):
        if self.out_dir:
            payload = {"step": t, "algo": self.algo,
                       "bellman_error": out.bellman_error, "entropy": out.entropy}
            with open(os.path.join(self.out_dir, "abort.json"), "w") as f:
                json.dump(payload, f, indent=2)

    def evaluate(self):
        mean, std = evaluate_policy(self.model, self.eval_env,
                                    self.hp.eval_episodes, seed=self.hp.seed)
        vbe = (validation_bellman_error(self.model, self.validation, self.hp)
               if self.validation else math.nan)
        phase = phase_for_step(self.hp.k, max(self.t, 1))
        row = MetricsRow(step=self.t, phase=phase, algo=self.algo,
                         seed=self.hp.seed, mean_return=mean, std_return=std,
                         val_bellman_error=vbe)
        self.metrics.append(row)
        if self.out_dir:
            append_metrics_row(row, os.path.join(self.out_dir, "metrics.csv"))
        return row

    def write_manifest(self):
        if not self.out_dir:
            return
        os.makedirs(self.out_dir, exist_ok=True)
        hp_dict = dataclasses.asdict(self.hp)
        if hp_dict["k"] == math.inf:
            hp_dict["k"] = "inf"
        manifest = {
            "algo": self.algo,
            "env": self.env.env_id,
            "config": hp_dict,
            "corpus": self.corpus_path,
            "corpus_sha256": corpus_sha256(self.corpus_path) if self.corpus_path else None,
            "code_version": _code_version(),
            "out_dir": str(self.out_dir),
        }
        with open(os.path.join(self.out_dir, "manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)

    def run(self):
        self.write_manifest()
        for _ in range(self.hp.total_steps):
            self.step()
            if self.t % self.hp.eval_interval == 0:
                self.evaluate()
        if self.t % self.hp.eval_interval != 0:
            self.evaluate()
        if self.out_dir:
            save_checkpoint(self.model, os.path.join(self.out_dir, "model.nacq"),
                            step=self.t)
        return self.model, self.metrics


def _code_version():
    from . import __version__
    return __version__


def run_training(algo, env, corpus, hp, out_dir=None, model=None, corpus_path=None):
    return Trainer(algo, env, corpus, hp, out_dir=out_dir, model=model,
                   corpus_path=corpus_path).run()


def train_expert(env, hp, out_dir=None):
    """Soft Q-learning from scratch; the checkpoint feeds demo generation."""
    hp = dataclasses.replace(hp, k=0)
    return Trainer("soft-q", env, None, hp, out_dir=out_dir).run()
