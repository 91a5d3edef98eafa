"""Demonstration corpora: generation, corruption, recording, persistence.

A corpus is a JSON-lines file: one header line, then one transition per
line. Corruption swaps the executed action for the expert's argmin action
with a configured probability, online, so later steps in the episode see
its consequences.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .envs import DEFAULT_GRID, DOWN, LEFT, RIGHT, UP, ConfigError
from .models import TabularQ

FORMAT_VERSION = 1


class CorpusFormatError(Exception):
    pass


@dataclass(frozen=True)
class TransitionRecord:
    episode: int
    t: int
    obs: object
    action: int
    reward: float
    next_obs: object
    done: bool
    behavior_prob: float
    corrupted: bool


@dataclass
class DemoCorpus:
    header: dict
    records: list

    @property
    def env_id(self):
        return self.header["env"]

    @property
    def n_actions(self):
        return self.header["n_actions"]

    def __len__(self):
        return len(self.records)


def _obs_descriptor(obs):
    if isinstance(obs, (int, np.integer)):
        return "int"
    arr = np.asarray(obs)
    return f"f64[{arr.shape[0]}]"


def _encode_obs(obs):
    if isinstance(obs, (int, np.integer)):
        return int(obs)
    return [float(x) for x in np.asarray(obs)]


def _decode_obs(raw):
    if isinstance(raw, list):
        return np.array(raw, dtype=np.float64)
    return int(raw)


def make_header(env, generator, corruption_p, seed):
    return {
        "version": FORMAT_VERSION,
        "env": env.env_id,
        "n_actions": env.n_actions,
        "obs": "int" if env.env_id == "gridnav" else f"f64[{env.obs_dim}]",
        "generator": generator,
        "corruption_p": float(corruption_p),
        "seed": int(seed),
    }


def greedy_action(q_row):
    return int(np.argmax(q_row))


def worst_action(q_row):
    return int(np.argmin(q_row))


def generate_demos(expert, env, n_transitions, epsilon, corruption_p, rng, seed_label=0):
    """Roll expert episodes until at least n_transitions are collected.

    The expert acts greedily, replaced by a uniform random action with
    probability epsilon; independently, with probability corruption_p the
    executed action becomes the expert's argmin action and the record is
    flagged corrupted. behavior_prob stores the executed action's full
    mixture probability.
    """
    if not 0.0 <= epsilon <= 1.0 or not 0.0 <= corruption_p <= 1.0:
        raise ConfigError("epsilon and corruption_p must lie in [0, 1]")
    n_act = env.n_actions
    records = []
    episode = 0
    while len(records) < n_transitions:
        obs = env.reset()
        _check_expert(expert, obs)
        t = 0
        done = False
        while not done:
            q = expert.q_forward(obs)
            best = greedy_action(q)
            action = best
            if epsilon > 0.0 and rng.random() < epsilon:
                action = int(rng.integers(n_act))
            corrupted = corruption_p > 0.0 and rng.random() < corruption_p
            if corrupted:
                action = worst_action(q)
            base_prob = (1.0 - epsilon) * (1.0 if action == best else 0.0) + epsilon / n_act
            prob = (1.0 - corruption_p) * base_prob \
                + corruption_p * (1.0 if action == worst_action(q) else 0.0)
            res = env.step(action)
            records.append(TransitionRecord(
                episode=episode, t=t, obs=obs, action=action, reward=res.reward,
                next_obs=res.obs, done=res.done, behavior_prob=prob, corrupted=corrupted))
            obs = res.obs
            done = res.done
            t += 1
        episode += 1
    header = make_header(env, generator="expert", corruption_p=corruption_p,
                         seed=seed_label)
    return DemoCorpus(header=header, records=records)


def _check_expert(expert, obs):
    try:
        expert.q_forward(obs)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"expert checkpoint incompatible with environment: {e}") from e


def longpath_expert(grid_map):
    """Scripted gridworld expert that takes the longer route around the water.

    Only defined for the default 3x6 layout.
    """
    if tuple(grid_map.rows) != DEFAULT_GRID:
        raise ConfigError("the scripted long-path expert requires the default grid map")
    w = grid_map.width
    model = TabularQ(grid_map.height * w, 4)
    actions = {}
    actions[(0, 0)] = DOWN
    actions[(1, 0)] = DOWN
    for c in range(5):
        actions[(2, c)] = RIGHT
    actions[(2, 5)] = UP
    actions[(1, 5)] = UP
    for c in range(1, 5):
        actions[(0, c)] = RIGHT
    for (r, c), a in actions.items():
        model.table[r * w + c, a] = 1.0
    return model


# ------------------------------------------------------------- persistence

_RECORD_FIELDS = ("obs", "action", "reward", "next_obs", "done",
                  "behavior_prob", "corrupted", "episode", "t")


def write_corpus(corpus, path):
    with open(path, "w") as f:
        f.write(json.dumps(corpus.header) + "\n")
        for rec in corpus.records:
            row = {
                "obs": _encode_obs(rec.obs),
                "action": int(rec.action),
                "reward": float(rec.reward),
                "next_obs": _encode_obs(rec.next_obs),
                "done": bool(rec.done),
                "behavior_prob": float(rec.behavior_prob),
                "corrupted": bool(rec.corrupted),
                "episode": int(rec.episode),
                "t": int(rec.t),
            }
            f.write(json.dumps(row) + "\n")


def read_corpus(path):
    with open(path) as f:
        first = f.readline()
        if not first.strip():
            raise CorpusFormatError(f"{path}: missing header line")
        try:
            header = json.loads(first)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(f"{path}: line 1: bad header: {e}") from e
        if header.get("version") != FORMAT_VERSION:
            raise CorpusFormatError(
                f"{path}: unsupported corpus version {header.get('version')!r}")
        records = []
        prev = None
        for lineno, line in enumerate(f, start=2):
            try:
                row = json.loads(line)
                rec = TransitionRecord(
                    episode=row["episode"], t=row["t"],
                    obs=_decode_obs(row["obs"]), action=row["action"],
                    reward=row["reward"], next_obs=_decode_obs(row["next_obs"]),
                    done=row["done"], behavior_prob=row["behavior_prob"],
                    corrupted=row["corrupted"])
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise CorpusFormatError(f"{path}: line {lineno}: {e}") from e
            _check_record_shape(header, rec, path, lineno)
            if prev is not None and rec.episode == prev.episode:
                if not _obs_equal(prev.next_obs, rec.obs):
                    raise CorpusFormatError(
                        f"{path}: line {lineno}: broken episode chaining")
            prev = rec
            records.append(rec)
    return DemoCorpus(header=header, records=records)


def _obs_equal(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), np.asarray(b))
    return a == b


def _check_record_shape(header, rec, path, lineno):
    desc = header.get("obs", "int")
    for obs in (rec.obs, rec.next_obs):
        if desc == "int":
            ok = isinstance(obs, int)
        else:
            dim = int(desc[4:-1])
            ok = isinstance(obs, np.ndarray) and obs.shape == (dim,)
        if not ok:
            raise CorpusFormatError(
                f"{path}: line {lineno}: observation does not match header {desc!r}")
    if not 0 <= rec.action < header["n_actions"]:
        raise CorpusFormatError(f"{path}: line {lineno}: action out of range")
    if not (0.0 < rec.behavior_prob <= 1.0) or not math.isfinite(rec.reward):
        raise CorpusFormatError(f"{path}: line {lineno}: bad probability or reward")


# ------------------------------------------------------------------ stats

@dataclass(frozen=True)
class CorpusStats:
    n_transitions: int
    n_episodes: int
    mean_return: float
    std_return: float
    corrupted_fraction: float
    train: list
    validation: list


def corpus_stats(corpus, val_size=0):
    if val_size < 0 or val_size > len(corpus):
        raise ConfigError(
            f"validation size {val_size} out of range for corpus of {len(corpus)}")
    returns = {}
    corrupted = 0
    for rec in corpus.records:
        returns[rec.episode] = returns.get(rec.episode, 0.0) + rec.reward
        corrupted += rec.corrupted
    vals = np.array(list(returns.values())) if returns else np.zeros(0)
    n = len(corpus)
    split = n - val_size
    return CorpusStats(
        n_transitions=n,
        n_episodes=len(returns),
        mean_return=float(vals.mean()) if len(vals) else 0.0,
        std_return=float(vals.std()) if len(vals) else 0.0,
        corrupted_fraction=corrupted / n if n else 0.0,
        train=corpus.records[:split],
        validation=corpus.records[split:],
    )


# ------------------------------------------------------- interactive play

GRID_KEYS = {"w": UP, "s": DOWN, "a": LEFT, "d": RIGHT}
TRACK_KEYS = {"q": 0, "w": 3, "e": 6, "a": 1, "s": 4, "d": 7, "z": 2, "x": 5, "c": 8}


def default_keymap(env):
    return GRID_KEYS if env.env_id == "gridnav" else TRACK_KEYS


def record_interactive(env, keymap, out_path, input_fn, render_fn=None, seed_label=0):
    """Drive the environment from keypresses and persist the transitions.

    input_fn() returns one key at a time; anything not in the keymap is
    ignored, and "q-quit" is signalled by returning "Q" or empty. The human
    policy is unknown, so behavior_prob is recorded as 1/|A|.
    """
    records = []
    episode = 0
    obs = env.reset()
    t = 0
    uniform = 1.0 / env.n_actions
    while True:
        if render_fn:
            render_fn(env, obs)
        key = input_fn()
        if key in ("", "Q", None):
            break
        action = keymap.get(key)
        if action is None:
            continue
        res = env.step(action)
        records.append(TransitionRecord(
            episode=episode, t=t, obs=obs, action=action, reward=res.reward,
            next_obs=res.obs, done=res.done, behavior_prob=uniform, corrupted=False))
        obs = res.obs
        t += 1
        if res.done:
            episode += 1
            t = 0
            obs = env.reset()
    corpus = DemoCorpus(
        header=make_header(env, generator="human", corruption_p=0.0, seed=seed_label),
        records=records)
    write_corpus(corpus, out_path)
    return corpus
