"""Bounded FIFO transition storage and the two-phase sampling schedule."""

import math
from dataclasses import dataclass

import numpy as np

DEMO, ENV = "demo", "env"


@dataclass
class Batch:
    records: list
    sources: list

    def __len__(self):
        return len(self.records)


class ReplayBuffer:
    """Ring buffer of transitions with strict FIFO eviction."""

    def __init__(self, capacity=1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._data = []
        self._next = 0
        self.inserted = 0

    def __len__(self):
        return len(self._data)

    def push(self, record):
        if self._data and not _same_shape(self._data[0], record):
            raise ValueError("record shape does not match buffer contents")
        if len(self._data) < self.capacity:
            self._data.append(record)
        else:
            self._data[self._next] = record
        self._next = (self._next + 1) % self.capacity
        self.inserted += 1

    def records(self):
        # oldest-first view of the ring
        if len(self._data) < self.capacity:
            return list(self._data)
        return self._data[self._next:] + self._data[:self._next]

    def sample(self, batch_size, rng, source=ENV):
        return sample(self, batch_size, rng, source)


def _same_shape(a, b):
    ai, bi = np.asarray(a.obs), np.asarray(b.obs)
    return ai.shape == bi.shape and ai.dtype.kind == bi.dtype.kind


def _record_list(source):
    if isinstance(source, ReplayBuffer):
        return source._data
    if hasattr(source, "records"):
        recs = source.records
        return recs() if callable(recs) else recs
    return source


def sample(source, batch_size, rng, source_flag=DEMO):
    """Uniform-with-replacement minibatch from a buffer, corpus, or list."""
    records = _record_list(source)
    if not records:
        raise RuntimeError("cannot sample from an empty source")
    idx = rng.integers(0, len(records), size=batch_size)
    return Batch(records=[records[i] for i in idx],
                 sources=[source_flag] * batch_size)


def sample_paths(source, depth, batch_size, rng, source_flag=DEMO):
    """Contiguous sub-trajectories of up to `depth` steps for path losses.

    A path is truncated early only at an episode terminal; starts too close
    to a non-terminal boundary are resampled.
    """
    records = _record_list(source)
    if not records:
        raise RuntimeError("cannot sample from an empty source")
    paths = []
    attempts = 0
    while len(paths) < batch_size:
        attempts += 1
        if attempts > 100 * batch_size:
            raise RuntimeError("could not find contiguous paths in the source")
        start = int(rng.integers(0, len(records)))
        path = [records[start]]
        ok = True
        for j in range(1, depth):
            prev = path[-1]
            if prev.done:
                break
            nxt = records[start + j] if start + j < len(records) else None
            if nxt is None or nxt.episode != prev.episode or nxt.t != prev.t + 1:
                ok = False
                break
            path.append(nxt)
        if ok:
            paths.append(path)
    return paths


def phase_for_step(k, t):
    """Algorithm phase at step t (1-based): demonstrations up to and including k."""
    if t < 1:
        raise ValueError("steps are 1-based")
    return DEMO if t <= k else ENV


def demo_steps_sentinel(value):
    """Parse a demo-phase length; 'inf' keeps the run on demonstrations forever."""
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    v = float(value)
    if v == math.inf:
        return math.inf
    if v < 0 or v != int(v):
        raise ValueError(f"k must be a non-negative integer or inf, got {value}")
    return int(v)
