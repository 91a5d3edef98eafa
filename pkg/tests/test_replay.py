import math

import numpy as np
import pytest

from nacrl.demos import TransitionRecord
from nacrl.replay import (
    DEMO,
    ENV,
    ReplayBuffer,
    demo_steps_sentinel,
    phase_for_step,
    sample,
    sample_paths,
)


def rec(i, episode=0, t=None, done=False):
    return TransitionRecord(episode=episode, t=i if t is None else t, obs=i,
                            action=0, reward=0.0, next_obs=i + 1, done=done,
                            behavior_prob=1.0, corrupted=False)


class TestReplayBuffer:
    def test_fifo_eviction(self):
        buf = ReplayBuffer(capacity=3)
        for i in range(4):
            buf.push(rec(i))
        assert [r.obs for r in buf.records()] == [1, 2, 3]

    def test_push_into_empty(self):
        buf = ReplayBuffer()
        buf.push(rec(0))
        assert len(buf) == 1

    def test_default_capacity_one_million(self):
        buf = ReplayBuffer()
        one = rec(0)
        for _ in range(1_000_001):
            buf.push(one)
        assert len(buf) == 1_000_000
        assert buf.inserted == 1_000_001

    def test_eviction_order_by_sequence(self):
        buf = ReplayBuffer(capacity=5)
        for i in range(12):
            buf.push(rec(i))
        assert [r.obs for r in buf.records()] == [7, 8, 9, 10, 11]

    def test_shape_mismatch_rejected(self):
        buf = ReplayBuffer()
        buf.push(rec(0))
        bad = TransitionRecord(0, 0, np.zeros(4), 0, 0.0, np.zeros(4), False, 1.0, False)
        with pytest.raises(ValueError):
            buf.push(bad)


class TestSample:
    def test_single_record_source(self):
        buf = ReplayBuffer()
        buf.push(rec(7))
        batch = sample(buf, 32, np.random.default_rng(0), ENV)
        assert len(batch) == 32
        assert all(r.obs == 7 for r in batch.records)
        assert batch.sources == [ENV] * 32

    def test_fixed_seed_reproducible(self):
        buf = ReplayBuffer()
        for i in range(50):
            buf.push(rec(i))
        b1 = sample(buf, 16, np.random.default_rng(9))
        b2 = sample(buf, 16, np.random.default_rng(9))
        assert [r.obs for r in b1.records] == [r.obs for r in b2.records]

    def test_uniformity(self):
        buf = ReplayBuffer()
        for i in range(10):
            buf.push(rec(i))
        rng = np.random.default_rng(1)
        counts = np.zeros(10)
        batch = sample(buf, 100_000, rng)
        for r in batch.records:
            counts[r.obs] += 1
        freqs = counts / 100_000
        assert (freqs >= 0.09).all() and (freqs <= 0.11).all()

    def test_never_fabricates(self):
        buf = ReplayBuffer()
        for i in range(5):
            buf.push(rec(i))
        batch = sample(buf, 64, np.random.default_rng(2))
        ids = {id(r) for r in buf.records()}
        assert all(id(r) in ids for r in batch.records)

    def test_empty_source_raises(self):
        with pytest.raises(RuntimeError):
            sample(ReplayBuffer(), 4, np.random.default_rng(0))

    def test_list_and_corpus_sources(self):
        batch = sample([rec(1), rec(2)], 8, np.random.default_rng(3), DEMO)
        assert batch.sources == [DEMO] * 8


class TestSamplePaths:
    def test_depth_one_paths(self):
        records = [rec(i, episode=0, t=i) for i in range(5)]
        paths = sample_paths(records, 1, 6, np.random.default_rng(0))
        assert all(len(p) == 1 for p in paths)

    def test_contiguity(self):
        records = [rec(i, episode=i // 4, t=i % 4, done=(i % 4 == 3)) for i in range(20)]
        paths = sample_paths(records, 3, 50, np.random.default_rng(1))
        for p in paths:
            for a, b in zip(p, p[1:]):
                assert b.episode == a.episode and b.t == a.t + 1
            # shorter paths are allowed only when cut by a terminal
            if len(p) < 3:
                assert p[-1].done

    def test_terminal_truncation(self):
        records = [rec(0, t=0), rec(1, t=1, done=True)]
        paths = sample_paths(records, 4, 10, np.random.default_rng(2))
        for p in paths:
            assert p[-1].done


class TestPhaseSchedule:
    def test_k_zero_env_from_start(self):
        assert phase_for_step(0, 1) == ENV

    def test_boundary(self):
        assert phase_for_step(5000, 5000) == DEMO
        assert phase_for_step(5000, 5001) == ENV

    def test_infinite_demo_phase(self):
        k = demo_steps_sentinel("inf")
        assert phase_for_step(k, 10**9) == DEMO

    def test_sentinel_parsing(self):
        assert demo_steps_sentinel("10") == 10
        assert demo_steps_sentinel(0) == 0
        assert demo_steps_sentinel(math.inf) == math.inf
        with pytest.raises(ValueError):
            demo_steps_sentinel(-1)
        with pytest.raises(ValueError):
            demo_steps_sentinel(2.5)

    def test_pure_step_function(self):
        ks = [0, 1, 7, 1000]
        for k in ks:
            for t in range(1, 30):
                assert phase_for_step(k, t) == (DEMO if t <= k else ENV)
        with pytest.raises(ValueError):
            phase_for_step(3, 0)
