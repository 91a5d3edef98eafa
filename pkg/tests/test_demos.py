import numpy as np
import pytest

from nacrl.demos import (
    CorpusFormatError,
    DemoCorpus,
    TransitionRecord,
    corpus_stats,
    default_keymap,
    generate_demos,
    longpath_expert,
    make_header,
    read_corpus,
    record_interactive,
    write_corpus,
)
from nacrl.envs import DOWN, RIGHT, UP, ConfigError, GridNav, TrackSim, default_grid_map
from nacrl.models import MlpQ


def grid_corpus(n=200, epsilon=0.0, corruption_p=0.0, seed=0):
    env = GridNav()
    expert = longpath_expert(env.map)
    rng = np.random.default_rng(seed)
    return generate_demos(expert, env, n, epsilon, corruption_p, rng, seed_label=seed)


class TestGenerateDemos:
    def test_no_corruption_no_flags(self):
        corpus = grid_corpus(100, corruption_p=0.0)
        assert not any(r.corrupted for r in corpus.records)

    def test_corrupted_fraction_concentration(self):
        env = GridNav()
        expert = longpath_expert(env.map)
        rng = np.random.default_rng(7)
        corpus = generate_demos(expert, env, 10_000, 0.0, 0.3, rng)
        frac = sum(r.corrupted for r in corpus.records) / len(corpus)
        # binomial 3 sigma around 0.3
        assert 0.27 <= frac <= 0.33

    def test_longpath_action_sequence(self):
        corpus = grid_corpus(50, epsilon=0.0)
        path = [DOWN, DOWN, RIGHT, RIGHT, RIGHT, RIGHT, RIGHT, UP, UP]
        by_episode = {}
        for r in corpus.records:
            by_episode.setdefault(r.episode, []).append(r.action)
        for actions in by_episode.values():
            assert actions == path

    def test_behavior_prob_of_eps_greedy_expert(self):
        corpus = grid_corpus(500, epsilon=0.25, seed=3)
        env = GridNav()
        expert = longpath_expert(env.map)
        for r in corpus.records:
            best = int(np.argmax(expert.q_forward(r.obs)))
            expect = (1 - 0.25) * (1.0 if r.action == best else 0.0) + 0.25 / 4
            assert r.behavior_prob == expect

    def test_mixture_prob_with_corruption(self):
        env = GridNav()
        expert = longpath_expert(env.map)
        rng = np.random.default_rng(11)
        corpus = generate_demos(expert, env, 2000, 0.1, 0.3, rng)
        for r in corpus.records:
            q = expert.q_forward(r.obs)
            best, worst = int(np.argmax(q)), int(np.argmin(q))
            base = (1 - 0.1) * (r.action == best) + 0.1 / 4
            expect = (1 - 0.3) * base + 0.3 * (r.action == worst)
            assert r.behavior_prob == pytest.approx(expect, abs=1e-15)

    def test_corruption_changes_trajectory_online(self):
        # corrupted actions are executed, so the next obs follows them
        env = GridNav()
        expert = longpath_expert(env.map)
        rng = np.random.default_rng(5)
        corpus = generate_demos(expert, env, 2000, 0.0, 0.5, rng)
        for r in corpus.records:
            if r.corrupted:
                q = expert.q_forward(r.obs)
                assert r.action == int(np.argmin(q))

    def test_reproducible_bytes(self, tmp_path):
        c1 = grid_corpus(300, epsilon=0.05, seed=42)
        c2 = grid_corpus(300, epsilon=0.05, seed=42)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_corpus(c1, p1)
        write_corpus(c2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_incompatible_expert(self):
        env = GridNav()
        expert = MlpQ(28, 9, hidden=(8, 8), seed=0)
        with pytest.raises(ConfigError):
            generate_demos(expert, env, 10, 0.0, 0.0, np.random.default_rng(0))

    def test_bad_probabilities_rejected(self):
        env = GridNav()
        expert = longpath_expert(env.map)
        with pytest.raises(ConfigError):
            generate_demos(expert, env, 10, -0.1, 0.0, np.random.default_rng(0))


class TestLongpathExpert:
    def test_requires_default_map(self):
        from nacrl.envs import GridMap
        with pytest.raises(ConfigError):
            longpath_expert(GridMap(rows=("S.H", "...")))

    def test_tracksim_demos_roll(self):
        env = TrackSim()
        expert = MlpQ(env.obs_dim, env.n_actions, hidden=(8, 8), seed=1)
        rng = np.random.default_rng(0)
        corpus = generate_demos(expert, env, 600, 0.01, 0.0, rng)
        assert len(corpus) >= 600
        assert corpus.header["env"] == "tracksim"
        assert corpus.records[0].obs.shape == (28,)


class TestRoundTrip:
    def test_empty_corpus(self, tmp_path):
        env = GridNav()
        corpus = DemoCorpus(header=make_header(env, "expert", 0.0, 0), records=[])
        p = tmp_path / "empty.jsonl"
        write_corpus(corpus, p)
        loaded = read_corpus(p)
        assert loaded.header == corpus.header
        assert loaded.records == []

    def test_grid_corpus_identity(self, tmp_path):
        corpus = grid_corpus(300, epsilon=0.1, corruption_p=0.2, seed=9)
        p = tmp_path / "c.jsonl"
        write_corpus(corpus, p)
        loaded = read_corpus(p)
        assert loaded.header == corpus.header
        assert loaded.records == corpus.records

    def test_byte_identical_reserialization(self, tmp_path):
        corpus = grid_corpus(10_000, epsilon=0.1, seed=1)
        p1, p2 = tmp_path / "x.jsonl", tmp_path / "y.jsonl"
        write_corpus(corpus, p1)
        write_corpus(read_corpus(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_tracksim_float_bits_roundtrip(self, tmp_path):
        env = TrackSim()
        expert = MlpQ(env.obs_dim, env.n_actions, hidden=(8, 8), seed=2)
        corpus = generate_demos(expert, env, 300, 0.05, 0.1, np.random.default_rng(3))
        p = tmp_path / "t.jsonl"
        write_corpus(corpus, p)
        loaded = read_corpus(p)
        for a, b in zip(corpus.records, loaded.records):
            assert np.array_equal(np.asarray(a.obs), b.obs)
            assert a.reward == b.reward and a.behavior_prob == b.behavior_prob

    def test_truncated_line_names_lineno(self, tmp_path):
        corpus = grid_corpus(20)
        p = tmp_path / "broken.jsonl"
        write_corpus(corpus, p)
        text = p.read_text().splitlines()
        text[-1] = text[-1][: len(text[-1]) // 2]
        p.write_text("\n".join(text) + "\n")
        with pytest.raises(CorpusFormatError, match=f"line {len(text)}"):
            read_corpus(p)

    def test_version_mismatch_rejected(self, tmp_path):
        corpus = grid_corpus(5)
        corpus.header["version"] = 99
        p = tmp_path / "v.jsonl"
        write_corpus(corpus, p)
        with pytest.raises(CorpusFormatError, match="version"):
            read_corpus(p)

    def test_broken_chaining_rejected(self, tmp_path):
        corpus = grid_corpus(20)
        recs = corpus.records
        import dataclasses
        recs[1] = dataclasses.replace(recs[1], obs=recs[1].obs + 1)
        p = tmp_path / "chain.jsonl"
        write_corpus(corpus, p)
        with pytest.raises(CorpusFormatError, match="chaining"):
            read_corpus(p)


class TestCorpusStats:
    def test_validation_split_sizes(self):
        env = GridNav()
        rec = TransitionRecord(0, 0, 0, 0, 0.0, 1, False, 0.5, False)
        records = []
        for ep in range(15000):
            for t in range(10):
                records.append(TransitionRecord(ep, t, t, 0, 0.0, t + 1, t == 9, 0.5, False))
        corpus = DemoCorpus(header=make_header(env, "expert", 0.0, 0), records=records)
        stats = corpus_stats(corpus, val_size=4500)
        assert stats.n_transitions == 150_000
        assert len(stats.train) == 145_500
        assert len(stats.validation) == 4500

    def test_single_episode(self):
        corpus = grid_corpus(5)  # one 9-step episode finishes past n=5
        stats = corpus_stats(corpus)
        assert stats.n_episodes == 1
        assert stats.mean_return == 1.0 and stats.std_return == 0.0

    def test_corrupted_fraction_exact(self):
        corpus = grid_corpus(1000, corruption_p=0.3, seed=13)
        stats = corpus_stats(corpus)
        flagged = sum(r.corrupted for r in corpus.records)
        assert stats.corrupted_fraction == flagged / len(corpus)

    def test_val_size_bounds(self):
        corpus = grid_corpus(20)
        with pytest.raises(ConfigError):
            corpus_stats(corpus, val_size=len(corpus) + 1)


class TestRecordInteractive:
    def test_immediate_quit_empty_corpus(self, tmp_path):
        env = GridNav()
        p = tmp_path / "rec.jsonl"
        corpus = record_interactive(env, default_keymap(env), p, input_fn=lambda: "Q")
        assert len(corpus) == 0
        assert read_corpus(p).header["generator"] == "human"

    def test_full_episode_return(self, tmp_path):
        env = GridNav()
        keys = iter(["d", "d", "d", "d", "d", "Q"])
        p = tmp_path / "rec.jsonl"
        corpus = record_interactive(env, default_keymap(env), p,
                                    input_fn=lambda: next(keys))
        assert sum(r.reward for r in corpus.records) == 1.0
        assert corpus.records[-1].done

    def test_roundtrip_and_uniform_prob(self, tmp_path):
        env = GridNav()
        keys = iter(["d", "x", "s", "w", "Q"])  # 'x' ignored by grid keymap
        p = tmp_path / "rec.jsonl"
        corpus = record_interactive(env, default_keymap(env), p,
                                    input_fn=lambda: next(keys))
        loaded = read_corpus(p)
        assert loaded.records == corpus.records
        assert all(r.behavior_prob == 0.25 for r in loaded.records)
