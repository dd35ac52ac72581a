import math
from collections import Counter

import numpy as np
import pytest

from muse.corpus import (CollocationSample, Vocabulary, build_negative_table,
                         build_vocabulary, keep_probability,
                         make_pseudoword_corpus, read_pseudoword_labels,
                         stream_samples)
from muse.errors import ConfigError


def write_corpus(tmp_path, text, name="corpus.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestBuildVocabulary:
    def test_basic_counting(self, tmp_path):
        path = write_corpus(tmp_path, "a a a b\n" * 3)
        vocab = build_vocabulary(path, min_count=2, min_sentence_tokens=0)
        assert vocab.words == ["a", "b"]
        assert vocab.counts.tolist() == [9, 3]
        assert vocab.word_to_id == {"a": 0, "b": 1}
        assert vocab.total_tokens == 12

    def test_min_count_above_max_is_config_error(self, tmp_path):
        path = write_corpus(tmp_path, "a a a b\n" * 3)
        with pytest.raises(ConfigError):
            build_vocabulary(path, min_count=100, min_sentence_tokens=0)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(OSError):
            build_vocabulary(str(tmp_path / "missing.txt"), min_count=1)

    def test_id_order_descending_frequency_ties_lexicographic(self, tmp_path):
        path = write_corpus(tmp_path, "b b a a c\n")
        vocab = build_vocabulary(path, min_count=1, min_sentence_tokens=0)
        assert vocab.words == ["a", "b", "c"]

    def test_sentence_length_filter(self, tmp_path):
        path = write_corpus(tmp_path, "short line\n" + "w " * 12 + "\n")
        vocab = build_vocabulary(path, min_count=1, min_sentence_tokens=10)
        assert "short" not in vocab.word_to_id
        assert vocab.counts[vocab.word_to_id["w"]] == 12

    def test_against_independent_counting_oracle(self, tmp_path):
        # ~1 MB synthetic slice; oracle is a separate hand-rolled count.
        rng = np.random.default_rng(7)
        words = [f"w{i}" for i in range(2000)]
        weights = 1.0 / np.arange(1, 2001) ** 1.1
        weights /= weights.sum()
        lines = []
        for _ in range(8000):
            toks = rng.choice(words, size=20, p=weights)
            lines.append(" ".join(toks))
        path = write_corpus(tmp_path, "\n".join(lines) + "\n")

        oracle: dict[str, int] = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                for tok in line.split():
                    oracle[tok] = oracle.get(tok, 0) + 1
        expected = {w: c for w, c in oracle.items() if c >= 5}

        vocab = build_vocabulary(path, min_count=5, min_sentence_tokens=10)
        assert len(vocab) == len(expected)
        for w, c in expected.items():
            assert vocab.counts[vocab.word_to_id[w]] == c
        assert vocab.dropped_tokens == sum(
            c for c in oracle.values() if c < 5)


class TestKeepProbability:
    def make_vocab(self, f, total=10_000_000):
        count = int(round(f * total))
        return Vocabulary.from_items({"x": count, "pad": total - count},
                                     min_count=1)

    def test_clips_at_one_when_f_equals_t(self):
        t = 1e-4
        vocab = self.make_vocab(1e-4)
        assert keep_probability(vocab.word_to_id["x"], vocab, t) == 1.0

    def test_hand_values(self):
        t = 1e-4
        vocab = self.make_vocab(100 * t)
        x = vocab.word_to_id["x"]
        assert keep_probability(x, vocab, t) == pytest.approx(0.11, abs=1e-12)
        vocab = self.make_vocab(4 * t)
        x = vocab.word_to_id["x"]
        assert keep_probability(x, vocab, t) == pytest.approx(0.75, abs=1e-12)


class TestNegativeTable:
    def test_hand_values_two_words(self):
        vocab = Vocabulary.from_items({"a": 8, "b": 1}, min_count=1)
        table = build_negative_table(vocab, senses_per_word=1, power=0.75)
        za = 8 ** 0.75
        expected_a = za / (za + 1.0)
        probs = table.probabilities()
        assert probs[0] == pytest.approx(expected_a, abs=1e-12)
        assert probs[1] == pytest.approx(1 - expected_a, abs=1e-12)
        assert expected_a == pytest.approx(0.8263, abs=5e-5)

    def test_symmetric_counts_power_one(self):
        vocab = Vocabulary.from_items({"a": 1, "b": 1}, min_count=1)
        table = build_negative_table(vocab, senses_per_word=2, power=1.0)
        assert np.allclose(table.probabilities(), 0.25, atol=1e-12)

    def test_normalization_and_equal_sense_masses(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            counts = {f"w{i}": int(c) for i, c in
                      enumerate(rng.integers(1, 10_000, size=50))}
            vocab = Vocabulary.from_items(counts, min_count=1)
            n = int(rng.integers(1, 5))
            table = build_negative_table(vocab, n, power=0.75)
            probs = table.probabilities()
            assert abs(probs.sum() - 1.0) < 1e-9
            per_word = probs.reshape(len(vocab), n)
            assert np.allclose(per_word, per_word[:, :1], atol=1e-15)

    def test_sampling_matches_distribution(self):
        vocab = Vocabulary.from_items({"a": 40, "b": 9, "c": 3}, min_count=1)
        table = build_negative_table(vocab, senses_per_word=2, power=0.75)
        rng = np.random.default_rng(123)
        draws = table.sample(rng, 1_000_000)
        counts = np.bincount(draws, minlength=6)
        p = table.probabilities()
        for k in range(6):
            sigma = math.sqrt(1_000_000 * p[k] * (1 - p[k]))
            assert abs(counts[k] - 1_000_000 * p[k]) < 3 * sigma

    def test_invalid_arguments(self, tiny_vocab):
        with pytest.raises(ConfigError):
            build_negative_table(tiny_vocab, 0)
        with pytest.raises(ConfigError):
            build_negative_table(tiny_vocab, 3, power=1.5)


class TestStreamSamples:
    def test_single_token_sentence_emits_nothing(self, tmp_path):
        path = write_corpus(tmp_path, "a\n")
        vocab = Vocabulary.from_items({"a": 1}, min_count=1)
        samples = list(stream_samples(path, vocab, 5, None, seed=0,
                                      min_sentence_tokens=0))
        assert samples == []

    def test_two_tokens_forced_offsets(self, tmp_path):
        path = write_corpus(tmp_path, "a b\n")
        vocab = Vocabulary.from_items({"a": 1, "b": 1}, min_count=1)
        samples = list(stream_samples(path, vocab, 5, None, seed=0,
                                      min_sentence_tokens=0))
        assert len(samples) == 2
        assert sorted(s.offset for s in samples) == [-1, 1]
        first = samples[0]
        assert first.target_window.target == vocab.word_to_id["a"]
        assert first.target_window.left == []
        assert first.target_window.right == [vocab.word_to_id["b"]]
        assert first.colloc_window.target == vocab.word_to_id["b"]

    def test_long_sentence_one_sample_per_position(self, tmp_path):
        rng = np.random.default_rng(3)
        tokens = [f"t{i}" for i in rng.integers(0, 50, size=1000)]
        path = write_corpus(tmp_path, " ".join(tokens) + "\n")
        vocab = Vocabulary.from_items(Counter(tokens), min_count=1)
        samples = list(stream_samples(path, vocab, 5, None, seed=0,
                                      min_sentence_tokens=0))
        assert len(samples) == 1000

    def test_deterministic_given_seed(self, tmp_path):
        rng = np.random.default_rng(4)
        lines = [" ".join(f"t{i}" for i in rng.integers(0, 30, size=15))
                 for _ in range(50)]
        path = write_corpus(tmp_path, "\n".join(lines) + "\n")
        vocab = build_vocabulary(path, min_count=1, min_sentence_tokens=0)

        def dump(seed):
            return [(s.target_window.target, s.colloc_window.target,
                     s.offset, tuple(s.target_window.left),
                     tuple(s.target_window.right))
                    for s in stream_samples(path, vocab, 5, 1e-2, seed=seed,
                                            min_sentence_tokens=0)]

        assert dump(9) == dump(9)
        assert dump(9) != dump(10)

    def test_sample_validity_properties(self, tmp_path):
        rng = np.random.default_rng(5)
        lines = [" ".join(f"t{i}" for i in rng.integers(0, 40, size=n))
                 for n in rng.integers(2, 30, size=80)]
        path = write_corpus(tmp_path, "\n".join(lines) + "\n")
        vocab = build_vocabulary(path, min_count=2, min_sentence_tokens=0)
        m = 4
        count = 0
        for s in stream_samples(path, vocab, m, 1e-3, seed=1,
                                min_sentence_tokens=0):
            count += 1
            assert 0 < abs(s.offset) <= m
            for w in ([s.target_window.target, s.colloc_window.target]
                      + s.target_window.left + s.target_window.right
                      + s.colloc_window.left + s.colloc_window.right):
                assert 0 <= w < len(vocab)
            # the collocated word sits at `offset` relative to the target
            tw, cw = s.target_window, s.colloc_window
            joint_t = tw.left + [tw.target] + tw.right
            pos_t = len(tw.left)
            assert joint_t[pos_t + s.offset] == cw.target
        assert count > 0

    def test_all_offsets_enumeration(self, tmp_path):
        path = write_corpus(tmp_path, "a b c d\n")
        vocab = build_vocabulary(path, min_count=1, min_sentence_tokens=0)
        samples = list(stream_samples(path, vocab, 2, None, seed=0,
                                      all_offsets=True, min_sentence_tokens=0))
        # offsets per position with m=2, L=4: 2 + 3 + 3 + 2
        assert len(samples) == 10

    def test_oov_tokens_removed_before_windowing(self, tmp_path):
        path = write_corpus(tmp_path, "a rare b\n")
        vocab = Vocabulary.from_items({"a": 5, "b": 5}, min_count=1)
        samples = list(stream_samples(path, vocab, 1, None, seed=0,
                                      min_sentence_tokens=0))
        # with 'rare' removed, a and b become adjacent within m=1
        assert len(samples) == 2
        assert all(abs(s.offset) == 1 for s in samples)

    def test_byte_range_shards_cover_corpus_once(self, tmp_path):
        rng = np.random.default_rng(6)
        lines = [" ".join(f"t{i}" for i in rng.integers(0, 20, size=12))
                 for _ in range(60)]
        path = write_corpus(tmp_path, "\n".join(lines) + "\n")
        vocab = build_vocabulary(path, min_count=1, min_sentence_tokens=0)
        total = sum(1 for _ in stream_samples(path, vocab, 3, None, seed=0,
                                              min_sentence_tokens=0))
        import os
        size = os.path.getsize(path)
        sharded = 0
        bounds = [0, size // 3, 2 * size // 3, size]
        for lo, hi in zip(bounds, bounds[1:]):
            sharded += sum(1 for _ in stream_samples(
                path, vocab, 3, None, seed=0, min_sentence_tokens=0,
                byte_range=(lo, hi)))
        assert sharded == total


class TestPseudowordCorpus:
    def test_direct_substitution(self, tmp_path):
        path = write_corpus(tmp_path, "apple pie river bank\n")
        out = str(tmp_path / "merged.txt")
        report = make_pseudoword_corpus(
            path, [("apple", "river", "appleriver")], out)
        assert open(out).read() == "appleriver pie appleriver bank\n"
        labels = read_pseudoword_labels(report.labels_path)
        assert labels == [(0, "apple"), (2, "river")]
        assert report.counts == {"appleriver": {"apple": 1, "river": 1}}

    def test_empty_merge_list_copies_bytes(self, tmp_path):
        text = "some text  with   spacing\nanother line\n"
        path = write_corpus(tmp_path, text)
        out = str(tmp_path / "copy.txt")
        make_pseudoword_corpus(path, [], out)
        assert open(out, "rb").read() == text.encode()

    def test_label_count_matches_counting_oracle(self, tmp_path):
        rng = np.random.default_rng(8)
        words = ["alpha", "beta", "gamma", "delta", "eps", "zeta"] + \
                [f"w{i}" for i in range(30)]
        lines = [" ".join(rng.choice(words, size=15)) for _ in range(300)]
        text = "\n".join(lines) + "\n"
        path = write_corpus(tmp_path, text)
        oracle = Counter(text.split())
        pairs = [("alpha", "beta", "p0"), ("gamma", "delta", "p1"),
                 ("eps", "zeta", "p2")]
        out = str(tmp_path / "m.txt")
        report = make_pseudoword_corpus(path, pairs, out)
        labels = read_pseudoword_labels(report.labels_path)
        expected = sum(oracle[w] for pair in pairs for w in pair[:2])
        assert len(labels) == expected
        assert report.total_rewritten == expected

    def test_pseudoword_collision_rejected(self, tmp_path):
        path = write_corpus(tmp_path, "a b taken\n")
        with pytest.raises(ConfigError):
            make_pseudoword_corpus(path, [("a", "b", "taken")],
                                   str(tmp_path / "x.txt"))

    def test_identical_sources_rejected(self, tmp_path):
        path = write_corpus(tmp_path, "a b\n")
        with pytest.raises(ConfigError):
            make_pseudoword_corpus(path, [("a", "a", "p")],
                                   str(tmp_path / "x.txt"))


class TestVocabularyFile:
    def test_save_format(self, tmp_path, tiny_vocab):
        path = tmp_path / "vocab.tsv"
        tiny_vocab.save(str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "the\t50"
        assert len(lines) == len(tiny_vocab)
