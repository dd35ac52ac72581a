import math
import time

import numpy as np
import pytest

from muse.corpus import ContextWindow
from muse.params import init_params
from muse.selection import (SelectionScores, Strategy, StrategyKind,
                            decode_sequence, encode_context, score_senses,
                            select_sense)
from muse.util import softmax

from conftest import make_params


def basis_params(vocab_size=4, d=4, n=2):
    """P rows set to unit basis vectors so context sums are easy to read."""
    params = init_params(vocab_size, d, n, seed=0)
    params.P[:] = 0
    for i in range(min(vocab_size, d)):
        params.P[i, i] = 1.0
    return params


class TestEncodeContext:
    def test_empty_window_is_zero(self):
        params = basis_params()
        win = ContextWindow(target=0, left=[], right=[], m=5)
        assert not encode_context(win, params).any()

    def test_singleton(self):
        params = basis_params()
        win = ContextWindow(target=0, left=[1], right=[], m=5)
        np.testing.assert_array_equal(encode_context(win, params),
                                      params.P[1])

    def test_repeated_words_against_naive_loop(self):
        params = make_params(6, 8, 2, seed=3)
        win = ContextWindow(target=0, left=[1, 2], right=[1], m=5)
        naive = np.zeros(8, dtype=np.float64)
        for j in [1, 2, 1]:
            naive += params.P[j].astype(np.float64)
        got = encode_context(win, params).astype(np.float64)
        np.testing.assert_allclose(got, naive, atol=1e-6)


class TestScoreSenses:
    def test_zero_logits_give_uniform_policy_and_half_qvalues(self):
        params = init_params(4, 8, 3, seed=0)  # Q starts at zero
        win = ContextWindow(target=2, left=[0, 1], right=[3], m=5)
        scores = score_senses(win, params)
        np.testing.assert_allclose(scores.policy, 1 / 3, atol=1e-12)
        np.testing.assert_allclose(scores.qvalues, 0.5, atol=1e-12)

    def test_hand_softmax(self):
        params = basis_params(vocab_size=4, d=4, n=2)
        # context = P[1] = e1; steer logits to [ln 2, 0]
        params.Q[0, 0, 1] = math.log(2.0)
        params.Q[0, 1, 1] = 0.0
        win = ContextWindow(target=0, left=[1], right=[], m=5)
        scores = score_senses(win, params)
        np.testing.assert_allclose(scores.policy, [2 / 3, 1 / 3], atol=1e-6)

    def test_huge_logits_do_not_overflow(self):
        params = basis_params(vocab_size=4, d=4, n=2)
        params.Q[0, 0, 1] = 1000.0
        win = ContextWindow(target=0, left=[1], right=[], m=5)
        scores = score_senses(win, params)
        assert np.isfinite(scores.policy).all()
        np.testing.assert_allclose(scores.policy, [1.0, 0.0], atol=1e-12)

    def test_policy_sums_to_one_and_argmax_agreement(self):
        rng = np.random.default_rng(4)
        params = make_params(10, 6, 4, seed=5, random_qv=True)
        for _ in range(100):
            k = int(rng.integers(0, 5))
            win = ContextWindow(target=int(rng.integers(0, 10)),
                                left=list(rng.integers(0, 10, size=k)),
                                right=list(rng.integers(0, 10, size=k)), m=5)
            s = score_senses(win, params)
            assert abs(s.policy.sum() - 1.0) < 1e-6
            assert (s.policy > 0).all()
            assert ((s.qvalues > 0) & (s.qvalues < 1)).all()
            assert s.policy.argmax() == s.logits.argmax() == s.qvalues.argmax()


class TestSoftmaxInvariance:
    def test_shift_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            logits = rng.normal(0, 5, size=6)
            shifted = logits + rng.normal(0, 100)
            assert np.abs(softmax(logits) - softmax(shifted)).max() < 1e-9


def make_scores(qvalues):
    logits = np.array([math.log(q / (1 - q)) for q in qvalues])
    return SelectionScores(word=0, logits=logits, policy=softmax(logits),
                           qvalues=np.asarray(qvalues, dtype=np.float64))


class TestSelectSense:
    def test_greedy_argmax(self, rng):
        scores = make_scores([0.9, 0.1, 0.1])
        ref = select_sense(scores, Strategy(StrategyKind.GREEDY), rng)
        assert ref.sense == 0

    def test_greedy_tie_breaks_to_lowest_index(self, rng):
        scores = make_scores([0.5, 0.5, 0.5])
        ref = select_sense(scores, Strategy(StrategyKind.GREEDY), rng)
        assert ref.sense == 0

    def test_boltzmann_uniform_frequencies(self):
        rng = np.random.default_rng(2)
        scores = make_scores([0.5, 0.5, 0.5])
        strat = Strategy(StrategyKind.BOLTZMANN)
        draws = np.array([select_sense(scores, strat, rng).sense
                          for _ in range(30_000)])
        counts = np.bincount(draws, minlength=3)
        sigma = math.sqrt(30_000 * (1 / 3) * (2 / 3))
        assert np.abs(counts - 10_000).max() < 3 * sigma

    def test_full_epsilon_is_uniform_despite_scores(self):
        rng = np.random.default_rng(3)
        scores = make_scores([0.99, 0.005, 0.005])
        strat = Strategy(StrategyKind.EPSILON_GREEDY, epsilon=1.0)
        draws = np.array([select_sense(scores, strat, rng).sense
                          for _ in range(30_000)])
        counts = np.bincount(draws, minlength=3)
        sigma = math.sqrt(30_000 * (1 / 3) * (2 / 3))
        assert np.abs(counts - 10_000).max() < 3 * sigma

    def test_epsilon_zero_is_greedy(self):
        rng = np.random.default_rng(4)
        scores = make_scores([0.2, 0.7, 0.1])
        strat = Strategy(StrategyKind.EPSILON_GREEDY, epsilon=0.0)
        assert all(select_sense(scores, strat, rng).sense == 1
                   for _ in range(100))

    def test_sampling_deterministic_given_seed(self):
        scores = make_scores([0.3, 0.4, 0.3])
        strat = Strategy(StrategyKind.POLICY_SAMPLE)
        a = [select_sense(scores, strat, np.random.default_rng(7)).sense
             for _ in range(1)]
        b = [select_sense(scores, strat, np.random.default_rng(7)).sense
             for _ in range(1)]
        assert a == b

    def test_flat_index_of_selection(self, rng):
        scores = make_scores([0.1, 0.9, 0.1])
        ref = select_sense(scores, Strategy(StrategyKind.GREEDY), rng)
        assert ref.flat == ref.word * 3 + ref.sense


class TestDecodeSequence:
    def test_zero_init_ties_to_sense_zero(self):
        params = init_params(4, 8, 3, seed=0)
        out = decode_sequence([2], params, m=5)
        assert len(out) == 1
        assert out[0].word == 2 and out[0].sense == 0

    def test_words_are_preserved(self):
        params = make_params(10, 6, 3, seed=6, random_qv=True)
        tokens = [3, 1, 4, 1, 5, 9, 2, 6]
        out = decode_sequence(tokens, params, m=3)
        assert [r.word for r in out] == tokens

    def test_compositional_oracle(self):
        params = make_params(12, 8, 3, seed=7, random_qv=True)
        rng = np.random.default_rng(8)
        tokens = list(rng.integers(0, 12, size=200))
        m = 4
        got = decode_sequence(tokens, params, m=m)
        for t in range(len(tokens)):
            win = ContextWindow(
                target=tokens[t],
                left=tokens[max(0, t - m):t],
                right=tokens[t + 1:t + 1 + m],
                m=m,
            )
            scores = score_senses(win, params)
            expected = int(scores.qvalues.argmax())
            assert got[t].sense == expected, f"mismatch at position {t}"

    def test_empty_sequence(self):
        params = init_params(4, 8, 3, seed=0)
        assert decode_sequence([], params, m=5) == []


@pytest.mark.slow
class TestDecodeLinearTime:
    def test_runtime_doubles_with_length(self):
        params = make_params(400, 32, 3, seed=9, random_qv=True)
        rng = np.random.default_rng(10)

        def timed(length):
            tokens = rng.integers(0, 400, size=length)
            best = float("inf")
            for _ in range(3):
                t0 = time.perf_counter()
                decode_sequence(tokens, params, m=5)
                best = min(best, time.perf_counter() - t0)
            return best

        timed(10_000)  # warm caches
        t1 = timed(100_000)
        t2 = timed(200_000)
        t4 = timed(400_000)
        assert 1.6 <= t2 / t1 <= 2.6
        assert 1.6 <= t4 / t2 <= 2.6
