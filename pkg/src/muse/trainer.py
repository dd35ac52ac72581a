"""Joint training: sample collocations, pick senses, update both modules.

One training step is a one-step decision process: the local context is the
state, the chosen sense is the action, and the collocation estimate from
the representation module is the reward. Per batch:

  phase 1  select senses for the whole batch (collocated side first, then
           targets), using the parameters as of batch start;
  phase 2  per-sample stochastic skip-gram updates on U and V;
  phase 3  one averaged selector update on P and Q, routed to the target
           side only, treating U and V as constants.

The selector learns either by REINFORCE on the softmax policy or by
cross-entropy Q-learning on the per-sense sigmoid estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from .config import Learner, TrainingConfig
from .corpus import (CollocationSample, ContextWindow, Vocabulary,
                     build_negative_table, keep_probabilities, stream_samples)
from .errors import ConfigError, TrainingError
from .params import ModelParams, SenseRef, save_model
from .representation import (RewardKind, draw_negatives, sgns_batch)
from .selection import (Strategy, StrategyKind, context_sums, pack_windows,
                        score_batch, select_batch)
from .util import sigmoid, softmax


@dataclass
class TrainStats:
    """Running counters of a training run.

    ``mean_reward`` is in the scale of the configured reward (a log value
    for policy gradient, a probability for Q-learning).
    """

    samples_seen: int = 0
    mean_reward: float = 0.0
    mean_entropy: float = 0.0
    lr: float = 0.0
    finite: bool = True


def _batches(stream: Iterable[CollocationSample], size: int
             ) -> Iterator[list[CollocationSample]]:
    batch: list[CollocationSample] = []
    for sample in stream:
        batch.append(sample)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch


class Trainer:
    """Owns the negative table, the learning-rate schedule and the counters."""

    def __init__(self, params: ModelParams, vocab: Vocabulary,
                 config: TrainingConfig, use_numba: bool = True):
        config = config.validate()
        if params.n != config.n or params.d != config.d:
            raise ConfigError("parameter shapes do not match the configuration")
        self.params = params
        self.vocab = vocab
        self.config = config
        self.use_numba = use_numba
        self.table = build_negative_table(vocab, config.n, config.power)
        kp = keep_probabilities(vocab, config.subsample_t)
        expected = float((vocab.counts * kp).sum()) if kp is not None \
            else float(vocab.total_tokens)
        per_position = 2 * config.m if config.all_offsets else 1
        self.planned_samples = max(1, int(config.epochs * expected * per_position))
        self._seen = 0
        self._reward_sum = 0.0
        self._entropy_sum = 0.0

    # -- bookkeeping --------------------------------------------------------

    def current_lr(self) -> float:
        cfg = self.config
        frac = min(1.0, self._seen / self.planned_samples)
        return max(cfg.lr0 * (1.0 - frac), cfg.lr0 * cfg.lr_floor_ratio)

    def stats(self) -> TrainStats:
        seen = max(1, self._seen)
        return TrainStats(
            samples_seen=self._seen,
            mean_reward=self._reward_sum / seen,
            mean_entropy=self._entropy_sum / seen,
            lr=self.current_lr(),
            finite=True,
        )

    # -- the three-phase batch ----------------------------------------------

    def _process_batch(self, samples: Sequence[CollocationSample],
                       rng: np.random.Generator) -> None:
        cfg = self.config
        params = self.params
        B = len(samples)
        n = cfg.n

        c_words, c_idx, c_mask = pack_windows(
            [s.colloc_window for s in samples], cfg.m)
        t_words, t_idx, t_mask = pack_windows(
            [s.target_window for s in samples], cfg.m)

        # phase 1: the collocated sense is drawn first and then held fixed
        c_csum = context_sums(params.P, c_idx, c_mask)
        c_logits = score_batch(params, c_words, c_csum)
        c_sense = select_batch(c_logits, cfg.strategy, rng)
        t_csum = context_sums(params.P, t_idx, t_mask)
        t_logits = score_batch(params, t_words, t_csum)
        t_sense = select_batch(t_logits, cfg.strategy, rng)

        t_flat = t_words * n + t_sense
        c_flat = c_words * n + c_sense
        lr = self.current_lr()

        reversed_reward = None
        if cfg.reward_direction == "reversed":
            dots = np.einsum("bd,bd->b",
                             params.U[c_flat].astype(np.float64),
                             params.V[t_flat].astype(np.float64))
            reversed_reward = sigmoid(dots)

        # phase 2: stochastic skip-gram steps, one per sample
        negs = draw_negatives(self.table, rng, cfg.negatives, c_flat)
        values, lhat = sgns_batch(params, t_flat, c_flat, negs, lr,
                                  use_numba=self.use_numba)
        if not np.isfinite(values).all():
            raise TrainingError(
                f"non-finite collocation value around sample {self._seen}")

        if cfg.learner is Learner.POLICY_GRADIENT:
            rewards = values
        elif cfg.reward is RewardKind.APPROX_LOG_LIK:
            rewards = np.exp(values)
        elif reversed_reward is not None:
            rewards = reversed_reward
        else:
            rewards = lhat

        # phase 3: averaged selector update for the target senses only
        if cfg.learner is Learner.POLICY_GRADIENT:
            self._pg_batch_update(t_words, t_sense, t_logits, t_csum,
                                  t_idx, t_mask, rewards, lr)
        else:
            self._ql_batch_update(t_words, t_sense, t_logits, t_csum,
                                  t_idx, t_mask, rewards, lr)

        pol = softmax(t_logits.astype(np.float64), axis=1)
        self._entropy_sum += float(-(pol * np.log(pol)).sum(axis=1).sum())
        self._reward_sum += float(np.sum(rewards))
        self._seen += B

    def _scatter_context(self, ctx_idx, ctx_mask, per_sample_delta) -> None:
        slots = ctx_mask > 0
        rows = ctx_idx[slots]
        B, width = ctx_idx.shape
        deltas = np.broadcast_to(
            per_sample_delta[:, None, :], (B, width, per_sample_delta.shape[1]))[slots]
        np.add.at(self.params.P, rows, deltas)

    def _ql_batch_update(self, words, senses, logits, csums, ctx_idx,
                         ctx_mask, target_p, lr) -> None:
        """Cross-entropy descent on the selected senses' sigmoid estimates."""
        B = len(words)
        n = self.config.n
        sel_logits = logits[np.arange(B), senses].astype(np.float64)
        q = sigmoid(sel_logits)
        g = (q - target_p) * (lr / B)
        q_rows = self.params.Q[words, senses].astype(np.float64)  # pre-update
        q2 = self.params.q_flat()
        np.add.at(q2, words * n + senses,
                  (-g[:, None] * csums.astype(np.float64)).astype(np.float32))
        d_p = (-g[:, None] * q_rows).astype(np.float32)
        self._scatter_context(ctx_idx, ctx_mask, d_p)

    def _pg_batch_update(self, words, senses, logits, csums, ctx_idx,
                         ctx_mask, rewards, lr) -> None:
        """REINFORCE ascent: reward times the log-policy gradient, averaged."""
        B = len(words)
        n = self.config.n
        pol = softmax(logits.astype(np.float64), axis=1)
        r = rewards * (lr / B)
        coef = -pol * r[:, None]
        coef[np.arange(B), senses] += r
        q_word_rows = self.params.Q[words].astype(np.float64)  # (B, n, d) pre-update
        rows_q = ((words * n)[:, None] + np.arange(n)[None, :]).ravel()
        deltas_q = (coef[:, :, None] * csums[:, None, :].astype(np.float64))
        np.add.at(self.params.q_flat(), rows_q,
                  deltas_q.reshape(B * n, -1).astype(np.float32))
        d_p = np.einsum("bn,bnd->bd", coef, q_word_rows).astype(np.float32)
        self._scatter_context(ctx_idx, ctx_mask, d_p)

    # -- public entry points -------------------------------------------------

    def train_step(self, sample: CollocationSample,
                   rng: np.random.Generator) -> TrainStats:
        """Process one sample (a batch of one); returns the running stats."""
        self._process_batch([sample], rng)
        return self.stats()

    def train_epoch(self, corpus_path: str, epoch: int = 0,
                    on_progress: Optional[Callable[[TrainStats], None]] = None,
                    ) -> TrainStats:
        cfg = self.config
        if cfg.threads > 1:
            self._train_epoch_relaxed(corpus_path, epoch)
        else:
            rng = np.random.default_rng([cfg.seed, 11, epoch])
            stream_seed = int(np.random.SeedSequence(
                [cfg.seed, 23, epoch]).generate_state(1)[0])
            stream = stream_samples(
                corpus_path, self.vocab, cfg.m, cfg.subsample_t, stream_seed,
                all_offsets=cfg.all_offsets,
                min_sentence_tokens=cfg.min_sentence_tokens,
                lowercase=cfg.lowercase)
            next_report = self._next_progress_mark()
            for batch in _batches(stream, cfg.batch_size):
                self._process_batch(batch, rng)
                if next_report is not None and self._seen >= next_report:
                    if on_progress is not None:
                        on_progress(self.stats())
                    next_report = self._next_progress_mark()
        if not self.params.all_finite():
            raise TrainingError(f"non-finite parameter after epoch {epoch}")
        return self.stats()

    def _next_progress_mark(self) -> Optional[int]:
        interval = self.config.progress_interval
        if interval <= 0:
            return None
        return (self._seen // interval + 1) * interval

    def _train_epoch_relaxed(self, corpus_path: str, epoch: int) -> None:
        """Shard the corpus by byte ranges across lock-free worker threads.

        Updates race benignly on shared tensors; counters are merged into
        the trainer under the interpreter lock when each worker finishes.
        """
        import os
        import threading

        cfg = self.config
        size = os.path.getsize(corpus_path)
        bounds = [size * i // cfg.threads for i in range(cfg.threads + 1)]
        errors: list[Exception] = []

        def worker(shard: int) -> None:
            rng = np.random.default_rng([cfg.seed, 11, epoch, shard])
            stream_seed = int(np.random.SeedSequence(
                [cfg.seed, 23, epoch, shard]).generate_state(1)[0])
            stream = stream_samples(
                corpus_path, self.vocab, cfg.m, cfg.subsample_t, stream_seed,
                all_offsets=cfg.all_offsets,
                min_sentence_tokens=cfg.min_sentence_tokens,
                lowercase=cfg.lowercase,
                byte_range=(bounds[shard], bounds[shard + 1]))
            try:
                for batch in _batches(stream, cfg.batch_size):
                    self._process_batch(batch, rng)
            except Exception as exc:  # noqa: BLE001 - surfaced after join
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i,))
                   for i in range(cfg.threads)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]

    def train(self, corpus_path: str,
              on_progress: Optional[Callable[[TrainStats], None]] = None,
              checkpoint_path: Optional[str] = None) -> TrainStats:
        cfg = self.config
        next_ckpt = cfg.checkpoint_interval if cfg.checkpoint_interval > 0 else None
        for epoch in range(cfg.epochs):
            self.train_epoch(corpus_path, epoch, on_progress=on_progress)
            if (next_ckpt is not None and checkpoint_path is not None
                    and self._seen >= next_ckpt):
                save_model(self.params, self.vocab,
                           f"{checkpoint_path}.ckpt{epoch}", cfg.to_dict())
                next_ckpt += cfg.checkpoint_interval
        return self.stats()


# ---------------------------------------------------------------------------
# per-sample selector updates (also the reference for the batched phase 3)
# ---------------------------------------------------------------------------

def policy_gradient_update(z_ik: SenseRef, reward: float,
                           window: ContextWindow, params: ModelParams,
                           lr: float) -> None:
    """One REINFORCE ascent step: lr * reward * grad log pi(z_ik | context).

    The softmax couples every sense of the word, so all n rows of Q move;
    the context gradient is distributed to each context word's P row. The
    reward is a constant here; nothing flows back into U or V.
    """
    from .selection import encode_context

    c = encode_context(window, params)
    logits = score_batch(params, np.array([z_ik.word]), c[None, :])[0]
    pol = softmax(logits.astype(np.float64))
    scale = lr * reward
    coef = -pol * scale
    coef[z_ik.sense] += scale
    q_word = params.Q[z_ik.word].astype(np.float64)  # pre-update copy
    params.Q[z_ik.word] += (coef[:, None] * c.astype(np.float64)[None, :]
                            ).astype(np.float32)
    d_p = (coef @ q_word).astype(np.float32)
    for j in window.left + window.right:
        params.P[j] += d_p


def qlearning_update(z_ik: SenseRef, target_prob: float,
                     window: ContextWindow, params: ModelParams,
                     lr: float) -> None:
    """One cross-entropy descent step on the selected sense only.

    The gradient with respect to the logit is (q - p); unselected senses'
    rows are untouched because each sense's estimate is independent.
    """
    from .selection import encode_context

    c = encode_context(window, params)
    logit = float(score_batch(params, np.array([z_ik.word]), c[None, :])
                  [0, z_ik.sense])
    q = sigmoid(logit)
    g = (q - target_prob) * lr
    q_row = params.Q[z_ik.word, z_ik.sense].astype(np.float64)  # pre-update
    params.Q[z_ik.word, z_ik.sense] -= (g * c.astype(np.float64)
                                        ).astype(np.float32)
    d_p = (-g * q_row).astype(np.float32)
    for j in window.left + window.right:
        params.P[j] += d_p


# ---------------------------------------------------------------------------
# diagnostic: the doubly-stochastic-gradient pathology
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticTrace:
    """Per-step snapshots (pre-update) of a frozen-reward selector run."""

    selected: np.ndarray  # (steps,) chosen sense per step
    probs: np.ndarray     # (steps, n) policy (policy gradient) or q-values


def run_appendix_a_diagnostic(params: ModelParams, config: TrainingConfig,
                              steps: int,
                              frozen_rewards: Optional[np.ndarray] = None,
                              window: Optional[ContextWindow] = None,
                              ) -> DiagnosticTrace:
    """Repeatedly update the selector on one fixed context with frozen rewards.

    Representation updates are disabled: the per-sense rewards are constants
    standing in for a frozen collocation estimate. Selection is the argmax
    at every step so the trace is deterministic. Under the pure REINFORCE
    update with strictly negative rewards the top policy probability decays
    toward 1/n even though the selected sense never stops being the best
    available; under Q-learning a dominating reward keeps the greedy argmax
    fixed.
    """
    from .selection import score_senses

    config = config.validate()
    n = params.n
    if window is None:
        other = 1 if params.vocab_size > 1 else 0
        window = ContextWindow(target=0, left=[other], right=[], m=config.m)
    if frozen_rewards is None:
        if config.learner is Learner.POLICY_GRADIENT:
            frozen_rewards = np.full(n, -1.0)
        else:
            frozen_rewards = np.full(n, 0.1)
            frozen_rewards[0] = 0.9
    frozen_rewards = np.asarray(frozen_rewards, dtype=np.float64)
    if len(frozen_rewards) != n:
        raise ConfigError("frozen_rewards must have one entry per sense")

    selected = np.empty(steps, dtype=np.int64)
    probs = np.empty((steps, n), dtype=np.float64)
    for step in range(steps):
        scores = score_senses(window, params)
        if config.learner is Learner.POLICY_GRADIENT:
            probs[step] = scores.policy
        else:
            probs[step] = scores.qvalues
        k = int(np.argmax(probs[step]))
        selected[step] = k
        ref = SenseRef.of(scores.word, k, n)
        if config.learner is Learner.POLICY_GRADIENT:
            policy_gradient_update(ref, float(frozen_rewards[k]), window,
                                   params, config.lr0)
        else:
            qlearning_update(ref, float(frozen_rewards[k]), window,
                             params, config.lr0)
    return DiagnosticTrace(selected=selected, probs=probs)
