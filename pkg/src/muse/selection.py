"""Sense selection: context encoding, policy/Q-value scoring, strategies.

Scoring is linear: a word's sense logits are dot products between its Q
rows and the sum of context word embeddings. The softmax of the logits is
the selection policy; the sigmoid of each logit is that sense's independent
Q-value. Both share the argmax, so Greedy never needs to care which one it
reads.

The per-sample functions below are thin wrappers over batched kernels so
that batch training, sequence decoding, and the single-sample API all run
the exact same arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import ContextWindow
from .params import ModelParams, SenseRef
from .util import sigmoid, softmax


class StrategyKind(enum.Enum):
    GREEDY = "greedy"
    EPSILON_GREEDY = "egreedy"
    BOLTZMANN = "boltzmann"
    POLICY_SAMPLE = "sample"


@dataclass(frozen=True)
class Strategy:
    """How a sense is picked from its scores. epsilon only matters for egreedy."""

    kind: StrategyKind
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


@dataclass
class SelectionScores:
    word: int
    logits: np.ndarray   # (n,) float64
    policy: np.ndarray   # (n,) softmax of logits
    qvalues: np.ndarray  # (n,) sigmoid of logits


# ---------------------------------------------------------------------------
# batched kernels
# ---------------------------------------------------------------------------

def pack_windows(windows: Sequence[ContextWindow], m: int
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad windows into (B, 2m) id and mask arrays plus the target ids."""
    B = len(windows)
    idx = np.full((B, 2 * m), -1, dtype=np.int64)
    words = np.empty(B, dtype=np.int64)
    for i, w in enumerate(windows):
        words[i] = w.target
        ids = w.left + w.right
        if ids:
            idx[i, :len(ids)] = ids
    mask = (idx >= 0).astype(np.float32)
    return words, idx, mask


def context_sums(P: np.ndarray, idx: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """(B, d) sums of context word embeddings; padded slots contribute zero."""
    rows = P[np.maximum(idx, 0)]
    return (rows * mask[:, :, None]).sum(axis=1)


def score_batch(params: ModelParams, words: np.ndarray, csums: np.ndarray) -> np.ndarray:
    """(B, n) float32 logits for every sense of each word."""
    return np.einsum("bnd,bd->bn", params.Q[words], csums)


def select_batch(logits: np.ndarray, strategy: Strategy,
                 rng: np.random.Generator) -> np.ndarray:
    """Pick one sense per row. Sampling strategies consume a fixed number of
    uniforms per row so single-sample and batched paths stay bit-compatible."""
    B, n = logits.shape
    kind = strategy.kind
    if kind is StrategyKind.GREEDY:
        return logits.argmax(axis=1)
    if kind is StrategyKind.EPSILON_GREEDY:
        u_explore = rng.random(B)
        u_pick = rng.random(B)
        random_sense = np.minimum((u_pick * n).astype(np.int64), n - 1)
        return np.where(u_explore < strategy.epsilon, random_sense,
                        logits.argmax(axis=1))
    # Boltzmann and policy sampling both draw from the softmax policy.
    pol = softmax(logits, axis=1)
    cum = np.cumsum(pol, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(B)
    return (u[:, None] < cum).argmax(axis=1)


# ---------------------------------------------------------------------------
# per-sample API
# ---------------------------------------------------------------------------

def encode_context(window: ContextWindow, params: ModelParams) -> np.ndarray:
    """Sum of P rows over the window's context words (target excluded)."""
    _, idx, mask = pack_windows([window], window.m)
    return context_sums(params.P, idx, mask)[0]


def score_senses(window: ContextWindow, params: ModelParams) -> SelectionScores:
    words, idx, mask = pack_windows([window], window.m)
    csum = context_sums(params.P, idx, mask)
    logits = score_batch(params, words, csum)[0].astype(np.float64)
    return SelectionScores(
        word=int(words[0]),
        logits=logits,
        policy=softmax(logits),
        qvalues=sigmoid(logits),
    )


def select_sense(scores: SelectionScores, strategy: Strategy,
                 rng: np.random.Generator) -> SenseRef:
    n = len(scores.logits)
    sense = int(select_batch(scores.logits[None, :], strategy, rng)[0])
    return SenseRef.of(scores.word, sense, n)


def decode_sequence(tokens: Sequence[int], params: ModelParams, m: int,
                    chunk: int = 8192) -> list[SenseRef]:
    """Greedy sense decoding of a token sequence, linear in its length.

    Each position gets the +-m window around it (truncated at the sequence
    ends) and the argmax sense independently, processed in chunks of
    vectorized scoring.
    """
    toks = np.asarray(tokens, dtype=np.int64)
    L = len(toks)
    n = params.n
    if L == 0:
        return []
    offs = np.concatenate([np.arange(-m, 0), np.arange(1, m + 1)])
    out = np.empty(L, dtype=np.int64)
    for a in range(0, L, chunk):
        b = min(a + chunk, L)
        pos = np.arange(a, b)
        idx = pos[:, None] + offs[None, :]
        mask = ((idx >= 0) & (idx < L)).astype(np.float32)
        ctx_ids = np.where(mask > 0, toks[np.clip(idx, 0, L - 1)], -1)
        csums = context_sums(params.P, ctx_ids, mask)
        logits = score_batch(params, toks[a:b], csums)
        out[a:b] = logits.argmax(axis=1)
    return [SenseRef.of(int(w), int(k), n) for w, k in zip(toks, out)]
