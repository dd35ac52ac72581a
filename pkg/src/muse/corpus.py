"""Corpus streaming, vocabulary construction, and the negative-sampling table.

The corpus contract is deliberately narrow: UTF-8 plain text, one sentence
per line, whitespace-tokenized. Everything downstream (windowing, negative
sampling, pseudoword synthesis) builds on word ids from a frozen Vocabulary.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigError

OOV = -1  # skip sentinel for tokens dropped from the vocabulary

DEFAULT_MIN_SENTENCE_TOKENS = 10
DEFAULT_SUBSAMPLE_T = 1e-4
DEFAULT_POWER = 0.75


@dataclass
class Vocabulary:
    """Frozen word inventory with counts.

    Ids are assigned by descending frequency (ties broken lexicographically),
    so id 0 is always the most frequent retained word. ``total_tokens`` is
    the mass of retained words only; tokens removed by the ``min_count``
    cutoff are tracked in ``dropped_tokens``.
    """

    words: list[str]
    counts: np.ndarray            # int64, aligned with words
    word_to_id: dict[str, int]
    total_tokens: int
    min_count: int
    dropped_tokens: int = 0

    def __len__(self) -> int:
        return len(self.words)

    def id_of(self, word: str) -> int:
        """Id of ``word``, or the OOV sentinel if it was not retained."""
        return self.word_to_id.get(word, OOV)

    def save(self, path: str) -> None:
        """Write the ``word<TAB>count`` text format (id = line number)."""
        with open(path, "w", encoding="utf-8") as f:
            for word, count in zip(self.words, self.counts):
                f.write(f"{word}\t{int(count)}\n")

    @classmethod
    def from_items(cls, items: dict[str, int] | Counter, min_count: int,
                   dropped_tokens: int = 0) -> "Vocabulary":
        kept = sorted(
            ((w, c) for w, c in items.items() if c >= min_count),
            key=lambda wc: (-wc[1], wc[0]),
        )
        if not kept:
            raise ConfigError(
                f"no word reaches min_count={min_count}; vocabulary is empty"
            )
        words = [w for w, _ in kept]
        counts = np.array([c for _, c in kept], dtype=np.int64)
        word_to_id = {w: i for i, w in enumerate(words)}
        return cls(
            words=words,
            counts=counts,
            word_to_id=word_to_id,
            total_tokens=int(counts.sum()),
            min_count=min_count,
            dropped_tokens=dropped_tokens,
        )


@dataclass
class ContextWindow:
    """Local context of one token: up to ``m`` retained ids on each side."""

    target: int
    left: list[int]
    right: list[int]
    m: int


@dataclass
class CollocationSample:
    """A (target, collocated word) draw with both local contexts."""

    target_window: ContextWindow
    colloc_window: ContextWindow
    offset: int  # position of the collocated word relative to the target


@dataclass
class UnigramTable:
    """Cumulative distribution over flat sense ids for negative sampling.

    Word-level unigram counts raised to ``power`` are normalized over the
    vocabulary, then each word's mass is split evenly across its senses.
    Sampling is a binary search on the cumulative array.
    """

    cumulative: np.ndarray  # float64, non-decreasing, last entry ~1.0
    power: float
    senses_per_word: int

    def __len__(self) -> int:
        return len(self.cumulative)

    def probabilities(self) -> np.ndarray:
        return np.diff(self.cumulative, prepend=0.0)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        u = rng.random(size)
        idx = np.searchsorted(self.cumulative, u, side="right")
        return np.minimum(idx, len(self.cumulative) - 1)


def build_vocabulary(corpus_path: str, min_count: int, *,
                     min_sentence_tokens: int = DEFAULT_MIN_SENTENCE_TOKENS,
                     lowercase: bool = False) -> Vocabulary:
    """Count tokens in one pass and keep words with count >= min_count.

    Sentences shorter than ``min_sentence_tokens`` raw tokens are ignored
    entirely (pass 0 to disable). Raises ConfigError when nothing survives
    the cutoff.
    """
    counter: Counter = Counter()
    with open(corpus_path, "r", encoding="utf-8") as f:
        for line in f:
            if lowercase:
                line = line.lower()
            tokens = line.split()
            if min_sentence_tokens and len(tokens) < min_sentence_tokens:
                continue
            counter.update(tokens)
    dropped = sum(c for c in counter.values() if c < min_count)
    return Vocabulary.from_items(counter, min_count, dropped_tokens=dropped)


def keep_probability(word: int, vocab: Vocabulary, threshold: float) -> float:
    """Probability of keeping ``word`` under frequency subsampling.

    Uses the (sqrt(f/t) + 1) * (t/f) form with f the word's corpus
    frequency, clipped to 1.
    """
    f = vocab.counts[word] / vocab.total_tokens
    if f <= 0.0:
        return 0.0
    return min(1.0, (math.sqrt(f / threshold) + 1.0) * (threshold / f))


def keep_probabilities(vocab: Vocabulary, threshold: Optional[float]) -> Optional[np.ndarray]:
    """Vector of keep probabilities for every retained word (None = disabled)."""
    if threshold is None or threshold <= 0 or math.isinf(threshold):
        return None
    f = vocab.counts.astype(np.float64) / vocab.total_tokens
    kp = (np.sqrt(f / threshold) + 1.0) * (threshold / f)
    return np.minimum(kp, 1.0)


def build_negative_table(vocab: Vocabulary, senses_per_word: int,
                         power: float = DEFAULT_POWER) -> UnigramTable:
    """Smoothed word unigram split uniformly over each word's senses."""
    if senses_per_word < 1:
        raise ConfigError("senses_per_word must be >= 1")
    if not 0.0 < power <= 1.0:
        raise ConfigError("power must lie in (0, 1]")
    mass = vocab.counts.astype(np.float64) ** power
    mass /= mass.sum()
    sense_mass = np.repeat(mass / senses_per_word, senses_per_word)
    return UnigramTable(
        cumulative=np.cumsum(sense_mass),
        power=power,
        senses_per_word=senses_per_word,
    )


def _window(seq: Sequence[int], t: int, m: int) -> ContextWindow:
    return ContextWindow(
        target=seq[t],
        left=list(seq[max(0, t - m):t]),
        right=list(seq[t + 1:t + 1 + m]),
        m=m,
    )


def stream_samples(corpus_path: str, vocab: Vocabulary, window_radius: int,
                   subsample_t: Optional[float], seed: int, *,
                   all_offsets: bool = False,
                   min_sentence_tokens: int = DEFAULT_MIN_SENTENCE_TOKENS,
                   lowercase: bool = False,
                   byte_range: Optional[tuple[int, int]] = None,
                   ) -> Iterator[CollocationSample]:
    """One pass over the corpus emitting collocation samples.

    Per sentence: OOV tokens and subsampling losers are removed first (the
    survivors become adjacent), then for each surviving position exactly one
    collocated position is drawn uniformly from the nonzero offsets within
    +-window_radius, truncated at sentence boundaries. ``all_offsets``
    iterates every valid offset instead. Deterministic for a given seed.

    ``byte_range=(lo, hi)`` restricts the pass to sentences whose first byte
    falls in [lo, hi), which is how parallel shards split a corpus.
    """
    rng = np.random.default_rng(seed)
    kp = keep_probabilities(vocab, subsample_t)
    m = window_radius

    with open(corpus_path, "rb") as f:
        if byte_range is not None:
            lo, hi = byte_range
            if lo > 0:
                f.seek(lo - 1)
                if f.read(1) != b"\n":
                    f.readline()  # skip the partial sentence owned by the previous shard
        else:
            hi = None

        while True:
            if hi is not None and f.tell() >= hi:
                break
            raw = f.readline()
            if not raw:
                break
            text = raw.decode("utf-8")
            if lowercase:
                text = text.lower()
            tokens = text.split()
            if min_sentence_tokens and len(tokens) < min_sentence_tokens:
                continue
            ids = [vocab.word_to_id[t] for t in tokens if t in vocab.word_to_id]
            if kp is not None and ids:
                u = rng.random(len(ids))
                ids = [w for w, uu in zip(ids, u) if uu < kp[w]]
            L = len(ids)
            if L < 2:
                continue
            if all_offsets:
                for t in range(L):
                    lo_t = max(0, t - m)
                    hi_t = min(L - 1, t + m)
                    for tp in range(lo_t, hi_t + 1):
                        if tp == t:
                            continue
                        yield CollocationSample(
                            target_window=_window(ids, t, m),
                            colloc_window=_window(ids, tp, m),
                            offset=tp - t,
                        )
            else:
                lo_t = np.maximum(0, np.arange(L) - m)
                hi_t = np.minimum(L - 1, np.arange(L) + m)
                n_valid = hi_t - lo_t  # window size minus the target itself
                draws = rng.integers(0, n_valid)
                for t in range(L):
                    tp = lo_t[t] + draws[t]
                    if tp >= t:
                        tp += 1
                    yield CollocationSample(
                        target_window=_window(ids, t, m),
                        colloc_window=_window(ids, int(tp), m),
                        offset=int(tp) - t,
                    )


@dataclass
class MergeReport:
    """Outcome of a pseudoword merge: per-pair rewrite counts and file paths."""

    out_path: str
    labels_path: str
    counts: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def total_rewritten(self) -> int:
        return sum(c for per in self.counts.values() for c in per.values())


def make_pseudoword_corpus(corpus_path: str,
                           merge_pairs: Sequence[tuple[str, str, str]],
                           out_path: str) -> MergeReport:
    """Rewrite every occurrence of each pair's source words to its pseudoword.

    A sidecar file ``<out_path>.labels`` records one
    ``position<TAB>original_word`` line per rewritten occurrence, where
    position is the global token index over the whole corpus. The ground
    truth is what makes desk-scale sense-selection scoring possible.
    """
    sources: dict[str, str] = {}
    pseudos: set[str] = set()
    for a, b, p in merge_pairs:
        if a == b:
            raise ConfigError(f"merge pair has identical source words: {a!r}")
        if p in pseudos or p in sources:
            raise ConfigError(f"pseudoword {p!r} used more than once")
        if a in sources or b in sources:
            raise ConfigError("source words must be distinct across pairs")
        sources[a] = p
        sources[b] = p
        pseudos.add(p)

    if pseudos:
        with open(corpus_path, "r", encoding="utf-8") as f:
            for line in f:
                for tok in line.split():
                    if tok in pseudos:
                        raise ConfigError(
                            f"pseudoword {tok!r} already occurs in the corpus"
                        )

    labels_path = out_path + ".labels"
    report = MergeReport(out_path=out_path, labels_path=labels_path)
    for a, b, p in merge_pairs:
        report.counts[p] = {a: 0, b: 0}

    position = 0
    with open(corpus_path, "r", encoding="utf-8") as fin, \
            open(out_path, "w", encoding="utf-8") as fout, \
            open(labels_path, "w", encoding="utf-8") as flab:
        for line in fin:
            tokens = line.split()
            out_tokens = []
            changed = False
            for tok in tokens:
                pseudo = sources.get(tok)
                if pseudo is not None:
                    flab.write(f"{position}\t{tok}\n")
                    report.counts[pseudo][tok] += 1
                    out_tokens.append(pseudo)
                    changed = True
                else:
                    out_tokens.append(tok)
                position += 1
            if changed:
                fout.write(" ".join(out_tokens) + ("\n" if line.endswith("\n") else ""))
            else:
                fout.write(line)  # untouched lines pass through byte-identical
    return report


def read_pseudoword_labels(labels_path: str) -> list[tuple[int, str]]:
    """Parse the label sidecar back into (position, original_word) pairs."""
    out = []
    with open(labels_path, "r", encoding="utf-8") as f:
        for line in f:
            pos, word = line.rstrip("\n").split("\t")
            out.append((int(pos), word))
    return out
