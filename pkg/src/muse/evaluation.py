"""Evaluation: contextual similarity, synonym selection, sense neighbors.

Contextual similarity follows the two standard estimates: MaxSimC compares
only the most probable sense of each word given its context, AvgSimC
weights every sense pair by the two selection policies. Both are reported
as Spearman rank correlation against human judgements. Out-of-vocabulary
items are skipped and counted rather than backed off.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import ContextWindow, Vocabulary
from .errors import FormatError
from .params import ModelParams, SenseRef
from .selection import score_senses
from .util import sigmoid


@dataclass
class ScwsItem:
    word_i: str
    word_j: str
    tokens_i: list[str]
    target_i: int
    tokens_j: list[str]
    target_j: int
    human_score: float


@dataclass
class SynonymQuestion:
    question: str
    candidates: list[str]
    answer_index: int


@dataclass
class ScwsReport:
    max_rho: float
    avg_rho: float
    scored: int
    skipped: int


_TAG = re.compile(r"</?b>")


def _parse_marked_context(text: str, word: str) -> tuple[list[str], int]:
    """Split a context, locate the <b>...</b> target, strip the markup.

    Handles both ``<b>word</b>`` attached to the token and tags standing as
    their own tokens.
    """
    tokens = text.split()
    target = -1
    pending = False  # a bare <b> token marks the next real token
    clean = []
    for tok in tokens:
        has_open = "<b>" in tok
        stripped = _TAG.sub("", tok)
        if stripped:
            if has_open or pending:
                if target >= 0:
                    raise FormatError("context marks more than one target token")
                target = len(clean)
                pending = False
            clean.append(stripped)
        elif has_open:
            pending = True
    if target < 0:
        raise FormatError("context has no <b>...</b> target")
    if clean[target].lower() != word.lower():
        raise FormatError(
            f"marked token {clean[target]!r} does not match word {word!r}")
    return clean, target


def load_scws(path: str) -> list[ScwsItem]:
    """Parse the tab-separated contextual-similarity format.

    Columns: id, word1, POS1, word2, POS2, context1, context2, mean rating,
    then individual ratings (ignored). Targets are marked <b>word</b>.
    """
    items = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) < 8:
                raise FormatError(f"line {line_no}: expected >= 8 columns")
            word_i, word_j = cols[1], cols[3]
            toks_i, tgt_i = _parse_marked_context(cols[5], word_i)
            toks_j, tgt_j = _parse_marked_context(cols[6], word_j)
            items.append(ScwsItem(
                word_i=word_i, word_j=word_j,
                tokens_i=toks_i, target_i=tgt_i,
                tokens_j=toks_j, target_j=tgt_j,
                human_score=float(cols[7]),
            ))
    return items


def _window_from_tokens(tokens: Sequence[str], target_pos: int,
                        vocab: Vocabulary, m: int,
                        lowercase: bool = True) -> Optional[ContextWindow]:
    """Build the +-m window around a marked token, dropping OOV tokens first.

    Mirrors training: OOV removal happens before windowing, so surviving
    tokens become adjacent. Returns None when the target itself is OOV.
    """
    ids = []
    target_idx = -1
    for i, tok in enumerate(tokens):
        wid = vocab.id_of(tok.lower() if lowercase else tok)
        if i == target_pos:
            if wid < 0:
                return None
            target_idx = len(ids)
        if wid >= 0:
            ids.append(wid)
    return ContextWindow(
        target=ids[target_idx],
        left=ids[max(0, target_idx - m):target_idx],
        right=ids[target_idx + 1:target_idx + 1 + m],
        m=m,
    )


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def max_sim_c(item: ScwsItem, params: ModelParams, vocab: Vocabulary,
              m: int = 5) -> Optional[float]:
    """Cosine between the most probable sense of each word in its context."""
    win_i = _window_from_tokens(item.tokens_i, item.target_i, vocab, m)
    win_j = _window_from_tokens(item.tokens_j, item.target_j, vocab, m)
    if win_i is None or win_j is None:
        return None
    n = params.n
    k = int(np.argmax(score_senses(win_i, params).policy))
    l = int(np.argmax(score_senses(win_j, params).policy))
    return _cosine(params.U[win_i.target * n + k],
                   params.U[win_j.target * n + l])


def avg_sim_c(item: ScwsItem, params: ModelParams, vocab: Vocabulary,
              m: int = 5) -> Optional[float]:
    """Policy-weighted average cosine over every sense pair."""
    win_i = _window_from_tokens(item.tokens_i, item.target_i, vocab, m)
    win_j = _window_from_tokens(item.tokens_j, item.target_j, vocab, m)
    if win_i is None or win_j is None:
        return None
    n = params.n
    pol_i = score_senses(win_i, params).policy
    pol_j = score_senses(win_j, params).policy
    total = 0.0
    for k in range(n):
        for l in range(n):
            total += pol_i[k] * pol_j[l] * _cosine(
                params.U[win_i.target * n + k], params.U[win_j.target * n + l])
    return total


def _rank(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    values = np.asarray(values, dtype=np.float64)
    _, inverse, counts = np.unique(values, return_inverse=True,
                                   return_counts=True)
    starts = np.cumsum(counts) - counts
    avg = starts + (counts + 1) / 2.0
    return avg[inverse]


def spearman(model_scores: Sequence[float],
             human_scores: Sequence[float]) -> float:
    """Tie-corrected Spearman correlation (Pearson on average ranks).

    Returns nan when either sequence has zero rank variance.
    """
    x = np.asarray(model_scores, dtype=np.float64)
    y = np.asarray(human_scores, dtype=np.float64)
    if len(x) != len(y) or len(x) == 0:
        raise ValueError("score sequences must have equal nonzero length")
    rx = _rank(x)
    ry = _rank(y)
    sx = rx.std()
    sy = ry.std()
    if sx == 0.0 or sy == 0.0:
        return float("nan")
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


def evaluate_scws(items: Sequence[ScwsItem], params: ModelParams,
                  vocab: Vocabulary, m: int = 5) -> ScwsReport:
    max_scores, avg_scores, human = [], [], []
    skipped = 0
    for item in items:
        ms = max_sim_c(item, params, vocab, m)
        if ms is None:
            skipped += 1
            continue
        max_scores.append(ms)
        avg_scores.append(avg_sim_c(item, params, vocab, m))
        human.append(item.human_score)
    if not max_scores:
        return ScwsReport(float("nan"), float("nan"), 0, skipped)
    return ScwsReport(
        max_rho=spearman(max_scores, human),
        avg_rho=spearman(avg_scores, human),
        scored=len(max_scores),
        skipped=skipped,
    )


def load_synonym_questions(path: str) -> list[SynonymQuestion]:
    """Parse ``question | candA candB candC candD | answer_letter`` lines."""
    questions = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split("|")]
            if len(parts) != 3:
                raise FormatError(f"line {line_no}: expected 3 |-separated fields")
            candidates = parts[1].split()
            if len(candidates) != 4:
                raise FormatError(f"line {line_no}: expected 4 candidates")
            letter = parts[2].upper()
            if letter not in "ABCD" or len(letter) != 1:
                raise FormatError(f"line {line_no}: bad answer letter {parts[2]!r}")
            questions.append(SynonymQuestion(
                question=parts[0],
                candidates=candidates,
                answer_index="ABCD".index(letter),
            ))
    return questions


def answer_synonym(question: SynonymQuestion, params: ModelParams,
                   vocab: Vocabulary) -> Optional[int]:
    """Pick the candidate with the highest max sense-pair cosine.

    Returns None when the question word (or every candidate) is OOV; OOV
    candidates score -inf. Ties go to the lowest candidate index.
    """
    n = params.n
    q_id = vocab.id_of(question.question.lower())
    if q_id < 0:
        return None
    q_rows = params.U[q_id * n:(q_id + 1) * n]
    scores = []
    for cand in question.candidates:
        c_id = vocab.id_of(cand.lower())
        if c_id < 0:
            scores.append(float("-inf"))
            continue
        best = float("-inf")
        for k in range(n):
            for l in range(n):
                best = max(best, _cosine(q_rows[k], params.U[c_id * n + l]))
        scores.append(best)
    if all(s == float("-inf") for s in scores):
        return None
    return int(np.argmax(scores))


def evaluate_synonyms(questions: Sequence[SynonymQuestion],
                      params: ModelParams, vocab: Vocabulary
                      ) -> tuple[float, int, int]:
    """Accuracy over answerable questions; returns (accuracy, skipped, total)."""
    correct = 0
    answered = 0
    skipped = 0
    for q in questions:
        choice = answer_synonym(q, params, vocab)
        if choice is None:
            skipped += 1
            continue
        answered += 1
        if choice == q.answer_index:
            correct += 1
    accuracy = correct / answered if answered else float("nan")
    return accuracy, skipped, len(questions)


def knn_senses(query: SenseRef, params: ModelParams, vocab: Vocabulary,
               k: int, metric: str = "collocation"
               ) -> list[tuple[SenseRef, float]]:
    """k nearest senses to the query sense.

    metric='collocation' ranks by the collocation likelihood
    sigmoid(U[query] . V[z]); metric='cosine' ranks by cosine over U rows.
    The query word's own senses are excluded; ties break by flat index.
    """
    n = params.n
    u = params.U[query.flat].astype(np.float64)
    if metric == "collocation":
        scores = sigmoid(params.V.astype(np.float64) @ u)
    elif metric == "cosine":
        mat = params.U.astype(np.float64)
        norms = np.linalg.norm(mat, axis=1)
        qn = np.linalg.norm(u)
        denom = np.where((norms == 0) | (qn == 0), 1.0, norms * qn)
        scores = np.where((norms == 0) | (qn == 0), 0.0, mat @ u / denom)
    else:
        raise ValueError("metric must be 'collocation' or 'cosine'")
    scores = np.asarray(scores, dtype=np.float64)
    own = np.arange(query.word * n, (query.word + 1) * n)
    scores[own] = float("-inf")
    flat = np.arange(len(scores))
    order = np.lexsort((flat, -scores))
    out = []
    for idx in order[:k]:
        out.append((SenseRef.from_flat(int(idx), n), float(scores[idx])))
    return out
