"""Sense-level skip-gram with negative sampling, and the reward functions.

Three collocation estimates appear here:

  exact      full softmax over every sense (diagnostic only, cost-guarded)
  approx     negative-sampling objective; its realized value doubles as the
             policy-gradient reward
  bernoulli  sigmoid of the single sense-pair dot product; the cheap,
             zero-variance Q-learning reward

The batch gradient kernel has a compiled fast path (numba) and a plain
numpy reference; both compute the gradient of the realized objective at the
pre-update parameters and then apply it, so duplicate negative rows
accumulate additively.
"""

from __future__ import annotations

import enum

import numpy as np

from .corpus import UnigramTable
from .errors import ConfigError, TrainingError
from .params import ModelParams, SenseRef
from .util import log_sigmoid, sigmoid

EXACT_COST_GUARD = 10_000  # max flat senses for the full-softmax estimate
_REDRAW_CAP = 1000

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


class RewardKind(enum.Enum):
    APPROX_LOG_LIK = "approx"     # realized negative-sampling value
    BERNOULLI = "bernoulli"       # sigmoid(U.V), default for Q-learning
    EXACT_CATEGORICAL = "exact"   # diagnostic oracle, never a training reward


def reward_bernoulli(target: SenseRef, colloc: SenseRef,
                     params: ModelParams) -> float:
    """P(colloc collocates | target) as a Bernoulli: sigmoid of one dot product."""
    return float(sigmoid(float(
        np.dot(params.U[target.flat].astype(np.float64),
               params.V[colloc.flat].astype(np.float64))
    )))


def reward_exact(target: SenseRef, colloc: SenseRef,
                 params: ModelParams) -> float:
    """Full categorical collocation probability over every sense.

    Enumerates all |W|*n senses, so it is restricted to small models and
    used as an ordering oracle, never as a training reward.
    """
    n_senses = params.U.shape[0]
    if n_senses > EXACT_COST_GUARD:
        raise ConfigError(
            f"exact collocation estimate needs <= {EXACT_COST_GUARD} senses, got {n_senses}"
        )
    scores = params.V.astype(np.float64) @ params.U[target.flat].astype(np.float64)
    scores -= scores.max()
    e = np.exp(scores)
    return float(e[colloc.flat] / e.sum())


def draw_negatives(table: UnigramTable, rng: np.random.Generator, count: int,
                   exclude: np.ndarray) -> np.ndarray:
    """(B, count) negative sense draws, redrawing collisions with the positive.

    Collisions with anything else (including the target sense) are allowed,
    matching standard skip-gram practice.
    """
    exclude = np.asarray(exclude, dtype=np.int64)
    B = len(exclude)
    negs = table.sample(rng, (B, count)).astype(np.int64)
    if count == 0:
        return negs
    for _ in range(_REDRAW_CAP):
        bad = negs == exclude[:, None]
        n_bad = int(bad.sum())
        if n_bad == 0:
            return negs
        negs[bad] = table.sample(rng, n_bad).astype(np.int64)
    raise TrainingError("could not draw negatives distinct from the positive sense")


def _sgns_batch_numpy(U, V, t_flat, c_flat, negs, lr):
    """Reference batch kernel: sequential per-sample gradient steps.

    Preserves the dtype of U/V, so float64 copies of the tensors can be
    used for clean gradient checks.
    """
    B, M = negs.shape
    values = np.empty(B, dtype=np.float64)
    rewards = np.empty(B, dtype=np.float64)
    rows = np.empty(M + 1, dtype=np.int64)
    for i in range(B):
        rows[0] = c_flat[i]
        rows[1:] = negs[i]
        u = U[t_flat[i]].astype(np.float64)
        vr = V[rows]
        dots = vr.astype(np.float64) @ u
        sig = sigmoid(dots)
        values[i] = log_sigmoid(dots[0]) + log_sigmoid(-dots[1:]).sum()
        rewards[i] = sig[0]
        coeff = (-sig * lr)
        coeff[0] += lr
        U[t_flat[i]] += (coeff @ vr).astype(U.dtype)
        np.add.at(V, rows, np.outer(coeff, u).astype(V.dtype))
    return values, rewards


if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _sgns_batch_numba(U, V, t_flat, c_flat, negs, lr):  # pragma: no cover
        B, M = negs.shape
        d = U.shape[1]
        values = np.empty(B, dtype=np.float64)
        rewards = np.empty(B, dtype=np.float64)
        rows = np.empty(M + 1, dtype=np.int64)
        coeff = np.empty(M + 1, dtype=np.float64)
        u = np.empty(d, dtype=np.float32)
        du = np.empty(d, dtype=np.float64)
        for i in range(B):
            t = t_flat[i]
            rows[0] = c_flat[i]
            for j in range(M):
                rows[j + 1] = negs[i, j]
            for a in range(d):
                u[a] = U[t, a]
            val = 0.0
            for j in range(M + 1):
                r = rows[j]
                dot = 0.0
                for a in range(d):
                    dot += np.float64(u[a]) * np.float64(V[r, a])
                if dot >= 0.0:
                    sig = 1.0 / (1.0 + np.exp(-dot))
                    ls_pos = -np.log1p(np.exp(-dot))
                    ls_neg = -dot - np.log1p(np.exp(-dot))
                else:
                    e = np.exp(dot)
                    sig = e / (1.0 + e)
                    ls_pos = dot - np.log1p(e)
                    ls_neg = -np.log1p(e)
                if j == 0:
                    val += ls_pos
                    rewards[i] = sig
                    coeff[0] = (1.0 - sig) * lr
                else:
                    val += ls_neg
                    coeff[j] = -sig * lr
            values[i] = val
            for a in range(d):
                du[a] = 0.0
            for j in range(M + 1):
                r = rows[j]
                cj = coeff[j]
                for a in range(d):
                    du[a] += cj * np.float64(V[r, a])
            for j in range(M + 1):
                r = rows[j]
                cj = coeff[j]
                for a in range(d):
                    V[r, a] += np.float32(cj * np.float64(u[a]))
            for a in range(d):
                U[t, a] += np.float32(du[a])
        return values, rewards


def sgns_batch(params: ModelParams, t_flat: np.ndarray, c_flat: np.ndarray,
               negs: np.ndarray, lr: float, *, use_numba: bool = True
               ) -> tuple[np.ndarray, np.ndarray]:
    """One gradient ascent step per sample on the realized objective.

    Returns (values, rewards): the pre-update realized log-likelihood of
    each sample and the pre-update sigmoid of its positive dot product.
    """
    t_flat = np.ascontiguousarray(t_flat, dtype=np.int64)
    c_flat = np.ascontiguousarray(c_flat, dtype=np.int64)
    negs = np.ascontiguousarray(negs, dtype=np.int64)
    if use_numba and HAVE_NUMBA:
        return _sgns_batch_numba(params.U, params.V, t_flat, c_flat, negs,
                                 float(lr))
    return _sgns_batch_numpy(params.U, params.V, t_flat, c_flat, negs,
                             float(lr))


def sgns_update(target: SenseRef, colloc: SenseRef, params: ModelParams,
                table: UnigramTable, negatives: int, lr: float,
                rng: np.random.Generator) -> float:
    """Single-sample skip-gram update; returns the pre-update realized value.

    Draws ``negatives`` senses from the table (redrawn on collision with the
    positive), then updates U[target], V[colloc] and the negative V rows.
    """
    negs = draw_negatives(table, rng, negatives, np.array([colloc.flat]))
    values, _ = _sgns_batch_numpy(
        params.U, params.V,
        np.array([target.flat], dtype=np.int64),
        np.array([colloc.flat], dtype=np.int64),
        negs, float(lr),
    )
    value = float(values[0])
    if not np.isfinite(value):
        raise TrainingError("non-finite collocation value during update")
    return value
