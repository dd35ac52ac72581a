import numpy as np
import pytest

from muse.corpus import Vocabulary
from muse.params import ModelParams, init_params


@pytest.fixture
def tiny_vocab():
    return Vocabulary.from_items({"the": 50, "cat": 20, "dog": 15, "sat": 10,
                                  "mat": 8, "ran": 6}, min_count=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_params(vocab_size, d, n, seed=0, random_qv=False):
    """Fresh parameters; optionally randomize Q and V too for generic tests."""
    params = init_params(vocab_size, d, n, seed)
    if random_qv:
        r = np.random.default_rng(seed + 1)
        params.Q = r.normal(0, 0.5, params.Q.shape).astype(np.float32)
        params.V = r.normal(0, 0.5, params.V.shape).astype(np.float32)
    return params


def params_snapshot(params: ModelParams):
    return {name: getattr(params, name).copy() for name in "PQUV"}


def assert_only_rows_changed(before, params, changed_u=(), changed_v=(),
                             q_same=True, p_same=True):
    """Check that U/V changed only on the given rows and P/Q as stated."""
    u_mask = np.ones(len(params.U), dtype=bool)
    u_mask[list(changed_u)] = False
    v_mask = np.ones(len(params.V), dtype=bool)
    v_mask[list(changed_v)] = False
    assert np.array_equal(before["U"][u_mask], params.U[u_mask])
    assert np.array_equal(before["V"][v_mask], params.V[v_mask])
    if q_same:
        assert np.array_equal(before["Q"], params.Q)
    if p_same:
        assert np.array_equal(before["P"], params.P)
