"""Model parameter tensors, initialization, flat sense indexing, persistence.

The four tensors are:
  P  (|W|, d)    context word embeddings feeding the sense selector
  Q  (|W|, n, d) selector output weights, one row per sense of each word
  U  (|W|*n, d)  input sense embeddings (the embeddings users consume)
  V  (|W|*n, d)  collocation estimation embeddings (skip-gram output side)

Senses are addressed by a flat index word*n + sense so U and V stay 2-D.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary
from .errors import FormatError

MAGIC = b"MUSE1"


@dataclass(frozen=True)
class SenseRef:
    """A (word id, sense index) pair with its flat row index into U/V."""

    word: int
    sense: int
    flat: int

    @classmethod
    def of(cls, word: int, sense: int, n: int) -> "SenseRef":
        return cls(word=word, sense=sense, flat=word * n + sense)

    @classmethod
    def from_flat(cls, flat: int, n: int) -> "SenseRef":
        return cls(word=flat // n, sense=flat % n, flat=flat)


@dataclass
class ModelParams:
    """The single mutable training state. All entries must stay finite."""

    P: np.ndarray
    Q: np.ndarray
    U: np.ndarray
    V: np.ndarray
    d: int
    n: int

    @property
    def vocab_size(self) -> int:
        return self.P.shape[0]

    def q_flat(self) -> np.ndarray:
        """Q viewed as (|W|*n, d) so sense rows can be indexed flat."""
        return self.Q.reshape(self.vocab_size * self.n, self.d)

    def all_finite(self) -> bool:
        return bool(
            np.isfinite(self.P).all() and np.isfinite(self.Q).all()
            and np.isfinite(self.U).all() and np.isfinite(self.V).all()
        )


def init_params(vocab_size: int, d: int, n: int, seed: int) -> ModelParams:
    """Zero Q and V; P and U uniform on [-sqrt(3/d), sqrt(3/d)].

    The bound makes every row's squared norm 1 in expectation regardless
    of d (at d=300 it is the familiar 0.1).
    """
    rng = np.random.default_rng(seed)
    bound = math.sqrt(3.0 / d)
    P = rng.uniform(-bound, bound, size=(vocab_size, d)).astype(np.float32)
    U = rng.uniform(-bound, bound, size=(vocab_size * n, d)).astype(np.float32)
    Q = np.zeros((vocab_size, n, d), dtype=np.float32)
    V = np.zeros((vocab_size * n, d), dtype=np.float32)
    return ModelParams(P=P, Q=Q, U=U, V=V, d=d, n=n)


def _write_tensor(f, arr: np.ndarray) -> None:
    f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_exact(f, nbytes: int, section: str) -> bytes:
    data = f.read(nbytes)
    if len(data) != nbytes:
        raise FormatError(f"model file truncated in {section} section")
    return data


def save_model(params: ModelParams, vocab: Vocabulary, path: str,
               config: dict | None = None) -> None:
    """Write the binary model container (magic MUSE1, little-endian).

    Layout: magic, u32 vocab_size/d/n, vocabulary block (u32 byte length +
    UTF-8 word + u64 count per entry), then P, Q, U, V as f32 blocks, then
    a u32-length-prefixed JSON config echo for exact reproduction.
    """
    if len(vocab) != params.vocab_size:
        raise ValueError("vocabulary size does not match parameter tensors")
    echo = json.dumps(config or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", params.vocab_size, params.d, params.n))
        for word, count in zip(vocab.words, vocab.counts):
            wb = word.encode("utf-8")
            f.write(struct.pack("<I", len(wb)))
            f.write(wb)
            f.write(struct.pack("<Q", int(count)))
        _write_tensor(f, params.P)
        _write_tensor(f, params.Q)
        _write_tensor(f, params.U)
        _write_tensor(f, params.V)
        f.write(struct.pack("<I", len(echo)))
        f.write(echo)


def load_model(path: str) -> tuple[ModelParams, Vocabulary, dict]:
    """Inverse of save_model; returns the tensors, vocabulary and config echo."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}; not a model file")
        w, d, n = struct.unpack("<III", _read_exact(f, 12, "header"))
        words = []
        counts = np.empty(w, dtype=np.int64)
        for i in range(w):
            (ln,) = struct.unpack("<I", _read_exact(f, 4, "vocabulary"))
            words.append(_read_exact(f, ln, "vocabulary").decode("utf-8"))
            (counts[i],) = struct.unpack("<Q", _read_exact(f, 8, "vocabulary"))

        def tensor(shape, name):
            nbytes = int(np.prod(shape)) * 4
            data = _read_exact(f, nbytes, name)
            return np.frombuffer(data, dtype="<f4").reshape(shape).copy()

        P = tensor((w, d), "P")
        Q = tensor((w, n, d), "Q")
        U = tensor((w * n, d), "U")
        V = tensor((w * n, d), "V")
        (clen,) = struct.unpack("<I", _read_exact(f, 4, "config"))
        config = json.loads(_read_exact(f, clen, "config").decode("utf-8"))

    vocab = Vocabulary(
        words=words,
        counts=counts,
        word_to_id={word: i for i, word in enumerate(words)},
        total_tokens=int(counts.sum()),
        min_count=int(config.get("min_count", 1)),
        dropped_tokens=int(config.get("corpus_dropped_tokens", 0)),
    )
    pp = ModelParams(P=P, Q=Q, U=U, V=V, d=int(d), n=int(n))
    return pp, vocab, config


def export_text(params: ModelParams, vocab: Vocabulary, which: str,
                path: str) -> None:
    """word2vec-style text export of one tensor.

    U and V rows are labeled ``word#k``; P rows are labeled ``word``.
    Header line is ``rows dims``.
    """
    if which not in ("U", "V", "P"):
        raise ValueError("which must be one of U, V, P")
    mat = getattr(params, which)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{mat.shape[0]} {mat.shape[1]}\n")
        for i, row in enumerate(mat):
            if which == "P":
                label = vocab.words[i]
            else:
                label = f"{vocab.words[i // params.n]}#{i % params.n}"
            f.write(label + " " + " ".join("%.6f" % x for x in row) + "\n")


def read_text_vectors(path: str) -> tuple[list[str], np.ndarray]:
    """Read a word2vec-style text file back into labels and a float32 matrix."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise FormatError("missing 'rows dims' header line")
        rows, dims = int(header[0]), int(header[1])
        labels = []
        mat = np.empty((rows, dims), dtype=np.float32)
        for i in range(rows):
            parts = f.readline().split()
            if len(parts) != dims + 1:
                raise FormatError(f"row {i} has {len(parts) - 1} values, expected {dims}")
            labels.append(parts[0])
            mat[i] = [float(x) for x in parts[1:]]
    return labels, mat
