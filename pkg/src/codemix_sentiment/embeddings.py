"""Word vectors: pretrained English tables, a skip-gram trainer for
code-mixed text, and the combined lookup the classifier consumes."""

from __future__ import annotations

import hashlib
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class EmbeddingFormatError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


class EmbeddingTable:
    """Immutable token -> vector table backed by one ``(n, dim)`` float32 matrix."""

    def __init__(self, dim: int, tokens: Sequence[str] = (), matrix=None):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        tokens = list(tokens)
        if matrix is None:
            matrix = np.zeros((len(tokens), dim), dtype=np.float32)
        matrix = np.array(matrix, dtype=np.float32, copy=True).reshape(len(tokens), dim)
        if not np.all(np.isfinite(matrix)):
            raise ValueError("embedding table contains non-finite values")
        matrix.setflags(write=False)
        self.dim = dim
        self.tokens = tokens
        self.matrix = matrix
        self.index = {}
        for i, tok in enumerate(tokens):
            if tok != tok.lower():
                raise ValueError(f"embedding tokens must be lowercase, got {tok!r}")
            self.index.setdefault(tok, i)

    @classmethod
    def from_dict(cls, vectors: dict, dim: int | None = None) -> "EmbeddingTable":
        if dim is None:
            if not vectors:
                raise ValueError("cannot infer dim from an empty mapping")
            dim = len(next(iter(vectors.values())))
        tokens = list(vectors)
        matrix = np.stack([np.asarray(vectors[t], dtype=np.float32) for t in tokens]) if tokens else None
        if matrix is not None and matrix.shape[1] != dim:
            raise ValueError(f"vectors have width {matrix.shape[1]}, expected {dim}")
        return cls(dim, tokens, matrix)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token) -> bool:
        return token in self.index

    def __getitem__(self, token) -> np.ndarray:
        return self.matrix[self.index[token]]

    @property
    def vectors(self) -> dict:
        return {t: self.matrix[i] for t, i in self.index.items()}

    def update_hash(self, h) -> None:
        h.update(f"{self.dim}:{len(self.tokens)}\n".encode())
        for tok in self.tokens:
            h.update(tok.encode("utf-8") + b"\0")
        h.update(np.ascontiguousarray(self.matrix).tobytes())


def load_pretrained(path) -> EmbeddingTable:
    """Read a GloVe-style text file: ``token v1 ... vd`` per line.

    The width of the first row fixes ``dim``; tokens are lowercased and the
    first occurrence of a duplicate wins.
    """
    path = Path(path)
    tokens, rows = [], []
    dim = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip().split(" ")
            if not parts or not parts[0]:
                continue
            if dim is None:
                dim = len(parts) - 1
                if dim < 1:
                    raise EmbeddingFormatError(path, lineno, "row has no vector components")
            elif len(parts) - 1 != dim:
                raise EmbeddingFormatError(path, lineno, f"expected {dim} components, got {len(parts) - 1}")
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise EmbeddingFormatError(path, lineno, "non-numeric vector component") from None
            tokens.append(parts[0].lower())
    if dim is None:
        raise EmbeddingFormatError(path, 0, "empty embedding file")
    matrix = np.asarray(rows, dtype=np.float32)
    if not np.all(np.isfinite(matrix)):
        bad = int(np.argwhere(~np.isfinite(matrix))[0][0])
        raise EmbeddingFormatError(path, bad + 1, "non-finite vector component")
    return EmbeddingTable(dim, tokens, matrix)


def save_table(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for tok, i in table.index.items():
            f.write(tok + " " + " ".join(repr(float(x)) for x in table.matrix[i]) + "\n")


@dataclass
class TrainingLog:
    epoch_loss: list[float] = field(default_factory=list)


def train_codemixed(corpus: Sequence[Sequence[str]], dim: int = 100, window: int = 5, epochs: int = 5,
                    seed: int = 0, min_count: int = 2, negatives: int = 5, learning_rate: float = 0.025,
                    batch_size: int = 256, log: TrainingLog | None = None) -> EmbeddingTable:
    """Skip-gram with negative sampling, trained with plain minibatch SGD.

    Every (centre, context) pair within ``window`` tokens is a positive
    example; ``negatives`` noise words per pair are drawn from the unigram
    distribution raised to 0.75. The learning rate decays linearly to 1e-4
    of its start value. Everything runs on one numpy Generator seeded with
    ``seed``, so the result is a pure function of the arguments.

    Per-epoch mean loss is appended to ``log.epoch_loss`` when a log is given.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if window < 1 or epochs < 1 or negatives < 1 or min_count < 1:
        raise ValueError("window, epochs, negatives and min_count must be positive")
    corpus = [list(s) for s in corpus]
    if not any(corpus):
        raise ValueError("training corpus is empty")

    counts = Counter(t for sent in corpus for t in sent)
    vocab = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    if not vocab:
        raise ValueError(f"no token occurs at least min_count={min_count} times")
    index = {t: i for i, t in enumerate(vocab)}

    centres, contexts = [], []
    for sent in corpus:
        ids = [index[t] for t in sent if t in index]
        for i, c in enumerate(ids):
            for j in range(max(0, i - window), min(len(ids), i + window + 1)):
                if j != i:
                    centres.append(c)
                    contexts.append(ids[j])
    centres = np.asarray(centres, dtype=np.int64)
    contexts = np.asarray(contexts, dtype=np.int64)
    n_pairs = len(centres)

    rng = np.random.default_rng(seed)
    v = len(vocab)
    w_in = ((rng.random((v, dim)) - 0.5) / dim).astype(np.float64)
    w_out = np.zeros((v, dim), dtype=np.float64)
    if n_pairs == 0:
        logger.warning("corpus has no co-occurring pairs; returning the random initialisation")
        return EmbeddingTable(dim, vocab, w_in)

    freq = np.array([counts[t] for t in vocab], dtype=np.float64) ** 0.75
    noise_cdf = np.cumsum(freq / freq.sum())
    noise_cdf[-1] = 1.0

    total_steps = epochs * math.ceil(n_pairs / batch_size)
    step = 0
    for epoch in range(epochs):
        order = rng.permutation(n_pairs)
        loss_sum = 0.0
        for start in range(0, n_pairs, batch_size):
            lr = learning_rate * max(1e-4, 1.0 - step / total_steps)
            step += 1
            batch = order[start:start + batch_size]
            c, o = centres[batch], contexts[batch]
            neg = np.searchsorted(noise_cdf, rng.random((len(batch), negatives)), side="right")
            neg = np.minimum(neg, v - 1)

            h = w_in[c]                                   # (b, d)
            targets = np.concatenate([o[:, None], neg], axis=1)   # (b, 1+k)
            u = w_out[targets]                            # (b, 1+k, d)
            scores = np.einsum("bd,bkd->bk", h, u)
            sign = np.ones_like(scores)
            sign[:, 1:] = -1.0
            # loss = -log sigmoid(sign * score); d/dscore = -sign * sigmoid(-sign * score)
            z = sign * scores
            loss_sum += float(np.logaddexp(0.0, -z).sum())
            g = -sign / (1.0 + np.exp(z))                 # (b, 1+k)
            grad_h = np.einsum("bk,bkd->bd", g, u)
            grad_u = g[:, :, None] * h[:, None, :]
            np.add.at(w_out, targets.reshape(-1), -lr * grad_u.reshape(-1, dim))
            np.add.at(w_in, c, -lr * grad_h)
        mean_loss = loss_sum / n_pairs
        if log is not None:
            log.epoch_loss.append(mean_loss)
        logger.debug("skip-gram epoch %d: loss %.5f", epoch + 1, mean_loss)

    return EmbeddingTable(dim, vocab, w_in)


class UnifiedLookup:
    """English table first, code-mixed table second, zero vector otherwise."""

    def __init__(self, english: EmbeddingTable | None, codemixed: EmbeddingTable | None,
                 oov_vector=None):
        dims = {t.dim for t in (english, codemixed) if t is not None}
        if not dims:
            raise ValueError("at least one embedding table is required")
        if len(dims) > 1:
            raise ValueError(f"embedding tables disagree on dim: {sorted(dims)}")
        self.dim = dims.pop()
        self.english = english if english is not None else EmbeddingTable(self.dim)
        self.codemixed = codemixed if codemixed is not None else EmbeddingTable(self.dim)
        if oov_vector is None:
            oov_vector = np.zeros(self.dim, dtype=np.float32)
        oov_vector = np.asarray(oov_vector, dtype=np.float32)
        if oov_vector.shape != (self.dim,) or not np.all(np.isfinite(oov_vector)):
            raise ValueError("oov_vector must be a finite vector of the lookup's dim")
        self.oov_vector = oov_vector
        self._fingerprint = None

    def vector(self, token: str) -> np.ndarray:
        if token in self.english:
            return self.english[token]
        if token in self.codemixed:
            return self.codemixed[token]
        return self.oov_vector

    def __contains__(self, token) -> bool:
        return token in self.english or token in self.codemixed

    def fingerprint(self) -> str:
        """SHA-256 over both tables and the OOV vector; checkpoints store it."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            self.english.update_hash(h)
            self.codemixed.update_hash(h)
            h.update(self.oov_vector.tobytes())
            self._fingerprint = h.hexdigest()
        return self._fingerprint


def embed(lookup: UnifiedLookup, tokens: Iterable[str]) -> np.ndarray:
    """Stack per-token vectors into a ``(len(tokens), dim)`` float32 array."""
    tokens = list(tokens)
    if not tokens:
        return np.zeros((0, lookup.dim), dtype=np.float32)
    return np.stack([lookup.vector(t) for t in tokens])


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / denom) if denom else 0.0
