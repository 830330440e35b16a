"""Bi-LSTM sentiment classifier.

Frozen word vectors -> bidirectional LSTM -> two ReLU dense layers -> 3-way
softmax. The embedding layer is frozen, so vectors are pulled from the
:class:`~codemix_sentiment.embeddings.UnifiedLookup` per batch instead of
materialising a vocabulary-sized weight matrix; tokens unseen at training
time still get their pretrained vectors at prediction time.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence

from .corpus import LABELS, CorpusSplit, SentimentLabel
from .embeddings import UnifiedLookup
from .metrics import evaluate

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    hidden_size: int = 128
    dense_sizes: tuple[int, int] = (64, 32)
    dropout: float = 0.3
    max_len: int = 64
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dense_sizes", tuple(int(x) for x in self.dense_sizes))
        for name in ("hidden_size", "max_len", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if len(self.dense_sizes) != 2 or min(self.dense_sizes) < 1:
            raise ValueError(f"dense_sizes must be two positive integers, got {self.dense_sizes}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass(frozen=True)
class Prediction:
    label: SentimentLabel
    probs: tuple[float, float, float]

    @classmethod
    def from_probs(cls, probs) -> "Prediction":
        p = np.asarray(probs, dtype=np.float64)
        p = p / p.sum()
        # np.argmax keeps the first maximum, i.e. the SentimentLabel order
        return cls(LABELS[int(np.argmax(p))], tuple(float(x) for x in p))


class BiLSTMNet(nn.Module):
    def __init__(self, input_dim: int, config: ModelConfig):
        super().__init__()
        h = config.hidden_size
        d1, d2 = config.dense_sizes
        self.lstm = nn.LSTM(input_dim, h, batch_first=True, bidirectional=True)
        self.dense1 = nn.Linear(2 * h, d1)
        self.dense2 = nn.Linear(d1, d2)
        self.head = nn.Linear(d2, len(LABELS))
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """Return logits for a padded batch ``x`` of shape ``(b, t, dim)``."""
        packed = pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False)
        _, (h_n, _) = self.lstm(packed)
        # last forward state and last backward state
        z = torch.cat([h_n[0], h_n[1]], dim=1)
        z = self.dropout(z)
        z = self.dropout(torch.relu(self.dense1(z)))
        z = torch.relu(self.dense2(z))
        return self.head(z)


def encode_batch(lookup: UnifiedLookup, sentences: Sequence[Sequence[str]], max_len: int,
                 dtype=torch.float32) -> tuple[torch.Tensor, torch.Tensor]:
    """Pad a batch of token lists into ``(x, lengths)``.

    Sequences are truncated to ``max_len``; an empty sequence becomes a
    single OOV vector.
    """
    seqs = [list(s)[:max_len] for s in sentences]
    lengths = [max(1, len(s)) for s in seqs]
    x = np.zeros((len(seqs), max(lengths), lookup.dim), dtype=np.float32)
    for i, s in enumerate(seqs):
        if s:
            x[i, :len(s)] = [lookup.vector(t) for t in s]
        else:
            x[i, 0] = lookup.oov_vector
    return torch.from_numpy(x).to(dtype), torch.tensor(lengths, dtype=torch.int64)


@dataclass
class TrainedModel:
    config: ModelConfig
    net: BiLSTMNet
    lookup: UnifiedLookup
    history: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)

    def save(self, path) -> None:
        save_model(self, path)


def _set_seeds(seed: int) -> torch.Generator:
    torch.manual_seed(seed)
    gen = torch.Generator()
    gen.manual_seed(seed)
    return gen


def train(train_split: CorpusSplit, valid_split: CorpusSplit | None, lookup: UnifiedLookup,
          config: ModelConfig = ModelConfig(), callback=None) -> TrainedModel:
    """Fit a classifier and keep the weights of the best validation epoch.

    Sentences must already carry ``tokens`` and gold labels. When
    ``valid_split`` is ``None`` the training split doubles as the
    validation set. The returned model's ``history`` holds one dict per
    epoch with the mean training loss and the validation macro-F;
    ``callback(entry)`` is invoked after each epoch, and returning ``True``
    from it stops training early.

    Raises:
        ValueError: an empty or unlabeled split.
        TrainingError: the loss became non-finite.
    """
    if len(train_split.sentences) == 0:
        raise ValueError("training split is empty")
    if valid_split is None:
        valid_split = train_split
    for split in (train_split, valid_split):
        if any(s.label is None for s in split):
            raise ValueError(f"split {split.name!r} has unlabeled sentences")

    tokens = [s.tokens for s in train_split]
    targets = torch.tensor([int(s.label) for s in train_split], dtype=torch.int64)
    valid_tokens = [s.tokens for s in valid_split]
    valid_gold = [s.label for s in valid_split]

    with torch.random.fork_rng(devices=[]):
        gen = _set_seeds(config.seed)
        net = BiLSTMNet(lookup.dim, config)
        optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
        loss_fn = nn.CrossEntropyLoss()

        best_f, best_state = -1.0, None
        history = []
        n = len(tokens)
        for epoch in range(1, config.epochs + 1):
            net.train()
            order = torch.randperm(n, generator=gen).tolist()
            loss_sum = 0.0
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                x, lengths = encode_batch(lookup, [tokens[i] for i in idx], config.max_len)
                optimizer.zero_grad()
                loss = loss_fn(net(x, lengths), targets[idx])
                if not torch.isfinite(loss):
                    raise TrainingError(
                        f"non-finite loss {loss.item()} at epoch {epoch}, batch starting at {start}; "
                        f"learning_rate={config.learning_rate}, batch ids={idx[:5]}...")
                loss.backward()
                optimizer.step()
                loss_sum += loss.item() * len(idx)

            net.eval()
            preds = [p.label for p in _predict(net, lookup, valid_tokens, config.max_len)]
            valid_f = evaluate(preds, valid_gold, warn=False).macro_f
            entry = {"epoch": epoch, "loss": loss_sum / n, "valid_macro_f": valid_f}
            history.append(entry)
            logger.info("epoch %d: loss %.4f, valid macro-F %.4f", epoch, entry["loss"], valid_f)
            if valid_f > best_f:
                best_f = valid_f
                best_state = {k: v.detach().clone() for k, v in net.state_dict().items()}
            if callback is not None and callback(entry):
                break

    net.load_state_dict(best_state)
    return TrainedModel(config, net, lookup, history)


def _predict(net: BiLSTMNet, lookup: UnifiedLookup, sentences, max_len: int) -> list[Prediction]:
    # One forward pass per sentence: padded batches change float32 rounding,
    # and predictions must not depend on what else is in the batch.
    out = []
    with torch.no_grad():
        for tokens in sentences:
            x, lengths = encode_batch(lookup, [tokens], max_len)
            probs = torch.softmax(net(x, lengths).double(), dim=1)[0].numpy()
            out.append(Prediction.from_probs(probs))
    return out


def predict_batch(model: TrainedModel, sentences: Sequence[Sequence[str]]) -> list[Prediction]:
    return _predict(model.net, model.lookup, list(sentences), model.config.max_len)


def predict(model: TrainedModel, tokens: Sequence[str]) -> Prediction:
    return predict_batch(model, [tokens])[0]


def save_model(model: TrainedModel, path, extra: dict | None = None) -> None:
    """Write config, lookup fingerprint, weights and history to one file.

    ``extra`` is stored under ``"meta"`` (the CLI puts its manifest hash there).
    """
    torch.save({
        "format": "codemix-sentiment-bilstm",
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "input_dim": model.lookup.dim,
        "lookup_fingerprint": model.lookup.fingerprint(),
        "state_dict": model.net.state_dict(),
        "history": model.history,
        "meta": dict(extra or {}),
    }, path)


def load_model(path, lookup: UnifiedLookup, check_fingerprint: bool = True) -> TrainedModel:
    try:
        ckpt = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    if ckpt.get("format") != "codemix-sentiment-bilstm" or "version" not in ckpt:
        raise CheckpointError(f"{path}: not a classifier checkpoint")
    if ckpt["version"] != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {ckpt['version']}")
    if ckpt["input_dim"] != lookup.dim:
        raise CheckpointError(f"{path}: checkpoint expects dim {ckpt['input_dim']}, lookup has {lookup.dim}")
    if check_fingerprint and ckpt["lookup_fingerprint"] != lookup.fingerprint():
        raise CheckpointError(f"{path}: embedding lookup differs from the one used for training")
    config = ModelConfig(**ckpt["config"])
    net = BiLSTMNet(lookup.dim, config)
    net.load_state_dict(ckpt["state_dict"])
    return TrainedModel(config, net, lookup, list(ckpt.get("history", [])))


def write_history(model: TrainedModel, path, extra: dict | None = None) -> None:
    data = dict(extra or {}) | {"config": asdict(model.config), "history": model.history}
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def accuracy_on(model: TrainedModel, split: CorpusSplit) -> float:
    preds = predict_batch(model, [s.tokens for s in split])
    return sum(p.label is s.label for p, s in zip(preds, split)) / len(split)


def is_finite(model: TrainedModel) -> bool:
    return all(bool(torch.isfinite(p).all()) for p in model.net.parameters())


__all__ = [
    "BiLSTMNet", "CheckpointError", "ModelConfig", "Prediction", "TrainedModel", "TrainingError",
    "accuracy_on", "encode_batch", "is_finite", "load_model", "predict", "predict_batch",
    "save_model", "train", "write_history",
]
