import copy
import math
import random

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from codemix_sentiment.classifier import (
    BiLSTMNet, CheckpointError, ModelConfig, Prediction, TrainedModel, accuracy_on, encode_batch, load_model,
    predict, predict_batch, save_model, train,
)
from codemix_sentiment.corpus import LABELS, CorpusSplit, LabeledSentence, SentimentLabel
from codemix_sentiment.embeddings import EmbeddingTable, UnifiedLookup


@pytest.fixture(scope="module")
def quick_model(toy_splits, toy_lookup):
    cfg = ModelConfig(hidden_size=16, dense_sizes=(8, 8), epochs=3, seed=1)
    return train(toy_splits["train"], toy_splits["validation"], toy_lookup, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(epochs=0)
    with pytest.raises(ValueError):
        ModelConfig(dropout=1.0)
    with pytest.raises(ValueError):
        ModelConfig(dense_sizes=(64,))


def test_prediction_ties_follow_label_order():
    assert Prediction.from_probs([0.4, 0.4, 0.2]).label is SentimentLabel.POSITIVE
    assert Prediction.from_probs([0.2, 0.4, 0.4]).label is SentimentLabel.NEGATIVE


def test_history_and_best_epoch(quick_model):
    hist = quick_model.history
    assert [e["epoch"] for e in hist] == [1, 2, 3]
    assert all(np.isfinite(e["loss"]) and 0 <= e["valid_macro_f"] <= 1 for e in hist)


def test_predict_invariants(quick_model):
    for toks in ([], ["badhiya", "movie"], ["unknownword"] * 200):
        p = predict(quick_model, toks)
        assert abs(sum(p.probs) - 1) <= 1e-6
        assert all(0 <= x <= 1 for x in p.probs)
        assert p.label is LABELS[int(np.argmax(p.probs))]


def test_truncation_to_max_len(toy_lookup):
    cfg = ModelConfig(hidden_size=4, dense_sizes=(4, 4), max_len=3, epochs=1)
    x, lengths = encode_batch(toy_lookup, [["a"] * 10, []], cfg.max_len)
    assert x.shape == (2, 3, toy_lookup.dim)
    assert lengths.tolist() == [3, 1]


def test_predict_batch_matches_predict(quick_model):
    assert predict_batch(quick_model, []) == []
    sents = [["badhiya"], ["bura", "hai"], []]
    assert predict_batch(quick_model, sents) == [predict(quick_model, s) for s in sents]
    assert predict_batch(quick_model, [sents[1]]) == [predict(quick_model, sents[1])]


VOCAB = ["badhiya", "accha", "bura", "ganda", "kal", "ghar", "match", "oov1", "oov2"]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.lists(st.sampled_from(VOCAB), max_size=20), max_size=6))
def test_predict_batch_property(quick_model, batch):
    assert predict_batch(quick_model, batch) == [predict(quick_model, s) for s in batch]


def test_save_load_bit_identical(quick_model, toy_splits, toy_lookup, tmp_path):
    path = tmp_path / "m.pt"
    save_model(quick_model, path)
    loaded = load_model(path, toy_lookup)
    toks = [s.tokens for s in toy_splits["test"]]
    assert predict_batch(loaded, toks) == predict_batch(quick_model, toks)
    assert loaded.config == quick_model.config


def test_load_rejects_other_lookup(quick_model, tmp_path):
    path = tmp_path / "m.pt"
    save_model(quick_model, path)
    other = UnifiedLookup(None, EmbeddingTable(16, ["x"], np.ones((1, 16))))
    with pytest.raises(CheckpointError):
        load_model(path, other)


def test_train_errors(toy_lookup):
    unlabeled = CorpusSplit("train", [LabeledSentence("1", "a", ["a"], None)])
    with pytest.raises(ValueError):
        train(unlabeled, None, toy_lookup, ModelConfig(epochs=1))


def test_fixed_seed_reruns_identical(toy_splits, toy_lookup):
    cfg = ModelConfig(hidden_size=16, dense_sizes=(8, 8), epochs=2, seed=4)
    a = train(toy_splits["train"], toy_splits["validation"], toy_lookup, cfg)
    b = train(toy_splits["train"], toy_splits["validation"], toy_lookup, cfg)
    toks = [s.tokens for s in toy_splits["validation"]]
    assert predict_batch(a, toks) == predict_batch(b, toks)
    assert a.history == b.history


def test_training_leaves_global_rng_alone(toy_splits, toy_lookup):
    torch.manual_seed(123)
    expected = torch.rand(3)
    torch.manual_seed(123)
    train(toy_splits["train"], None, toy_lookup, ModelConfig(hidden_size=4, dense_sizes=(4, 4), epochs=1))
    assert torch.equal(torch.rand(3), expected)


# --- finite-difference gradient check ---------------------------------------

def _loss(net, x, lengths, targets):
    return torch.nn.functional.cross_entropy(net(x, lengths), targets)


def finite_difference_check(net, x, lengths, targets, fraction=0.01, eps=1e-6, seed=0, min_samples=50):
    """Compare autograd against central differences on a random subset of
    parameter entries; returns the relative errors."""
    net = copy.deepcopy(net).double().eval()
    for p in net.parameters():
        p.requires_grad_(True)
    loss = _loss(net, x, lengths, targets)
    grads = torch.autograd.grad(loss, list(net.parameters()))

    entries = [(i, j) for i, p in enumerate(net.parameters()) for j in range(p.numel())]
    rng = random.Random(seed)
    sample = rng.sample(entries, max(min_samples, math.ceil(fraction * len(entries))))
    params = list(net.parameters())
    errors = []
    with torch.no_grad():
        for i, j in sample:
            flat = params[i].view(-1)
            orig = flat[j].item()
            flat[j] = orig + eps
            up = _loss(net, x, lengths, targets).item()
            flat[j] = orig - eps
            down = _loss(net, x, lengths, targets).item()
            flat[j] = orig
            numeric = (up - down) / (2 * eps)
            analytic = grads[i].view(-1)[j].item()
            errors.append(abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6))
    return np.asarray(errors)


def test_gradient_check_small_model(toy_lookup):
    cfg = ModelConfig(hidden_size=6, dense_sizes=(5, 4), epochs=1)
    torch.manual_seed(0)
    net = BiLSTMNet(toy_lookup.dim, cfg)
    x, lengths = encode_batch(toy_lookup, [["badhiya", "movie", "hai"], ["bura"]], cfg.max_len, dtype=torch.float64)
    errors = finite_difference_check(net, x, lengths, torch.tensor([0, 1]), fraction=1.0)
    assert errors.max() < 1e-3
