"""Acceptance suite: one group of tests per criterion.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section of the terminal summary for one PASS/FAIL/SKIP line per criterion.
Criterion 6 needs the SentiMix Hinglish release; point ``SENTIMIX_DIR`` at a
directory holding ``train``, ``validation`` and ``test`` files (TSV or
CoNLL) plus ``test_labels.csv`` when the test file carries no labels.
"""

import itertools
import json
import os
import random
import re
import time

import numpy as np
import pytest
import torch

from codemix_sentiment.classifier import (
    BiLSTMNet, ModelConfig, Prediction, accuracy_on, encode_batch, predict_batch, train,
)
from codemix_sentiment.cli import main
from codemix_sentiment.corpus import LABELS, LabeledSentence, SentimentLabel, label_sequence
from codemix_sentiment.csg import N_PER_BUCKET, generate_candidates, load_phrases, sentence_rng
from codemix_sentiment.metrics import evaluate
from codemix_sentiment.preprocess import clean, preprocess
from codemix_sentiment.select import (
    AbusiveLexicon, BucketPredictions, css_select, load_abusive_lexicon, refine, refine_many,
)

from oracles import bucket_multisets, is_valid_candidate, selection_reference
from test_classifier import finite_difference_check

criterion = pytest.mark.criterion
P, N, U = SentimentLabel.POSITIVE, SentimentLabel.NEGATIVE, SentimentLabel.NEUTRAL


# --- 1 ----------------------------------------------------------------------

@criterion(1, "CSS matches the reference decision table on all 27,783 configurations")
def test_css_oracle_equivalence():
    start = time.perf_counter()
    multisets = bucket_multisets()
    checked = disagreements = 0
    for base in LABELS:
        for (l1, c1), (l2, c2), (l3, c3) in itertools.product(multisets, repeat=3):
            buckets = BucketPredictions(tuple(LABELS[i] for i in l1), tuple(LABELS[i] for i in l2),
                                        tuple(LABELS[i] for i in l3))
            disagreements += int(css_select(base, buckets)) != selection_reference(int(base), c1, c2, c3)
            checked += 1
    elapsed = time.perf_counter() - start
    print(f"criterion 1: {checked} configurations, {disagreements} disagreements, {elapsed:.2f}s")
    assert checked == 3 * 21 ** 3 == 27783
    assert disagreements == 0
    assert elapsed < 30


# --- 2 ----------------------------------------------------------------------

@criterion(2, "CSG structure over 1,000 random sentences")
def test_csg_structural_suite():
    phrases = load_phrases()
    # draw words from the phrase lists too so the oracle has to disambiguate
    phrase_words = sorted({t for ph in phrases.positive + phrases.negative for t in ph})
    vocab = ["rohit", "bhai", "movie", "acha", "kal", "match", "hai", "yaar"] + phrase_words
    rng = random.Random(2024)
    start = time.perf_counter()
    failures = []
    for i in range(1000):
        tokens = [rng.choice(vocab) for _ in range(rng.randint(0, 40))]
        buckets = generate_candidates(tokens, phrases, sentence_rng(rng.randrange(2**32), str(i)))
        sizes = [len(b) for b in buckets]
        if sizes != [N_PER_BUCKET] * 3 or len(buckets.all()) != 15:
            failures.append((i, "sizes", sizes))
            continue
        for name, bucket in zip(("positive", "negative", "neutral"), buckets):
            for cand in bucket:
                if cand.original() != tokens:
                    failures.append((i, name, "strip"))
                if not is_valid_candidate(cand.tokens, tokens, phrases.positive, phrases.negative, name):
                    failures.append((i, name, "oracle"))
    elapsed = time.perf_counter() - start
    print(f"criterion 2: 1000 sentences, {len(failures)} failures, {elapsed:.2f}s")
    assert not failures, failures[:5]
    assert elapsed < 10


# --- 3 ----------------------------------------------------------------------

@criterion(3, "metric fixture and macro-F consistency")
def test_metric_fixture():
    golds = label_sequence("P P N N U U".split())
    preds = label_sequence("P N N N U P".split())
    report = evaluate(preds, golds)
    # hand-computed: F = 1/2, 4/5, 2/3
    assert abs(report.accuracy - 4 / 6) <= 1e-9
    assert abs(report.macro_f - (1 / 2 + 4 / 5 + 2 / 3) / 3) <= 1e-9
    assert round(report.accuracy, 6) == 0.666667
    assert round(report.macro_f, 6) == 0.655556


@criterion(3, "metric fixture and macro-F consistency")
def test_macro_f_is_mean_of_classwise():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(1, 60))
        preds = [LABELS[i] for i in rng.integers(0, 3, n)]
        golds = [LABELS[i] for i in rng.integers(0, 3, n)]
        report = evaluate(preds, golds, warn=False)
        worst = max(worst, abs(report.macro_f - sum(report.classwise_f[lab] for lab in LABELS) / 3))
    assert worst <= 1e-12


# --- 4 ----------------------------------------------------------------------

@criterion(4, "classifier sanity on the toy corpus")
def test_toy_corpus_is_learnable(toy_splits, toy_lookup):
    start = time.perf_counter()
    model = train(toy_splits["train"], None, toy_lookup, ModelConfig(epochs=200))
    acc = accuracy_on(model, toy_splits["train"])
    elapsed = time.perf_counter() - start
    print(f"criterion 4: train accuracy {acc:.3f} after {len(model.history)} epochs, {elapsed:.1f}s")
    assert acc >= 0.95
    assert elapsed < 120


@criterion(4, "classifier sanity on the toy corpus")
def test_gradients_match_finite_differences(toy_splits, toy_lookup):
    cfg = ModelConfig()
    torch.manual_seed(0)
    net = BiLSTMNet(toy_lookup.dim, cfg)
    sents = toy_splits["train"].sentences[:2]
    x, lengths = encode_batch(toy_lookup, [s.tokens for s in sents], cfg.max_len, dtype=torch.float64)
    targets = torch.tensor([int(s.label) for s in sents])
    errors = finite_difference_check(net, x, lengths, targets, fraction=0.01)
    n_params = sum(p.numel() for p in net.parameters())
    print(f"criterion 4: {len(errors)} of {n_params} parameters checked, max relative error {errors.max():.2e}")
    assert len(errors) >= 0.01 * n_params
    assert errors.max() < 1e-3


@criterion(4, "classifier sanity on the toy corpus")
def test_fixed_seed_reruns_are_identical(toy_splits, toy_lookup):
    cfg = ModelConfig(epochs=5, seed=11)
    a = train(toy_splits["train"], toy_splits["validation"], toy_lookup, cfg)
    b = train(toy_splits["train"], toy_splits["validation"], toy_lookup, cfg)
    toks = [s.tokens for s in toy_splits["test"]] + [s.tokens for s in toy_splits["validation"]]
    assert predict_batch(a, toks) == predict_batch(b, toks)


# --- 5 ----------------------------------------------------------------------

def _random_unicode(rng: random.Random) -> str:
    chars = []
    for _ in range(rng.randint(0, 40)):
        r = rng.random()
        if r < 0.5:
            cp = rng.randint(0x20, 0x7E)
        elif r < 0.7:
            cp = rng.randint(0x1F300, 0x1FAFF)
        elif r < 0.8:
            cp = rng.choice([0x9, 0xA, 0xD, 0xA0, 0x2019, 0x2018, 0x200D, 0xFE0F])
        else:
            cp = rng.randint(0, 0x10FFFF)
        if 0xD800 <= cp <= 0xDFFF:
            continue
        chars.append(chr(cp))
    return "".join(chars)


@criterion(5, "preprocessing properties and the worked-example sentence")
def test_clean_properties_on_random_unicode(emoji_lexicon):
    rng = random.Random(5)
    alphabet = re.compile(r"[a-z0-9 ]*")
    bad = []
    for _ in range(10_000):
        text = _random_unicode(rng)
        for lex in (None, emoji_lexicon):
            once = clean(text, lex)
            if clean(once, lex) != once or not alphabet.fullmatch(once):
                bad.append(text)
    assert not bad, bad[:3]


@criterion(5, "preprocessing properties and the worked-example sentence")
def test_worked_example_round_trip(emoji_lexicon):
    tokens = preprocess("rohit bhai I am your big fan want to meet you", emoji_lexicon)
    assert tokens == "rohit bhai i am your big fan want to meet you".split()
    assert len(tokens) == 11 and tokens[-2:] == ["meet", "you"]


# --- 6 ----------------------------------------------------------------------

SENTIMIX_DIR = os.environ.get("SENTIMIX_DIR")
needs_dataset = pytest.mark.skipif(not SENTIMIX_DIR, reason="set SENTIMIX_DIR to the SentiMix Hinglish data")

EXPECTED_COUNTS = {"train": (15131, 5034, 4459, 5638), "validation": (3000, 982, 890, 1128), "test": (3000, 1000, 900, 1100)}
EXPECTED_OVERLAP = {"train": (20, 55, 55), "validation": (20, 50, 45), "test": (15, 40, 40)}


@pytest.fixture(scope="module")
def sentimix_stats(tmp_path_factory):
    out = tmp_path_factory.mktemp("sentimix")
    assert main(["stats", "--data-dir", SENTIMIX_DIR, "--out", str(out)]) == 0
    return json.loads((out / "stats" / "stats.json").read_text())["splits"]


@criterion(6, "dataset-contingent reproduction")
@needs_dataset
def test_split_sizes_and_class_counts(sentimix_stats):
    for name, (size, pos, neg, neu) in EXPECTED_COUNTS.items():
        got = sentimix_stats[name]
        assert got["size"] == size, name
        assert got["distribution"] == {"positive": pos, "negative": neg, "neutral": neu}, name


@criterion(6, "dataset-contingent reproduction")
@needs_dataset
def test_overlap_matrix_within_ten_points(sentimix_stats):
    pairs = (("positive", "negative"), ("positive", "neutral"), ("negative", "neutral"))
    for name, expected in EXPECTED_OVERLAP.items():
        overlap = sentimix_stats[name]["overlap"]
        for (a, b), want in zip(pairs, expected):
            assert abs(overlap[a][b] - want) <= 10, (name, a, b, overlap[a][b], want)


@criterion(6, "dataset-contingent reproduction")
@needs_dataset
def test_full_predict_and_evaluate(tmp_path):
    common = ["--data-dir", SENTIMIX_DIR, "--out", str(tmp_path)]
    assert main(["train-embeddings"] + common) == 0
    assert main(["train"] + common) == 0
    start = time.perf_counter()
    assert main(["predict"] + common) == 0
    assert main(["evaluate"] + common) == 0
    elapsed = time.perf_counter() - start
    print(f"criterion 6: predict+evaluate {elapsed:.0f}s")
    report = json.loads((tmp_path / "report.json").read_text())
    assert "macro_f" in report and "macro_f" in report["baseline"]
    assert set(report["modification"]) >= {"successful", "unsuccessful"}
    assert "Successful" in (tmp_path / "report.txt").read_text()
    assert elapsed < 600


# --- 7 ----------------------------------------------------------------------

class RecordingModel:
    def __init__(self):
        self.seen = []

    def __call__(self, sentences):
        self.seen.extend(tuple(s) for s in sentences)
        return [Prediction(P, (0.8, 0.1, 0.1)) for _ in sentences]


@criterion(7, "abusive-word prefilter")
def test_prefilter_forces_negative_and_skips_generation():
    rng = random.Random(7)
    phrases = load_phrases()
    words = ["kal", "movie", "acha", "bhai", "match", "yaar", "dekha", "bahut"]
    flagged_total = 0
    for trial in range(50):
        lexicon = AbusiveLexicon(frozenset(rng.sample(words, rng.randint(1, 3))))
        sentences = [LabeledSentence(f"{trial}-{i}", "", [rng.choice(words) for _ in range(rng.randint(1, 12))])
                     for i in range(40)]
        model = RecordingModel()
        results = refine_many(model, sentences, phrases, lexicon, seed=trial, trace=True)
        flagged = [any(t in lexicon.words for t in s.tokens) for s in sentences]
        flagged_total += sum(flagged)
        for sent, res, hit in zip(sentences, results, flagged):
            assert res.prefiltered == hit
            if hit:
                assert res.final is N
                assert "buckets" not in res.trace
        # flagged sentences cost one prediction each, the rest 1 + 15
        assert len(model.seen) == sum(1 if hit else 16 for hit in flagged)

        # the same holds one sentence at a time
        for sent, hit in zip(sentences[:5], flagged):
            single = RecordingModel()
            res = refine(single, sent, phrases, lexicon, seed=trial)
            assert (res.final is N and single.seen == [tuple(sent.tokens)]) if hit else len(single.seen) == 16
    assert flagged_total > 0


@criterion(7, "abusive-word prefilter")
def test_prefilter_on_trained_model(toy_splits, toy_lookup):
    model = train(toy_splits["train"], None, toy_lookup, ModelConfig(hidden_size=16, dense_sizes=(8, 8), epochs=2))
    lexicon = load_abusive_lexicon()
    results = refine_many(model, toy_splits["test"].sentences, load_phrases().normalized(clean), lexicon, seed=1)
    hits = [r for r, s in zip(results, toy_splits["test"]) if any(t in lexicon.words for t in s.tokens)]
    assert hits and all(r.prefiltered and r.final is N for r in hits)
