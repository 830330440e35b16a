"""Abusive-word prefilter and candidate sentence selection.

The final label of a sentence is decided from the classifier's prediction on
the sentence itself (the *base*) and its predictions on the 15 generated
candidates:

* the base label is kept when the plurality label of its own-polarity bucket
  agrees with it (positive -> bucket 1, negative -> bucket 2, neutral ->
  bucket 3);
* otherwise the final label is the plurality of the ten predictions in the
  other two buckets.

Plurality ties are resolved in favour of the base label when it is among the
leaders, else by the Positive < Negative < Neutral order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

from .corpus import LABELS, LabeledSentence, SentimentLabel
from .csg import N_PER_BUCKET, CandidateBuckets, PhraseSet, generate_candidates, sentence_rng

# own-polarity bucket per base label, and the two fallback buckets
_OWN_BUCKET = {SentimentLabel.POSITIVE: 0, SentimentLabel.NEGATIVE: 1, SentimentLabel.NEUTRAL: 2}


class Predictor(Protocol):
    def __call__(self, sentences: Sequence[Sequence[str]]) -> list: ...


@dataclass(frozen=True)
class AbusiveLexicon:
    words: frozenset = frozenset()

    def __post_init__(self):
        for w in self.words:
            if not w or w != w.lower() or any(c.isspace() for c in w):
                raise ValueError(f"invalid lexicon entry {w!r}")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, token) -> bool:
        return token in self.words


def load_abusive_lexicon(path=None) -> AbusiveLexicon:
    """One lowercase token per line, ``#`` comments allowed. ``None`` loads the
    small bundled placeholder list."""
    if path is None:
        text = resources.files("codemix_sentiment").joinpath("data/abusive_words.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return AbusiveLexicon(frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")))


def prefilter(tokens: Sequence[str], lexicon: AbusiveLexicon | None) -> SentimentLabel | None:
    if lexicon is None:
        return None
    return SentimentLabel.NEGATIVE if any(t in lexicon.words for t in tokens) else None


def _label(p) -> SentimentLabel:
    return p if isinstance(p, SentimentLabel) else p.label


def plurality(preds: Sequence, base: SentimentLabel) -> SentimentLabel:
    """Most frequent label in ``preds`` (Predictions or bare labels)."""
    if not preds:
        raise ValueError("plurality of an empty prediction list")
    counts = Counter(_label(p) for p in preds)
    top = max(counts.values())
    leaders = [lab for lab in LABELS if counts.get(lab, 0) == top]
    return base if base in leaders else leaders[0]


@dataclass(frozen=True)
class BucketPredictions:
    bucket1: tuple  # positive-phrase candidates
    bucket2: tuple  # negative-phrase candidates
    bucket3: tuple  # alternating candidates

    def __post_init__(self):
        for name in ("bucket1", "bucket2", "bucket3"):
            if len(getattr(self, name)) != N_PER_BUCKET:
                raise ValueError(f"{name} must hold exactly {N_PER_BUCKET} predictions")

    def __getitem__(self, i: int) -> tuple:
        return (self.bucket1, self.bucket2, self.bucket3)[i]


def css_select(base, buckets: BucketPredictions) -> SentimentLabel:
    base_label = _label(base)
    own = _OWN_BUCKET[base_label]
    if plurality(buckets[own], base_label) == base_label:
        return base_label
    others = [p for i in range(3) if i != own for p in buckets[i]]
    return plurality(others, base_label)


def css_branch(base, buckets: BucketPredictions) -> str:
    """``"keep"`` or ``"fallback"``: which branch :func:`css_select` takes."""
    base_label = _label(base)
    return "keep" if plurality(buckets[_OWN_BUCKET[base_label]], base_label) == base_label else "fallback"


@dataclass
class RefineResult:
    id: str
    baseline: object  # Prediction
    final: SentimentLabel
    prefiltered: bool
    trace: dict | None = field(default=None, repr=False)


def _as_predictor(model) -> Predictor:
    if callable(model) and not hasattr(model, "net"):
        return model
    from .classifier import predict_batch
    return lambda sentences: predict_batch(model, sentences)


def refine(model, sentence: LabeledSentence, phrases: PhraseSet, lexicon: AbusiveLexicon | None,
           seed: int, trace: bool = False) -> RefineResult:
    """Run prefilter, generation and selection for one preprocessed sentence.

    ``model`` is a :class:`~codemix_sentiment.classifier.TrainedModel` or any
    callable mapping a list of token lists to a list of predictions. Passing
    ``lexicon=None`` (or an empty lexicon) disables the prefilter.
    """
    return refine_many(model, [sentence], phrases, lexicon, seed, trace=trace)[0]


def refine_many(model, sentences: Sequence[LabeledSentence], phrases: PhraseSet,
                lexicon: AbusiveLexicon | None, seed: int, trace: bool = False,
                chunk_sentences: int = 64) -> list[RefineResult]:
    """Batched :func:`refine`; results come back in input order.

    The base sentence and its candidates are scored in one call per chunk.
    Candidates depend only on ``(seed, sentence.id)``, so chunking and
    ordering do not change any result.
    """
    predictor = _as_predictor(model)
    results = []
    for start in range(0, len(sentences), chunk_sentences):
        chunk = sentences[start:start + chunk_sentences]
        plans = []
        batch: list[list[str]] = []
        for sent in chunk:
            flagged = prefilter(sent.tokens, lexicon) is not None
            buckets = None if flagged else generate_candidates(sent.tokens, phrases, sentence_rng(seed, sent.id))
            plans.append((sent, flagged, buckets, len(batch)))
            batch.append(list(sent.tokens))
            if buckets is not None:
                batch.extend(list(c.tokens) for c in buckets.all())
        preds = predictor(batch)
        for sent, flagged, buckets, offset in plans:
            base = preds[offset]
            if flagged:
                final = SentimentLabel.NEGATIVE
                info = {"id": sent.id, "tokens": list(sent.tokens), "prefiltered": True,
                        "baseline": str(base.label), "final": str(final)}
            else:
                cand = preds[offset + 1: offset + 1 + 3 * N_PER_BUCKET]
                bp = BucketPredictions(tuple(cand[0:5]), tuple(cand[5:10]), tuple(cand[10:15]))
                final = css_select(base, bp)
                info = None
                if trace:
                    info = {
                        "id": sent.id, "tokens": list(sent.tokens), "prefiltered": False,
                        "baseline": str(base.label), "baseline_probs": list(base.probs),
                        "buckets": {
                            name: [{"text": c.text, "spots": list(c.spots), "pred": str(p.label)}
                                   for c, p in zip(bucket, bp[i])]
                            for i, (name, bucket) in enumerate(zip(("positive", "negative", "neutral"), buckets))
                        },
                        "branch": css_branch(base, bp), "final": str(final),
                    }
            results.append(RefineResult(sent.id, base, final, flagged, info if trace else None))
    return results
