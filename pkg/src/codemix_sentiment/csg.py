"""Candidate sentence generation.

For every sentence five perturbed copies are produced for each of three
buckets by inserting sentiment phrases into randomly chosen gaps between
tokens:

* positive bucket: a random positive phrase at every spot,
* negative bucket: a random negative phrase at every spot,
* neutral bucket: positive and negative phrases alternating across the
  spots from left to right, starting with a positive one.

Original tokens are never replaced, so removing the inserted phrases from a
candidate gives back the input sentence.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

N_PER_BUCKET = 5
SPOT_COUNTS = (1, 2, 3)
MAX_PHRASE_TOKENS = 5

Phrase = tuple[str, ...]


class PhraseFileError(ValueError):
    pass


@dataclass(frozen=True)
class PhraseSet:
    positive: tuple[Phrase, ...]
    negative: tuple[Phrase, ...]

    def __post_init__(self):
        for name in ("positive", "negative"):
            phrases = getattr(self, name)
            if not phrases:
                raise PhraseFileError(f"{name} phrase list is empty")
            for ph in phrases:
                if not 1 <= len(ph) <= MAX_PHRASE_TOKENS:
                    raise PhraseFileError(f"{name} phrase {' '.join(ph)!r} must have 1-{MAX_PHRASE_TOKENS} tokens")
                if any(t != t.lower() or not t for t in ph):
                    raise PhraseFileError(f"{name} phrase {' '.join(ph)!r} must be lowercase")

    def normalized(self, clean: Callable[[str], str]) -> "PhraseSet":
        """Run every phrase through a text cleaner, e.g. so that "don't" matches
        the way corpus text is normalised. Phrases that clean to nothing are dropped."""
        def norm(phrases):
            out = []
            for ph in phrases:
                toks = tuple(clean(" ".join(ph)).split())
                if toks and toks not in out:
                    out.append(toks)
            return tuple(out)
        return PhraseSet(norm(self.positive), norm(self.negative))


def parse_phrases(text: str, source: str = "<string>") -> PhraseSet:
    sections: dict[str, list[Phrase]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in ("positive", "negative"):
                raise PhraseFileError(f"{source}:{lineno}: unknown section [{current}]")
            sections.setdefault(current, [])
            continue
        if current is None:
            raise PhraseFileError(f"{source}:{lineno}: phrase outside of a [positive]/[negative] section")
        sections[current].append(tuple(line.lower().split()))
    for name in ("positive", "negative"):
        if not sections.get(name):
            raise PhraseFileError(f"{source}: missing or empty [{name}] section")
    return PhraseSet(tuple(sections["positive"]), tuple(sections["negative"]))


def load_phrases(path=None) -> PhraseSet:
    """Load a phrase file; ``None`` gives the bundled default list."""
    if path is None:
        text = resources.files("codemix_sentiment").joinpath("data/phrases.txt").read_text("utf-8")
        return parse_phrases(text, "phrases.txt")
    return parse_phrases(Path(path).read_text(encoding="utf-8"), str(path))


def choose_spots(tokens: Sequence[str], rng: random.Random) -> list[int]:
    """Pick 1-3 distinct insertion gaps in ``0..len(tokens)``, sorted.

    Gap ``g`` sits just before ``tokens[g]``; gap ``len(tokens)`` is the end.
    """
    n_gaps = len(tokens) + 1
    k = min(rng.choice(SPOT_COUNTS), n_gaps)
    return sorted(rng.sample(range(n_gaps), k))


@dataclass(frozen=True)
class Candidate:
    tokens: tuple[str, ...]
    inserted: tuple[bool, ...]  # True where the token belongs to an inserted phrase
    spots: tuple[int, ...]
    phrases: tuple[Phrase, ...]  # in spot order

    def original(self) -> list[str]:
        return [t for t, ins in zip(self.tokens, self.inserted) if not ins]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def insert_phrases(tokens: Sequence[str], spots: Sequence[int], phrases: Sequence[Phrase]) -> Candidate:
    """Insert ``phrases[i]`` at gap ``spots[i]``; spots must be distinct."""
    if len(spots) != len(phrases):
        raise ValueError("need exactly one phrase per spot")
    if len(set(spots)) != len(spots) or any(not 0 <= s <= len(tokens) for s in spots):
        raise ValueError(f"invalid spots {list(spots)} for {len(tokens)} tokens")
    order = sorted(range(len(spots)), key=lambda i: spots[i])
    spots = [spots[i] for i in order]
    phrases = [tuple(phrases[i]) for i in order]
    out = list(tokens)
    mask = [False] * len(out)
    # right to left so earlier gap indices stay valid
    for gap, phrase in zip(reversed(spots), reversed(phrases)):
        out[gap:gap] = phrase
        mask[gap:gap] = [True] * len(phrase)
    return Candidate(tuple(out), tuple(mask), tuple(spots), tuple(phrases))


def render_spots(tokens: Sequence[str], spots: Sequence[int], marker: str = "<spot>") -> str:
    return " ".join(insert_phrases(tokens, spots, [(marker,)] * len(spots)).tokens)


@dataclass(frozen=True)
class CandidateBuckets:
    positive: tuple[Candidate, ...]
    negative: tuple[Candidate, ...]
    neutral: tuple[Candidate, ...]

    def __iter__(self):
        return iter((self.positive, self.negative, self.neutral))

    def all(self) -> list[Candidate]:
        return [*self.positive, *self.negative, *self.neutral]


def _make_candidate(tokens, rng: random.Random, pick: Callable[[int], Sequence[Phrase]]) -> Candidate:
    spots = choose_spots(tokens, rng)
    return insert_phrases(tokens, spots, [rng.choice(pick(j)) for j in range(len(spots))])


def generate_candidates(tokens: Sequence[str], phrases: PhraseSet, rng: random.Random) -> CandidateBuckets:
    """Build the three buckets of five candidates each.

    Each candidate gets its own spot selection; within an iteration the
    positive, negative and neutral candidates are drawn in that order from
    ``rng``. Phrases are drawn with replacement.
    """
    tokens = list(tokens)
    pos, neg, neu = [], [], []
    for _ in range(N_PER_BUCKET):
        pos.append(_make_candidate(tokens, rng, lambda j: phrases.positive))
        neg.append(_make_candidate(tokens, rng, lambda j: phrases.negative))
        neu.append(_make_candidate(tokens, rng, lambda j: phrases.positive if j % 2 == 0 else phrases.negative))
    return CandidateBuckets(tuple(pos), tuple(neg), tuple(neu))


def sentence_rng(seed: int, sentence_id: str) -> random.Random:
    """Random stream derived from (seed, sentence id) only.

    Candidates for a sentence therefore do not depend on which other
    sentences are processed, or in which order.
    """
    digest = hashlib.sha256(f"{seed}\0{sentence_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))
