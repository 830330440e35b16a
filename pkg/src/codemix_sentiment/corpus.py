"""Dataset splits, labels and descriptive corpus statistics.

Splits are stored as headerless UTF-8 TSV files with rows of the form
``id<TAB>label<TAB>text``. Inside ``text`` a literal tab, newline or
carriage return is written as ``\\t``, ``\\n`` or ``\\r`` and a backslash
as ``\\\\``, so :func:`write_split` and :func:`load_split` round-trip any
string exactly.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

SPLIT_NAMES = ("train", "validation", "test")
DEFAULT_TOP_K = 20
DEFAULT_MIN_LEN = 5


class CorpusError(ValueError):
    """Base class for dataset loading problems."""


class ParseError(CorpusError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


class LabelError(CorpusError):
    def __init__(self, path, lineno: int, value: str):
        super().__init__(f"{path}:{lineno}: unknown sentiment label {value!r}")
        self.lineno = lineno


class DuplicateIdError(CorpusError):
    def __init__(self, path, lineno: int, sent_id: str):
        super().__init__(f"{path}:{lineno}: duplicate sentence id {sent_id!r}")
        self.lineno = lineno


class SentimentLabel(enum.IntEnum):
    """The three sentiment classes.

    The integer value doubles as the class index in probability vectors and
    as the deterministic tie-break order (Positive < Negative < Neutral).
    """

    POSITIVE = 0
    NEGATIVE = 1
    NEUTRAL = 2

    @classmethod
    def parse(cls, value: str) -> "SentimentLabel":
        try:
            return cls[value.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown sentiment label {value!r}") from None

    @property
    def short(self) -> str:
        return "PNU"[self.value]

    def __str__(self) -> str:
        return self.name.lower()


LABELS = tuple(SentimentLabel)


@dataclass
class LabeledSentence:
    id: str
    raw_text: str
    tokens: list[str] = field(default_factory=list)
    label: SentimentLabel | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("sentence id must be non-empty")


@dataclass
class CorpusSplit:
    name: str
    sentences: list[LabeledSentence]

    def __post_init__(self):
        if not self.sentences:
            raise CorpusError(f"split {self.name!r} is empty")
        seen = set()
        for sent in self.sentences:
            if sent.id in seen:
                raise CorpusError(f"split {self.name!r}: duplicate sentence id {sent.id!r}")
            seen.add(sent.id)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def labels(self) -> list[SentimentLabel | None]:
        return [s.label for s in self.sentences]


_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", "\\": "\\"}
_UNESCAPE_RE = re.compile(r"\\([tnr\\])")


def unescape_text(text: str) -> str:
    return _UNESCAPE_RE.sub(lambda m: _ESCAPES[m.group(1)], text)


def escape_text(text: str) -> str:
    return (text.replace("\\", "\\\\").replace("\t", "\\t")
            .replace("\n", "\\n").replace("\r", "\\r"))


def load_split(path, name: str) -> CorpusSplit:
    """Read a TSV split.

    An empty label column is allowed and yields an unlabeled sentence
    (used for prediction input).

    Raises:
        ParseError: a row does not have exactly three tab-separated fields.
        LabelError: the label column is not positive/negative/neutral.
        DuplicateIdError: an id occurs twice.
        CorpusError: the file holds no rows.
    """
    path = Path(path)
    sentences = []
    seen = set()
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(path, lineno, f"expected 3 tab-separated fields, got {len(parts)}")
            sent_id, label_str, text = parts
            sent_id = sent_id.strip()
            if not sent_id:
                raise ParseError(path, lineno, "empty sentence id")
            label = None
            if label_str.strip():
                try:
                    label = SentimentLabel.parse(label_str)
                except ValueError:
                    raise LabelError(path, lineno, label_str) from None
            if sent_id in seen:
                raise DuplicateIdError(path, lineno, sent_id)
            seen.add(sent_id)
            sentences.append(LabeledSentence(sent_id, unescape_text(text), label=label))
    if not sentences:
        raise CorpusError(f"{path}: split {name!r} is empty")
    return CorpusSplit(name, sentences)


def load_conll(path, name: str, labels_path=None) -> CorpusSplit:
    """Read the SentiMix distribution format.

    Each sentence starts with ``meta<TAB>id[<TAB>label]`` followed by one
    ``token<TAB>lang`` line per token; sentences are separated by blank
    lines. Tokens are joined with single spaces to form ``raw_text``. For
    the test release, gold labels live in a separate ``Uid,Sentiment`` CSV
    given as ``labels_path``.
    """
    path = Path(path)
    gold = {}
    if labels_path is not None:
        with open(labels_path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                parts = line.strip().split(",")
                if len(parts) != 2 or parts[0].lower() == "uid":
                    continue
                try:
                    gold[parts[0].strip()] = SentimentLabel.parse(parts[1])
                except ValueError:
                    raise LabelError(labels_path, lineno, parts[1]) from None

    sentences: list[LabeledSentence] = []
    seen = set()
    current = None
    tokens: list[str] = []

    def flush():
        if current is not None:
            sent_id, label = current
            sentences.append(LabeledSentence(sent_id, " ".join(tokens), label=label))

    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if parts[0] == "meta":
                flush()
                tokens = []
                if len(parts) < 2 or not parts[1].strip():
                    raise ParseError(path, lineno, "meta line without sentence id")
                sent_id = parts[1].strip()
                if sent_id in seen:
                    raise DuplicateIdError(path, lineno, sent_id)
                seen.add(sent_id)
                label = gold.get(sent_id)
                if len(parts) >= 3 and parts[2].strip():
                    try:
                        label = SentimentLabel.parse(parts[2])
                    except ValueError:
                        raise LabelError(path, lineno, parts[2]) from None
                current = (sent_id, label)
            else:
                if current is None:
                    raise ParseError(path, lineno, "token line before the first meta line")
                if parts[0]:
                    tokens.append(parts[0])
    flush()
    if not sentences:
        raise CorpusError(f"{path}: split {name!r} is empty")
    return CorpusSplit(name, sentences)


def load_any(path, name: str, labels_path=None) -> CorpusSplit:
    """Dispatch to :func:`load_conll` or :func:`load_split` by sniffing the first line.

    ``labels_path`` is only meaningful for the CoNLL format.
    """
    with open(path, encoding="utf-8") as f:
        first = next((line for line in f if line.strip()), "")
    if first.startswith("meta\t"):
        return load_conll(path, name, labels_path)
    if labels_path is not None:
        raise CorpusError(f"{path}: a separate labels file is only supported for CoNLL input")
    return load_split(path, name)


def write_split(split: CorpusSplit, path, text=None) -> None:
    """Write ``split`` as TSV; ``text`` optionally maps a sentence to the text column."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        for sent in split:
            body = sent.raw_text if text is None else text(sent)
            label = "" if sent.label is None else str(sent.label)
            f.write(f"{sent.id}\t{label}\t{escape_text(body)}\n")


@dataclass(frozen=True)
class StopwordList:
    words: frozenset

    def __post_init__(self):
        for w in self.words:
            if w != w.lower() or not w or any(c.isspace() for c in w):
                raise ValueError(f"invalid stopword {w!r}")

    def __contains__(self, word) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)


def load_stopwords(path=None) -> StopwordList:
    """Load one stopword per line; ``None`` loads the bundled English list."""
    if path is None:
        text = resources.files("codemix_sentiment").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = {w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#")}
    return StopwordList(frozenset(words))


def class_distribution(split: CorpusSplit) -> dict[SentimentLabel, int]:
    counts = Counter(s.label for s in split if s.label is not None)
    return {label: counts.get(label, 0) for label in LABELS}


def top_frequent_words(split: CorpusSplit, label: SentimentLabel, k: int = DEFAULT_TOP_K,
                       min_len: int = DEFAULT_MIN_LEN,
                       stopwords: StopwordList | Iterable[str] = ()) -> list[str]:
    """Most frequent tokens among the sentences carrying ``label``.

    Frequency is the number of token occurrences. Tokens shorter than
    ``min_len`` characters and stopwords are skipped; ties are broken
    lexicographically.
    """
    counts: Counter = Counter()
    for sent in split:
        if sent.label is not label:
            continue
        counts.update(t for t in sent.tokens if len(t) >= min_len and t not in stopwords)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [word for word, _ in ranked[:k]]


@dataclass
class OverlapReport:
    """Pairwise percentage overlap of per-label top-k word lists."""

    k: int
    top_words: dict[SentimentLabel, list[str]]
    cells: dict[tuple[SentimentLabel, SentimentLabel], float]
    short_lists: list[SentimentLabel]

    @property
    def warning(self) -> bool:
        return bool(self.short_lists)

    def __getitem__(self, pair: tuple[SentimentLabel, SentimentLabel]) -> float:
        return self.cells[pair]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "top_words": {str(lab): words for lab, words in self.top_words.items()},
            "overlap": {str(a): {str(b): self.cells[(a, b)] for b in LABELS if b is not a} for a in LABELS},
            "warning_short_lists": [str(lab) for lab in self.short_lists],
        }


def overlap_matrix(split: CorpusSplit, stopwords: StopwordList | Iterable[str] = (),
                   k: int = DEFAULT_TOP_K, min_len: int = DEFAULT_MIN_LEN) -> OverlapReport:
    top = {lab: top_frequent_words(split, lab, k=k, min_len=min_len, stopwords=stopwords) for lab in LABELS}
    cells = {}
    for a in LABELS:
        for b in LABELS:
            if a is not b:
                cells[(a, b)] = 100.0 * len(set(top[a]) & set(top[b])) / k
    short = [lab for lab in LABELS if len(top[lab]) < k]
    return OverlapReport(k, top, cells, short)


def label_sequence(values: Sequence[str]) -> list[SentimentLabel]:
    """Parse labels given either as names or as the one-letter P/N/U codes."""
    out = []
    for v in values:
        v = v.strip()
        if len(v) == 1 and v.upper() in "PNU":
            out.append(LABELS["PNU".index(v.upper())])
        else:
            out.append(SentimentLabel.parse(v))
    return out
