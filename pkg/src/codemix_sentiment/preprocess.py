"""Normalisation of raw social-media text.

Hyperlinks, @mentions, hashtags, emoticons/emoji and special characters are
removed, the text is lowercased and whitespace is collapsed. The output
alphabet is ``[a-z0-9 ]`` which makes :func:`clean` idempotent.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

# Plain URLs, bare www hosts, and the space-separated form found in the
# SentiMix release ("https // t . co / APKD4G8lh0").
_URL_RES = (
    re.compile(r"https?://\S+", re.I),
    re.compile(r"\bwww\.\S+", re.I),
    re.compile(r"\bhttps?\s*:?\s*/\s*/\s*[\w\-]+(?:\s*\.\s*[\w\-]+)*(?:\s*/\s*[^\s/]*)*", re.I),
)

# The marker plus the handle; a handle split on underscores ("Shaan _ pathan _ 14")
# is consumed as a whole.
_MENTION_RE = re.compile(r"@+\s*\w+(?:\s*_\s*\w+)*")
_HASHTAG_RE = re.compile(r"#+\s*\w+(?:\s*_\s*\w+)*")

# ASCII emoticons. Only entries with at least one non-alphanumeric character
# are listed: removing all-alphanumeric ones ("xD", "XP") would eat real words
# and break idempotence.
ASCII_EMOTICONS = (
    ":-)", ":)", ";)", ";-)", ":o)", ":]", ":3", ":c)", ":>", "=]", "8)", "=)", ":}",
    ":^)", ":-D", ":D", "8-D", "x-D", "X-D", "=-D", "=D", "=-3", "=3", ":-))",
    ":'-)", ":')", ":*", ":-*", ":^*", ">:P", ":-P", ":P", "X-P", "x-p", ":-p", ":p",
    "=p", ":-b", ":b", ">:)", ">;)", ">:-)", "<3", "</3", ":L", ":-/", ">:/", ":S",
    ">:[", ":@", ":-(", ":[", ":-||", "=L", ":<", ":-[", ":-<", "=\\", "=/", ">:(",
    ":(", ">.<", ":'-(", ":'(", ":\\", ":-c", ":c", ":{", ">:\\", ";(", ":/", ":|",
    ":-|", ":O", ":-O", ":o", ":-o", "^_^", "^^", "-_-", "o_O", "O_o", "T_T",
)


def _emoticon_pattern(emoticons) -> re.Pattern:
    alts = []
    for emo in sorted(emoticons, key=len, reverse=True):
        body = re.escape(emo)
        # Emoticons starting/ending with a letter or digit must not be glued to a word.
        if emo[0].isalnum():
            body = r"(?<![A-Za-z0-9])" + body
        if emo[-1].isalnum():
            body = body + r"(?![A-Za-z0-9])"
        alts.append(body)
    return re.compile("|".join(alts))


_EMOTICON_RE = _emoticon_pattern(ASCII_EMOTICONS)

_EMOJI_RE = re.compile(
    "["
    "\U0001F000-\U0001FAFF"  # mahjong .. symbols & pictographs extended-A
    "\U00002600-\U000027BF"  # misc symbols, dingbats
    "\U00002300-\U000023FF"  # misc technical
    "\U00002B00-\U00002BFF"
    "\U0000FE00-\U0000FE0F"  # variation selectors
    "\U0000200D"             # zero-width joiner
    "\U000020E3"             # combining keycap
    "\U000E0020-\U000E007F"  # tag characters
    "]+"
)

_APOSTROPHES_RE = re.compile(r"['’‘`]")
_NON_ALNUM_RE = re.compile(r"[^a-z0-9]+")


@dataclass(frozen=True)
class EmojiLexicon:
    """Emoji sequence -> sentiment score in [-1, 1]."""

    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        for emoji, score in self.entries.items():
            if not emoji or any(c.isspace() for c in emoji):
                raise ValueError(f"invalid emoji key {emoji!r}")
            if not math.isfinite(score) or not -1.0 <= score <= 1.0:
                raise ValueError(f"emoji score for {emoji!r} out of range: {score}")

    def __contains__(self, emoji) -> bool:
        return emoji in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def pattern(self) -> re.Pattern | None:
        if not self.entries:
            return None
        keys = sorted(self.entries, key=len, reverse=True)
        return re.compile("|".join(re.escape(k) for k in keys))


def load_emoji_lexicon(path=None) -> EmojiLexicon:
    """Read an ``emoji,score`` CSV (header optional); ``None`` loads the bundled file."""
    if path is None:
        text = resources.files("codemix_sentiment").joinpath("data/emoji_lexicon.csv").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    entries = {}
    for lineno, row in enumerate(csv.reader(text.splitlines()), 1):
        if not row or not row[0].strip():
            continue
        if len(row) != 2:
            raise ValueError(f"emoji lexicon line {lineno}: expected 2 columns, got {len(row)}")
        emoji, score = row[0].strip(), row[1].strip()
        if lineno == 1 and emoji.lower() == "emoji":
            continue
        try:
            entries[emoji] = float(score)
        except ValueError:
            raise ValueError(f"emoji lexicon line {lineno}: bad score {score!r}") from None
    return EmojiLexicon(entries)


def clean(raw_text: str, lexicon: EmojiLexicon | None = None) -> str:
    text = raw_text
    for rx in _URL_RES:
        text = rx.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = _HASHTAG_RE.sub(" ", text)
    if lexicon is not None and len(lexicon):
        text = lexicon.pattern.sub(" ", text)
    text = _EMOJI_RE.sub(" ", text)
    text = _EMOTICON_RE.sub(" ", text)
    text = text.lower()
    # "don't" -> "dont" rather than "don t"
    text = _APOSTROPHES_RE.sub("", text)
    text = _NON_ALNUM_RE.sub(" ", text)
    return text.strip()


def tokenize(text: str) -> list[str]:
    return text.split()


def preprocess(raw_text: str, lexicon: EmojiLexicon | None = None) -> list[str]:
    """``tokenize(clean(raw_text))``."""
    return tokenize(clean(raw_text, lexicon))


def preprocess_split(split, lexicon: EmojiLexicon | None = None):
    """Fill ``tokens`` for every sentence of a split in place and return it."""
    for sent in split:
        sent.tokens = preprocess(sent.raw_text, lexicon)
    return split
