"""Tokenization and pluggable text-analysis providers.

Default providers are deliberately simple and deterministic: a lexicon-ratio
sentiment scorer and a gazetteer-based named-entity matcher. Both can be
swapped for anything implementing the same protocol.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

_PUNCT = string.punctuation + "“”‘’¿¡"
_URL_RE = re.compile(r"https?://|www\.", re.IGNORECASE)

NE_CLASSES = ("LOC", "PER", "ORG", "MISC")


def tokenize(text: str) -> list[str]:
    """Lowercase, strip surrounding punctuation, split on whitespace."""
    tokens = []
    for chunk in text.lower().split():
        token = chunk.strip(_PUNCT)
        if token:
            tokens.append(token)
    return tokens


def contains_url(text: str) -> bool:
    return _URL_RE.search(text) is not None


class SentimentScorer(Protocol):
    def score(self, text: str) -> float:
        """Sentiment in [0, 1]; 0 is strongly negative, 1 strongly positive."""
        ...


class NerProvider(Protocol):
    def entities(self, text: str) -> list[tuple[str, str]]:
        """(surface, class) pairs; class is one of LOC/PER/ORG/MISC."""
        ...


_DEFAULT_POSITIVE = frozenset(
    """good great excellent amazing wonderful love loved best happy positive
    success successful win winning improve improved strong support brilliant
    beautiful fantastic superb outstanding right hope useful helpful
    agree thanks welcome safe fair honest smart""".split()
)

_DEFAULT_NEGATIVE = frozenset(
    """bad terrible awful horrible hate hated worst sad negative fail failed
    failure lose losing weak against wrong broken poor corrupt disaster
    crisis fear angry anger stupid disgrace shame lie liar unfair ugly
    dangerous threat violence dead death kill war""".split()
)


@dataclass(frozen=True)
class LexiconSentimentScorer:
    """score = 0.5 + 0.5 * (pos - neg) / (pos + neg + 1) over token counts."""

    positive: frozenset[str] = _DEFAULT_POSITIVE
    negative: frozenset[str] = _DEFAULT_NEGATIVE

    def score(self, text: str) -> float:
        pos = neg = 0
        for token in tokenize(text):
            if token in self.positive:
                pos += 1
            elif token in self.negative:
                neg += 1
        return 0.5 + 0.5 * (pos - neg) / (pos + neg + 1)


@dataclass(frozen=True)
class DictionaryNerProvider:
    """Gazetteer matcher with a capitalized-token fallback (class MISC).

    The gazetteer maps lowercased surfaces (single tokens or phrases) to a
    class label. Longest phrase match wins; matched spans are reported with
    their original surface text.
    """

    gazetteer: dict[str, str] = field(default_factory=dict)
    fallback_capitalized: bool = True

    def __post_init__(self):
        bad = {c for c in self.gazetteer.values() if c not in NE_CLASSES}
        if bad:
            raise ValueError(f"unknown entity classes: {sorted(bad)}")

    @property
    def _max_phrase_len(self) -> int:
        if not self.gazetteer:
            return 1
        return max(len(k.split()) for k in self.gazetteer)

    def entities(self, text: str) -> list[tuple[str, str]]:
        # Raw whitespace chunks keep original casing for surface reporting.
        chunks = text.split()
        keys = [c.strip(_PUNCT).lower() for c in chunks]
        surfaces = [c.strip(_PUNCT) for c in chunks]
        found: list[tuple[str, str]] = []
        i = 0
        max_len = self._max_phrase_len
        while i < len(chunks):
            matched = 0
            if self.gazetteer:
                for length in range(min(max_len, len(chunks) - i), 0, -1):
                    phrase = " ".join(k for k in keys[i : i + length] if k)
                    if phrase and phrase in self.gazetteer:
                        found.append((" ".join(surfaces[i : i + length]), self.gazetteer[phrase]))
                        matched = length
                        break
            if matched:
                i += matched
                continue
            surface = surfaces[i]
            if self.fallback_capitalized and surface[:1].isupper() and surface.isalpha():
                found.append((surface, "MISC"))
            i += 1
        return found


@dataclass(frozen=True)
class AggressionLexicon:
    """Lowercased word set for the hostile/anger fraction feature."""

    words: frozenset[str]

    def __post_init__(self):
        if not self.words:
            raise ValueError("aggression lexicon must be non-empty")

    def count_hits(self, tokens: Iterable[str]) -> int:
        return sum(1 for t in tokens if t in self.words)


_DEFAULT_AGGRESSION = frozenset(
    """hate hatred hostile hostility attack attacks assault fight fights
    kill killed killing destroy destroyed crush punch slam smash rage
    furious angry anger outrage outraged insult insulting abuse abusive
    threat threaten violent violence vicious brutal cruel savage""".split()
)


def default_aggression_lexicon() -> AggressionLexicon:
    return AggressionLexicon(_DEFAULT_AGGRESSION)


def load_word_list(path: str | Path) -> frozenset[str]:
    """One token per line, UTF-8; blank lines and # comments ignored."""
    words = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.add(word)
    return frozenset(words)


def load_gazetteer(path: str | Path) -> dict[str, str]:
    """Tab-separated surface and class, one entry per line."""
    gaz: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.rstrip("\n")
            if not text.strip() or text.startswith("#"):
                continue
            parts = text.split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'surface<TAB>class'")
            surface, cls = parts[0].strip().lower(), parts[1].strip().upper()
            if cls not in NE_CLASSES:
                raise ValueError(f"line {lineno}: unknown class '{cls}'")
            gaz[surface] = cls
    return gaz


@dataclass(frozen=True)
class TextProviders:
    """Bundle of the pluggable analyzers used by feature extraction."""

    sentiment: SentimentScorer = field(default_factory=LexiconSentimentScorer)
    ner: NerProvider = field(default_factory=DictionaryNerProvider)
    aggression: AggressionLexicon = field(default_factory=default_aggression_lexicon)


def default_providers() -> TextProviders:
    return TextProviders()
