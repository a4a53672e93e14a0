"""Text analytics used by the Intrinsic, Internal Temperature and T2T families.

Everything here is deliberately lightweight: a regex tokenizer, phrase
lexicons, a Flesch reading-ease scorer, a lexicon sentiment scorer, a
rule-based tagger and three document similarity measures.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

_WORD_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*")
_SENTENCE_END_RE = re.compile(r"(?<=[.!?])(?:\s+|$)")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")


@dataclass(frozen=True)
class TokenStream:
    text: str
    tokens: tuple[str, ...]
    raw_tokens: tuple[str, ...]
    sentences: tuple[tuple[int, int], ...]  # [start, end) into tokens
    tags: tuple[str, ...] = ()

    def __len__(self):
        return len(self.tokens)

    @property
    def sentence_count(self) -> int:
        return len(self.sentences)


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_END_RE.split(text) if s and _WORD_RE.search(s)]


def tokenize(text: str, tagger: "Tagger | None" = None) -> TokenStream:
    raw: list[str] = []
    spans = []
    for sentence in split_sentences(text or ""):
        words = _WORD_RE.findall(sentence)
        spans.append((len(raw), len(raw) + len(words)))
        raw.extend(words)
    tokens = tuple(w.lower() for w in raw)
    stream = TokenStream(text or "", tokens, tuple(raw), tuple(spans))
    tagger = tagger or BASELINE_TAGGER
    return TokenStream(stream.text, stream.tokens, stream.raw_tokens, stream.sentences, tuple(tagger.tag(stream)))


# --- lexicons ------------------------------------------------------------------

def _phrase_pattern(phrases: Iterable[str]) -> re.Pattern:
    parts = []
    for p in sorted(set(phrases), key=lambda s: (-len(s), s)):
        body = re.escape(p)
        if re.match(r"\w", p):
            body = r"\b" + body
        if re.search(r"\w$", p):
            body = body + r"\b"
        parts.append(body)
    return re.compile("|".join(parts))


@dataclass(frozen=True)
class LexiconSet:
    phrases: Mapping[str, tuple[str, ...]]
    sentiment: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        patterns = {}
        for name, items in self.phrases.items():
            if not items:
                raise ValueError(f"lexicon {name!r} is empty")
            patterns[name] = _phrase_pattern(p.lower() for p in items)
        object.__setattr__(self, "_patterns", patterns)

    def pattern(self, name: str) -> re.Pattern:
        try:
            return self._patterns[name]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"unknown lexicon {name!r}") from None

    @classmethod
    def from_mapping(cls, data: Mapping) -> "LexiconSet":
        data = dict(data)
        raw_sentiment = data.pop("sentiment", {})
        sentiment = {k.lower(): (float(v[0]), float(v[1])) for k, v in raw_sentiment.items()}
        phrases = {k: tuple(str(p).lower() for p in v) for k, v in data.items()}
        return cls(phrases, sentiment)

    def to_mapping(self) -> dict:
        out: dict = {k: list(v) for k, v in self.phrases.items()}
        out["sentiment"] = {k: list(v) for k, v in self.sentiment.items()}
        return out

    def extended(self, extra: Mapping) -> "LexiconSet":
        merged = self.to_mapping()
        for name, value in extra.items():
            if name == "sentiment":
                merged["sentiment"].update(value)
            else:
                merged[name] = list(dict.fromkeys([*merged.get(name, []), *value]))
        return LexiconSet.from_mapping(merged)


def default_lexicons() -> LexiconSet:
    text = resources.files("tlp").joinpath("data/lexicons.json").read_text(encoding="utf-8")
    return LexiconSet.from_mapping(json.loads(text))


def load_lexicons(path: str | Path | None = None) -> LexiconSet:
    """Bundled lexicons, optionally extended by a JSON file of the same shape."""
    base = default_lexicons()
    if path is None:
        return base
    return base.extended(json.loads(Path(path).read_text(encoding="utf-8")))


def lexicon_count(text: str | TokenStream, name: str, lexicons: LexiconSet) -> int:
    raw = text.text if isinstance(text, TokenStream) else (text or "")
    return sum(1 for _ in lexicons.pattern(name).finditer(raw.lower()))


# --- readability -----------------------------------------------------------------

def count_syllables(word: str) -> int:
    w = word.lower()
    groups = len(_VOWEL_GROUP_RE.findall(w))
    if groups > 1 and w.endswith("e") and not w.endswith("le") and not w.endswith("ee"):
        groups -= 1
    return max(groups, 1)


class UndefinedScoreError(ValueError):
    pass


def flesch_reading_ease(text: str | TokenStream) -> float:
    stream = text if isinstance(text, TokenStream) else tokenize(text)
    n_words = len(stream.tokens)
    if n_words == 0:
        raise UndefinedScoreError("Flesch reading ease needs at least one word")
    syllables = sum(count_syllables(w) for w in stream.tokens)
    return 206.835 - 1.015 * (n_words / stream.sentence_count) - 84.6 * (syllables / n_words)


# --- sentiment -------------------------------------------------------------------

def sentiment(text: str | TokenStream, lexicons: LexiconSet) -> tuple[float, float]:
    """Mean polarity and subjectivity over sentiment-lexicon hits; (0, 0) without hits."""
    tokens = text.tokens if isinstance(text, TokenStream) else tuple(w.lower() for w in _WORD_RE.findall(text or ""))
    hits = [lexicons.sentiment[t] for t in tokens if t in lexicons.sentiment]
    if not hits:
        return 0.0, 0.0
    polarity = sum(h[0] for h in hits) / len(hits)
    subjectivity = sum(h[1] for h in hits) / len(hits)
    return min(1.0, max(-1.0, polarity)), min(1.0, max(0.0, subjectivity))


# --- tagging and shallow grammar --------------------------------------------------

class Tagger(Protocol):
    def tag(self, stream: TokenStream) -> list[str]:
        """Return one of ``noun``, ``verb``, ``pron`` or ``other`` per token."""


DETERMINERS = frozenset(
    "the a an this that these those each every any no its their our my your his her all another".split()
)
PRONOUNS = frozenset("i we you he she it they someone somebody".split())
AUXILIARIES = frozenset("be is are was were been being am have has had do does did".split())
MODALS = frozenset("shall must should will would can could may might".split())
FUNCTION_WORDS = frozenset(
    """and or but nor so yet for of in on at to from by with without into onto over under about
    as than then there here when where while if unless because since after before during until
    not also only just too very more less most least such which who whom whose what how why
    up down out off via per within across between upon among""".split()
)
ADJECTIVES = frozenset(
    """new old null empty wrong current default same other different large small good bad possible
    multiple single several many few some first last next previous main simple invalid valid
    correct incorrect available unable able missing extra additional full partial own""".split()
)
VERB_BASES = frozenset(
    """add allow apply break build call cause change check clean close commit compile configure contain
    convert create delete deploy describe detect disable display enable ensure execute expose fail fetch
    fix generate get give handle implement improve include install introduce invoke keep let load log make
    merge move need open parse pass print process provide put read receive refactor reduce register release
    remove rename replace report require reset resolve restart return run save send set show skip sort
    start stop store support take throw try update upgrade use validate write become look see want work
    seem go come cache split drop lose hang leak crash throw catch correspond mean expect avoid
    hold find follow list match miss""".split()
)
NON_ACTION_VERBS = AUXILIARIES


def _verb_base(token: str) -> str | None:
    if token in VERB_BASES or token in AUXILIARIES:
        return token
    candidates = []
    if token.endswith("ies"):
        candidates.append(token[:-3] + "y")
    if token.endswith("es"):
        candidates.append(token[:-2])
    if token.endswith("s"):
        candidates.append(token[:-1])
    if token.endswith("ed"):
        candidates += [token[:-2], token[:-1], token[:-3] if len(token) > 4 and token[-3] == token[-4] else ""]
    if token.endswith("ing"):
        candidates += [token[:-3], token[:-3] + "e", token[:-4] if len(token) > 5 and token[-4] == token[-5] else ""]
    for c in candidates:
        if c and c in VERB_BASES:
            return c
    return None


class RuleTagger:
    """Lexicon and rule tagger.

    Known verbs (with simple inflection stripping) and auxiliaries are verbs,
    pronouns are ``pron``, determiners, modals, function words, adjectives and
    numbers are ``other``; every remaining alphabetic token is a noun. A known
    verb directly after a determiner is re-tagged as a noun ("the fix").
    """

    def tag(self, stream: TokenStream) -> list[str]:
        tags = []
        for start, end in stream.sentences:
            prev = None
            for tok in stream.tokens[start:end]:
                if tok in PRONOUNS:
                    tag = "pron"
                elif tok in MODALS or tok in DETERMINERS or tok in FUNCTION_WORDS or tok in ADJECTIVES:
                    tag = "other"
                elif not any(ch.isalpha() for ch in tok) or tok.endswith("ly"):
                    tag = "other"
                elif _verb_base(tok) is not None and prev not in DETERMINERS:
                    tag = "verb"
                else:
                    tag = "noun"
                tags.append(tag)
                prev = tok
        return tags


BASELINE_TAGGER = RuleTagger()


@dataclass(frozen=True)
class GrammarCounts:
    subjects: int
    verbs: int
    entities: int
    actions: int
    words: int
    complete_sentence_fraction: float

    @property
    def action_density(self) -> float:
        return self.actions / self.words if self.words else 0.0


def _sentence_complete(tags: Sequence[str]) -> bool:
    nominal = ("noun", "pron")
    for j, tag in enumerate(tags):
        if tag != "verb":
            continue
        if any(t in nominal for t in tags[:j]) and any(t == "noun" or t == "pron" for t in tags[j + 1:]):
            return True
    return False


def _count_entities(stream: TokenStream) -> int:
    entities = 0
    for start, end in stream.sentences:
        in_entity = False
        for i in range(start, end):
            raw = stream.raw_tokens[i]
            is_acronym = len(raw) > 1 and raw.isupper() and any(ch.isalpha() for ch in raw)
            is_named = raw[:1].isupper() and i > start
            mixed = any(ch.isupper() for ch in raw[1:]) and any(ch.islower() for ch in raw)
            hit = is_acronym or is_named or mixed
            if hit and not in_entity:
                entities += 1
            in_entity = hit
    return entities


def grammar_counts(stream: TokenStream) -> GrammarCounts:
    tags = stream.tags
    if not stream.tokens:
        return GrammarCounts(0, 0, 0, 0, 0, 0.0)
    verbs = sum(1 for t in tags if t == "verb")
    actions = sum(1 for tok, t in zip(stream.tokens, tags) if t == "verb" and tok not in NON_ACTION_VERBS)
    nouns = sum(1 for t in tags if t == "noun")
    complete = sum(1 for s, e in stream.sentences if _sentence_complete(tags[s:e]))
    return GrammarCounts(
        subjects=nouns,
        verbs=verbs,
        entities=_count_entities(stream),
        actions=actions,
        words=len(stream.tokens),
        complete_sentence_fraction=complete / len(stream.sentences),
    )


# --- similarity ----------------------------------------------------------------------

@dataclass(frozen=True)
class TfIdfModel:
    df: Mapping[str, int]
    n_docs: int
    cutoff: datetime | None = None

    @property
    def empty(self) -> bool:
        return self.n_docs == 0

    def idf(self, term: str) -> float:
        return math.log((1 + self.n_docs) / (1 + self.df.get(term, 0))) + 1.0

    def vector(self, tokens: Iterable[str]) -> dict[str, float]:
        counts = Counter(tokens)
        return {t: c * self.idf(t) for t, c in counts.items()}


def build_tfidf_model(history: Iterable[tuple[str, datetime]], cutoff: datetime | None) -> TfIdfModel:
    """Document frequencies from documents dated at or before ``cutoff``."""
    df: Counter = Counter()
    n = 0
    for text, ts in history:
        if cutoff is not None and ts > cutoff:
            continue
        n += 1
        df.update(set(_tokens(text)))
    return TfIdfModel(dict(df), n, cutoff)


def _tokens(text: str) -> list[str]:
    return [w.lower() for w in _WORD_RE.findall(text or "")]


def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def euclidean_tf_distance(a: Iterable[str], b: Iterable[str]) -> float:
    ca, cb = Counter(a), Counter(b)
    return math.sqrt(math.fsum((ca[t] - cb[t]) ** 2 for t in set(ca) | set(cb)))


def tfidf_cosine(a: Iterable[str], b: Iterable[str], model: TfIdfModel) -> float:
    if model.empty:
        return 0.0
    va, vb = model.vector(a), model.vector(b)
    na = math.sqrt(math.fsum(v * v for v in va.values()))
    nb = math.sqrt(math.fsum(v * v for v in vb.values()))
    if na == 0 or nb == 0:
        return 0.0
    # fsum is exactly rounded, so the result does not depend on argument order
    dot = math.fsum(v * vb[t] for t, v in va.items() if t in vb)
    return min(1.0, max(0.0, dot / (na * nb)))


SIMILARITY_METRICS = ("tfidf_cosine", "jaccard", "euclidean_tf")


def similarity(a: str, b: str, metric: str, model: TfIdfModel | None = None) -> float:
    ta, tb = _tokens(a), _tokens(b)
    if metric == "jaccard":
        return jaccard(ta, tb)
    if metric == "euclidean_tf":
        return 1.0 / (1.0 + euclidean_tf_distance(ta, tb))
    if metric == "tfidf_cosine":
        if model is None:
            raise ValueError("tfidf_cosine similarity requires a fitted TfIdfModel")
        return tfidf_cosine(ta, tb, model)
    raise ValueError(f"unknown similarity metric {metric!r}")
