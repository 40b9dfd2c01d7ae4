"""Text normalization, rule-based proxy masking, tokenization, and TF-IDF.

All matching is case-insensitive and word-boundary based. Stem entries match
any alphabetic token that starts with the stem ("discharge" masks
"discharged"); exact-token entries ("dc") match only the bare token; phrase
entries match whole phrases. A conditional term is masked only when one of
its triggers occurs in the same sentence, with sentences delimited by
``. ! ?`` and newline.

TF-IDF is fit on training documents only, with the smoothed formula
idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1 and L2 row normalization.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .io_utils import read_json, write_json

MASK_TOKEN = "[MASK]"

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SENTENCE_RE = re.compile(r"[^.!?\n]+")


def normalize_text(text: str) -> str:
    """NFKD-decompose and strip every non-ASCII byte; idempotent."""
    decomposed = unicodedata.normalize("NFKD", text)
    return decomposed.encode("ascii", "ignore").decode("ascii")


def _stem_pattern(stem: str) -> str:
    # Prefix match on a word: "discharge" also hits "discharged".
    return rf"\b{re.escape(stem)}[a-z]*\b"


def _exact_pattern(token: str) -> str:
    return rf"\b{re.escape(token)}\b"


def _phrase_pattern(phrase: str) -> str:
    words = phrase.split()
    return r"\b" + r"\s+".join(re.escape(w) for w in words) + r"\b"


def _term_pattern(term: str) -> str:
    """Pattern for a lexicon/trigger entry: phrases match whole phrases,
    short tokens (<=2 chars, e.g. "dc") match exactly, longer single words
    match as stems."""
    if " " in term:
        return _phrase_pattern(term)
    if len(term) <= 2 or not term.isalpha():
        return _exact_pattern(term)
    return _stem_pattern(term)


@dataclass(frozen=True)
class MaskRuleSet:
    """Rule-based proxy mask: stems, exact tokens, phrases, and
    sentence-conditional terms with their trigger sets."""

    stems: tuple[str, ...] = ("discharge", "dispo")
    exact_tokens: tuple[str, ...] = ("dc",)
    phrases: tuple[str, ...] = ("next day", "within 24 hours", "by morning", "overnight")
    conditional_terms: tuple[tuple[str, tuple[str, ...]], ...] = (
        ("tomorrow", ("discharge", "dc", "go home", "leave")),
    )
    mask_token: str = MASK_TOKEN

    def __post_init__(self):
        for entry in (*self.stems, *self.exact_tokens, *self.phrases):
            if entry != entry.lower() or not entry.isascii():
                raise ConfigError(f"mask rule entries must be lowercase ASCII: {entry!r}")
        for term, triggers in self.conditional_terms:
            bad = [t for t in (term, *triggers) if t != t.lower() or not t.isascii()]
            if bad:
                raise ConfigError(f"conditional rule entries must be lowercase ASCII: {bad}")

    @classmethod
    def from_file(cls, path: str | Path) -> "MaskRuleSet":
        raw = read_json(path)
        return cls(
            stems=tuple(raw.get("stems", [])),
            exact_tokens=tuple(raw.get("exact_tokens", [])),
            phrases=tuple(raw.get("phrases", [])),
            conditional_terms=tuple(
                (item["term"], tuple(item["triggers"])) for item in raw.get("conditional_terms", [])
            ),
            mask_token=raw.get("mask_token", MASK_TOKEN),
        )

    def to_dict(self) -> dict:
        return {
            "stems": list(self.stems),
            "exact_tokens": list(self.exact_tokens),
            "phrases": list(self.phrases),
            "conditional_terms": [
                {"term": term, "triggers": list(trig)} for term, trig in self.conditional_terms
            ],
            "mask_token": self.mask_token,
        }


def default_mask_rules() -> MaskRuleSet:
    return MaskRuleSet.from_file(data_path("mask_rules.json"))


def data_path(name: str) -> Path:
    """Path of a packaged data fixture (rules, lexicon, note templates)."""
    return Path(str(resources.files("leakaudit").joinpath("data", name)))


@lru_cache(maxsize=16)
def _compiled_rules(rules: MaskRuleSet):
    # Phrases first so multi-word matches win over stems at the same start.
    alternatives = (
        [_phrase_pattern(p) for p in rules.phrases]
        + [_stem_pattern(s) for s in rules.stems]
        + [_exact_pattern(t) for t in rules.exact_tokens]
    )
    unconditional = re.compile("|".join(alternatives), re.IGNORECASE) if alternatives else None
    conditionals = [
        (re.compile(_phrase_pattern(term), re.IGNORECASE),
         re.compile("|".join(_term_pattern(t) for t in triggers), re.IGNORECASE))
        for term, triggers in rules.conditional_terms
        if triggers
    ]
    return unconditional, conditionals


def find_mask_spans(text: str, rules: MaskRuleSet) -> list[tuple[int, int]]:
    """Character spans apply_rule_mask will replace, non-overlapping and
    sorted by start."""
    unconditional, conditionals = _compiled_rules(rules)
    spans: list[tuple[int, int]] = []
    if unconditional is not None:
        spans.extend(m.span() for m in unconditional.finditer(text))
    for sentence in _SENTENCE_RE.finditer(text):
        chunk = sentence.group(0)
        for term_re, trigger_re in conditionals:
            if trigger_re.search(chunk):
                offset = sentence.start()
                spans.extend((offset + m.start(), offset + m.end()) for m in term_re.finditer(chunk))
    spans.sort(key=lambda s: (s[0], -(s[1] - s[0])))
    merged: list[tuple[int, int]] = []
    for start, end in spans:
        if merged and start < merged[-1][1]:
            continue
        merged.append((start, end))
    return merged


def apply_rule_mask(text: str, rules: MaskRuleSet | None = None) -> str:
    """Replace each matched span with exactly one mask token."""
    if rules is None:
        rules = default_mask_rules()
    spans = find_mask_spans(text, rules)
    out = text
    for start, end in reversed(spans):
        out = out[:start] + rules.mask_token + out[end:]
    return out


def tokenize(
    text: str,
    mask_token: str = MASK_TOKEN,
    ngram_min: int = 1,
    ngram_max: int = 2,
) -> list[str]:
    """Lowercased unigram/bigram stream. The mask token is a segment
    boundary: it emits nothing and no n-gram spans it."""
    terms: list[str] = []
    segments = text.split(mask_token) if mask_token else [text]
    for segment in segments:
        tokens = _TOKEN_RE.findall(segment.lower())
        for n in range(ngram_min, ngram_max + 1):
            for i in range(len(tokens) - n + 1):
                terms.append(" ".join(tokens[i : i + n]))
    return terms


@dataclass(frozen=True)
class TfidfConfig:
    ngram_min: int = 1
    ngram_max: int = 2
    max_features: int = 10000
    min_df: int = 3

    def __post_init__(self):
        if self.ngram_min > self.ngram_max:
            raise ConfigError("ngram_min must be <= ngram_max")
        if self.max_features < 1 or self.min_df < 1:
            raise ConfigError("max_features and min_df must be >= 1")

    def to_dict(self) -> dict:
        return {
            "ngram_min": self.ngram_min,
            "ngram_max": self.ngram_max,
            "max_features": self.max_features,
            "min_df": self.min_df,
        }


@dataclass
class TfidfModel:
    """Train-fitted vocabulary with document frequencies and idf weights.

    ``terms`` is the vocabulary in index order (lexicographic); ``idf`` is
    aligned with it.
    """

    vocabulary: dict[str, int]
    doc_freq: dict[str, int]
    idf: np.ndarray
    n_docs: int
    config: TfidfConfig
    mask_token: str = MASK_TOKEN

    @property
    def terms(self) -> list[str]:
        ordered = sorted(self.vocabulary.items(), key=lambda kv: kv[1])
        return [t for t, _ in ordered]

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def save(self, path: str | Path) -> None:
        write_json(path, {
            "config": self.config.to_dict(),
            "mask_token": self.mask_token,
            "n_docs": self.n_docs,
            "vocabulary": self.vocabulary,
            "doc_freq": self.doc_freq,
            "idf": [float(v) for v in self.idf],
        })

    @classmethod
    def load(cls, path: str | Path) -> "TfidfModel":
        raw = read_json(path)
        return cls(
            vocabulary={k: int(v) for k, v in raw["vocabulary"].items()},
            doc_freq={k: int(v) for k, v in raw["doc_freq"].items()},
            idf=np.asarray(raw["idf"], dtype=float),
            n_docs=int(raw["n_docs"]),
            config=TfidfConfig(**raw["config"]),
            mask_token=raw.get("mask_token", MASK_TOKEN),
        )


@dataclass
class DocVector:
    """Sparse L2-normalized TF-IDF row (all-zero documents stay all-zero)."""

    weights: dict[int, float]
    dim: int

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        for idx, value in self.weights.items():
            dense[idx] = value
        return dense


def _mask_fragments(mask_token: str) -> set[str]:
    return set(_TOKEN_RE.findall(mask_token.lower()))


def fit_tfidf(
    train_docs: list[str],
    config: TfidfConfig | None = None,
    mask_token: str = MASK_TOKEN,
) -> TfidfModel:
    """Fit vocabulary, document frequencies, and idf on training docs only.

    Candidates are n-grams with document frequency >= min_df; when more than
    max_features survive, the highest-df terms are kept with lexicographic
    tie-breaking. Vocabulary indices follow lexicographic term order.
    """
    if config is None:
        config = TfidfConfig()
    if not train_docs:
        raise DataError("cannot fit TF-IDF on an empty corpus")
    forbidden = _mask_fragments(mask_token)
    df: Counter[str] = Counter()
    for doc in train_docs:
        seen = set(tokenize(doc, mask_token, config.ngram_min, config.ngram_max))
        df.update(seen)
    candidates = [
        t for t, n in df.items()
        if n >= config.min_df and not (set(t.split(" ")) & forbidden)
    ]
    if len(candidates) > config.max_features:
        candidates.sort(key=lambda t: (-df[t], t))
        candidates = candidates[: config.max_features]
    candidates.sort()
    vocabulary = {t: i for i, t in enumerate(candidates)}
    n_docs = len(train_docs)
    idf = np.array(
        [math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in candidates], dtype=float
    )
    return TfidfModel(
        vocabulary=vocabulary,
        doc_freq={t: df[t] for t in candidates},
        idf=idf,
        n_docs=n_docs,
        config=config,
        mask_token=mask_token,
    )


def transform_tfidf(model: TfidfModel, doc: str, normalize: bool = True) -> DocVector:
    """Raw term counts x idf, then L2 normalization (unless disabled)."""
    cfg = model.config
    counts = Counter(tokenize(doc, model.mask_token, cfg.ngram_min, cfg.ngram_max))
    weights: dict[int, float] = {}
    for term, count in counts.items():
        idx = model.vocabulary.get(term)
        if idx is not None:
            weights[idx] = count * float(model.idf[idx])
    if normalize and weights:
        norm = math.sqrt(sum(v * v for v in weights.values()))
        if norm > 0:
            weights = {i: v / norm for i, v in weights.items()}
    return DocVector(weights=weights, dim=model.dim)


def transform_matrix(model: TfidfModel, docs: list[str], normalize: bool = True) -> np.ndarray:
    """Dense (n_docs, |vocabulary|) TF-IDF matrix."""
    out = np.zeros((len(docs), model.dim))
    for i, doc in enumerate(docs):
        vec = transform_tfidf(model, doc, normalize=normalize)
        for idx, value in vec.weights.items():
            out[i, idx] = value
    return out


@dataclass(frozen=True)
class ProxyLexicon:
    """Predefined discharge-proxy lexicon.

    ``stems``/``exact_tokens``/``phrases`` drive audit-mask matching;
    ``inject_phrases`` is the pool the synthetic generator plants into
    leaked notes.
    """

    stems: tuple[str, ...] = ()
    exact_tokens: tuple[str, ...] = ()
    phrases: tuple[str, ...] = ()
    inject_phrases: tuple[str, ...] = ()

    @classmethod
    def from_file(cls, path: str | Path) -> "ProxyLexicon":
        raw = read_json(path)
        return cls(
            stems=tuple(raw.get("stems", [])),
            exact_tokens=tuple(raw.get("exact_tokens", [])),
            phrases=tuple(raw.get("phrases", [])),
            inject_phrases=tuple(raw.get("inject_phrases", [])),
        )

    def to_dict(self) -> dict:
        return {
            "stems": list(self.stems),
            "exact_tokens": list(self.exact_tokens),
            "phrases": list(self.phrases),
            "inject_phrases": list(self.inject_phrases),
        }


def default_proxy_lexicon() -> ProxyLexicon:
    return ProxyLexicon.from_file(data_path("proxy_lexicon.json"))


def lexicon_matches_term(lexicon: ProxyLexicon, term: str) -> bool:
    """Does a vocabulary term (unigram or space-joined n-gram) hit the
    lexicon under stem semantics?"""
    tokens = term.split(" ")
    for token in tokens:
        if any(token.startswith(stem) for stem in lexicon.stems):
            return True
        if token in lexicon.exact_tokens:
            return True
    padded = f" {term} "
    return any(f" {phrase} " in padded for phrase in lexicon.phrases)
