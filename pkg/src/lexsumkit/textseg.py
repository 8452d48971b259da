"""Sentence segmentation, word tokenization, and n-gram extraction for
English (Latin script) and Hindi (Devanagari) text.

Tokens throughout the package are word tokens produced by
:func:`tokenize_words`; model subword budgets are approximated with word
counts by the callers that need them.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field

LANGUAGES = ("en", "hi")

DANDA = "।"

_EN_TERMINATORS = frozenset({".", "?", "!"})
_HI_TERMINATORS = frozenset({".", "?", "!", DANDA})

# Closing quotes/brackets that may sit between a terminator and the
# whitespace that follows it.
_CLOSERS = frozenset("\"'’”)»]}")

# Abbreviations common in Indian legal prose, lowercased with their trailing
# period. A period ending one of these never terminates a sentence.
_ABBREVIATIONS = frozenset({
    "no.", "nos.", "vs.", "v.", "m/s.",
    "crl.", "crl.a.", "crl.m.p.", "cr.", "c.a.", "w.p.", "s.l.p.",
    "m.a.", "i.a.", "o.s.", "a.i.r.", "s.c.", "s.c.c.", "h.c.",
    "u/s.", "sec.", "secs.", "art.", "arts.", "sch.",
    "co.", "ltd.", "pvt.", "inc.", "corp.",
    "dr.", "mr.", "mrs.", "ms.", "smt.", "shri.", "prof.", "rev.",
    "hon.", "hon'ble.", "adv.", "j.", "jj.", "c.j.",
    "govt.", "dept.", "dist.", "addl.", "asst.", "anr.", "ors.",
    "i.e.", "e.g.", "viz.", "approx.",
    "p.", "pp.", "para.", "paras.", "r/w.", "w.e.f.", "w.r.t.",
    "u.p.", "m.p.", "a.p.",
})


@dataclass
class Sentence:
    """One sentence of a document or summary.

    ``index`` is the 0-based position within the parent sequence; ``tokens``
    is the word-token view of ``text``.
    """

    index: int
    text: str
    tokens: list[str] = field(default_factory=list)


@dataclass
class NGramBag:
    """Multiset of n-grams; keys are token tuples of length ``n``."""

    n: int
    counts: Counter

    def total(self) -> int:
        return sum(self.counts.values())


def _check_language(language: str) -> None:
    if language not in LANGUAGES:
        raise ValueError(f"unknown language tag: {language!r} (expected one of {LANGUAGES})")


class _WordCharMap(dict):
    """str.translate table replacing non-word codepoints with spaces.

    Word characters are Unicode letters, numbers, and marks; marks must be
    kept so Devanagari matras stay attached to their consonants.
    """

    def __missing__(self, codepoint):
        if unicodedata.category(chr(codepoint))[0] in "LMN":
            repl = codepoint
        else:
            repl = 0x20
        self[codepoint] = repl
        return repl


_WORD_MAP = _WordCharMap()

_EDGE_STRIP_CACHE: dict[str, bool] = {}


def _is_edge_punct(ch: str) -> bool:
    cached = _EDGE_STRIP_CACHE.get(ch)
    if cached is None:
        cached = unicodedata.category(ch)[0] in "PS"
        _EDGE_STRIP_CACHE[ch] = cached
    return cached


def tokenize_words(text: str, language: str = "en") -> list[str]:
    """Split text into word tokens.

    Text is NFKC-normalized and lowercased (a no-op outside cased scripts).
    For ``en``, tokens are maximal runs of letters/digits/marks, so
    punctuation splits ("Court's" -> ["court", "s"]). For ``hi``, tokens are
    whitespace-separated with punctuation and symbols stripped from the
    edges, leaving Devanagari words whole.
    """
    _check_language(language)
    if not text:
        return []
    norm = unicodedata.normalize("NFKC", text).lower()
    if language == "en":
        return norm.translate(_WORD_MAP).split()
    tokens = []
    for raw in norm.split():
        start, end = 0, len(raw)
        while start < end and _is_edge_punct(raw[start]):
            start += 1
        while end > start and _is_edge_punct(raw[end - 1]):
            end -= 1
        if end > start:
            tokens.append(raw[start:end])
    return tokens


def whitespace_tokens(text: str) -> list[str]:
    """NFKC-normalized whitespace split, used for word-count statistics."""
    return unicodedata.normalize("NFKC", text).split()


def _word_before(text: str, period_index: int) -> str:
    start = period_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:period_index + 1].lower()


def _next_nonspace(text: str, start: int) -> str | None:
    for ch in text[start:]:
        if not ch.isspace():
            return ch
    return None


def split_sentences(text: str, language: str = "en") -> list[Sentence]:
    """Segment text into sentences.

    English splits on ``. ? !``; Hindi additionally on the danda. A period
    ending a guarded abbreviation ("No.", "Crl.A.", ...) or followed by a
    lowercase Latin letter does not split. Concatenating the sentence texts
    reproduces the input up to whitespace.
    """
    _check_language(language)
    terminators = _HI_TERMINATORS if language == "hi" else _EN_TERMINATORS
    n = len(text)
    boundaries = []
    for i, ch in enumerate(text):
        if ch not in terminators:
            continue
        j = i + 1
        while j < n and text[j] in _CLOSERS:
            j += 1
        if j < n and not text[j].isspace():
            continue
        if ch == ".":
            if _word_before(text, i) in _ABBREVIATIONS:
                continue
            follower = _next_nonspace(text, j)
            if follower is not None and follower.islower():
                continue
        boundaries.append(j)

    sentences = []
    prev = 0
    for boundary in boundaries + [n]:
        piece = text[prev:boundary].strip()
        prev = boundary
        if not piece:
            continue
        sentences.append(Sentence(index=len(sentences), text=piece,
                                  tokens=tokenize_words(piece, language)))
    return sentences


def ngrams(tokens: list[str], n: int) -> NGramBag:
    """Multiset of n-grams over a token sequence.

    Total count is ``max(0, len(tokens) - n + 1)``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    counts = Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return NGramBag(n=n, counts=counts)
