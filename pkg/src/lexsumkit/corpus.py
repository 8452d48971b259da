"""Ingestion of (document, summary) datasets and pre-training corpora, plus
corpus statistics and extractive-fragment measures.

Dataset files are JSON-Lines with one record per line:

    {"id": ..., "split": ..., "doc_text": ..., "summary_en": ..., "summary_hi": ...}

Pre-training corpora are JSON-Lines of ``{"id": ..., "text": ..., "language": ...}``.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .errors import DatasetFormatError
from .textseg import (
    LANGUAGES,
    Sentence,
    split_sentences,
    tokenize_words,
    whitespace_tokens,
)

SPLITS = ("train", "validation", "test")


@dataclass
class Judgment:
    """A source document with its sentence and token views."""

    id: str
    language: str
    text: str
    sentences: list[Sentence] = field(default_factory=list)
    token_count: int = 0


@dataclass
class GoldSummary:
    """Reference summary for one judgment, in English or Hindi."""

    judgment_id: str
    language: str
    text: str
    sentences: list[Sentence] = field(default_factory=list)


@dataclass
class DatasetSplit:
    name: str
    pairs: list[tuple[Judgment, GoldSummary]]


@dataclass
class StatsReport:
    n_pairs: int
    avg_doc_words: float
    avg_summary_words: float
    avg_coverage: float
    avg_density: float

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "avg_doc_words": self.avg_doc_words,
            "avg_summary_words": self.avg_summary_words,
            "avg_coverage": self.avg_coverage,
            "avg_density": self.avg_density,
        }


@dataclass
class PretrainDoc:
    """One unlabeled document of a pre-training corpus."""

    id: str
    text: str
    language: str


@dataclass(frozen=True)
class Fragment:
    """A maximal shared token run between a summary and its document."""

    summary_start: int
    doc_start: int
    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)


def _record_field(record: dict, key: str, lineno: int, path) -> str:
    value = record.get(key)
    if not isinstance(value, str) or not value.strip():
        raise DatasetFormatError(f"{path}: line {lineno}: missing or empty field {key!r}")
    return value


def _iter_records(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise DatasetFormatError(f"{path}: line {lineno}: record is not an object")
            yield lineno, record


def load_dataset(path, split: str, summary_language: str) -> DatasetSplit:
    """Load one split of a (document, summary) dataset.

    Record order is preserved; sentence and token views are populated.
    Raises :class:`DatasetFormatError` on malformed records (with line
    numbers), duplicate ids, or an empty split.
    """
    if split not in SPLITS:
        raise DatasetFormatError(f"unknown split {split!r} (expected one of {SPLITS})")
    if summary_language not in LANGUAGES:
        raise DatasetFormatError(
            f"unknown language tag {summary_language!r} (expected one of {LANGUAGES})")
    path = Path(path)
    summary_key = f"summary_{summary_language}"
    pairs: list[tuple[Judgment, GoldSummary]] = []
    seen_ids = set()
    for lineno, record in _iter_records(path):
        record_split = _record_field(record, "split", lineno, path)
        if record_split not in SPLITS:
            raise DatasetFormatError(f"{path}: line {lineno}: unknown split {record_split!r}")
        if record_split != split:
            continue
        doc_id = _record_field(record, "id", lineno, path)
        if doc_id in seen_ids:
            raise DatasetFormatError(f"{path}: line {lineno}: duplicate id {doc_id!r}")
        seen_ids.add(doc_id)
        doc_text = _record_field(record, "doc_text", lineno, path)
        summary_text = _record_field(record, summary_key, lineno, path)
        doc_language = record.get("doc_language", "en")
        if doc_language not in LANGUAGES:
            raise DatasetFormatError(
                f"{path}: line {lineno}: unknown language tag {doc_language!r}")
        judgment = Judgment(
            id=doc_id,
            language=doc_language,
            text=doc_text,
            sentences=split_sentences(doc_text, doc_language),
            token_count=len(tokenize_words(doc_text, doc_language)),
        )
        summary = GoldSummary(
            judgment_id=doc_id,
            language=summary_language,
            text=summary_text,
            sentences=split_sentences(summary_text, summary_language),
        )
        pairs.append((judgment, summary))
    if not pairs:
        raise DatasetFormatError(f"{path}: no records for split {split!r}")
    return DatasetSplit(name=split, pairs=pairs)


def load_pretrain_corpus(path) -> Iterator[PretrainDoc]:
    """Stream a pre-training corpus of ``{id, text, language}`` records."""
    path = Path(path)
    for lineno, record in _iter_records(path):
        language = _record_field(record, "language", lineno, path)
        if language not in LANGUAGES:
            raise DatasetFormatError(f"{path}: line {lineno}: unknown language tag {language!r}")
        yield PretrainDoc(
            id=_record_field(record, "id", lineno, path),
            text=_record_field(record, "text", lineno, path),
            language=language,
        )


def extractive_fragments(doc_tokens: Sequence[str],
                         summary_tokens: Sequence[str]) -> list[Fragment]:
    """Greedy left-to-right extraction of maximal shared token runs.

    At each summary position the longest contiguous match in the document is
    taken (earliest document position on ties), else the position advances
    by one token. Fragments are disjoint in the summary.
    """
    positions = defaultdict(list)
    for j, token in enumerate(doc_tokens):
        positions[token].append(j)
    n_doc = len(doc_tokens)
    n_sum = len(summary_tokens)
    fragments = []
    i = 0
    while i < n_sum:
        best_len = 0
        best_pos = -1
        for j in positions.get(summary_tokens[i], ()):
            if best_len:
                # A longer match must extend past the current best.
                if i + best_len >= n_sum or j + best_len >= n_doc:
                    continue
                if doc_tokens[j + best_len] != summary_tokens[i + best_len]:
                    continue
            k = 0
            while i + k < n_sum and j + k < n_doc and summary_tokens[i + k] == doc_tokens[j + k]:
                k += 1
            if k > best_len:
                best_len, best_pos = k, j
        if best_len:
            fragments.append(Fragment(
                summary_start=i,
                doc_start=best_pos,
                tokens=tuple(summary_tokens[i:i + best_len]),
            ))
            i += best_len
        else:
            i += 1
    return fragments


def coverage_density(doc_tokens: Sequence[str],
                     summary_tokens: Sequence[str]) -> tuple[float, float]:
    """Extractive fragment coverage and density of a summary.

    coverage = sum(|f|) / |summary|, density = sum(|f|^2) / |summary| over
    the fragments of :func:`extractive_fragments`.
    """
    if not summary_tokens:
        raise ValueError("summary_tokens must be non-empty")
    fragments = extractive_fragments(doc_tokens, summary_tokens)
    total = sum(len(f) for f in fragments)
    squared = sum(len(f) ** 2 for f in fragments)
    return total / len(summary_tokens), squared / len(summary_tokens)


def pair_stats(judgment: Judgment, summary: GoldSummary) -> tuple[int, int, float, float]:
    """Word counts and extractiveness for one (document, summary) pair."""
    doc_words = len(whitespace_tokens(judgment.text))
    summary_words = len(whitespace_tokens(summary.text))
    doc_tokens = tokenize_words(judgment.text, judgment.language)
    summary_tokens = tokenize_words(summary.text, summary.language)
    if summary_tokens:
        coverage, density = coverage_density(doc_tokens, summary_tokens)
    else:
        coverage, density = 0.0, 0.0
    return doc_words, summary_words, coverage, density


def corpus_stats(split: DatasetSplit) -> StatsReport:
    """Average word counts and extractiveness over a dataset split.

    Word counts use whitespace tokens after NFKC normalization; coverage and
    density use the word-token view. Permutation-invariant over pairs.
    """
    if not split.pairs:
        raise ValueError("split has no pairs")
    n = len(split.pairs)
    doc_total = summary_total = 0
    coverage_total = density_total = 0.0
    for judgment, summary in split.pairs:
        doc_words, summary_words, coverage, density = pair_stats(judgment, summary)
        doc_total += doc_words
        summary_total += summary_words
        coverage_total += coverage
        density_total += density
    return StatsReport(
        n_pairs=n,
        avg_doc_words=doc_total / n,
        avg_summary_words=summary_total / n,
        avg_coverage=coverage_total / n,
        avg_density=density_total / n,
    )
