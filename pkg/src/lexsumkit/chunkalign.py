"""Token-budget chunking of long documents, embedding-based mapping of
summary sentences onto document sentences, and chunk-local reference
summary assembly for fine-tuning data generation.

Chunk boundaries are token-positional (exactly ``n`` tokens per chunk except
the last); a sentence straddling a boundary is anchored to the chunk holding
its first token.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ProviderError
from .textseg import Sentence


@dataclass
class Chunk:
    judgment_id: str
    index: int
    token_span: tuple[int, int]
    m: int
    n: int
    sentence_indices: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class MappingEntry:
    summary_sentence_index: int
    doc_sentence_index: int
    similarity: float


@dataclass
class SentenceMapping:
    entries: list[MappingEntry]


@dataclass
class AlignedPair:
    chunk: Chunk
    summary_sentence_indices: list[int]
    summary_text: str


@dataclass
class AlignmentDiagnostics:
    total_chunks: int = 0
    dropped_chunks: int = 0


def chunk_document(doc_tokens: Sequence[str], n: int,
                   sentence_token_counts: Sequence[int] | None = None,
                   judgment_id: str = "") -> list[Chunk]:
    """Split a token sequence into ``ceil(len/n)`` contiguous chunks.

    With ``sentence_token_counts`` given (token lengths of the document's
    sentences, summing to ``len(doc_tokens)``), each chunk also lists the
    sentences that overlap its span.
    """
    if n < 1:
        raise ValueError(f"chunk budget must be >= 1, got {n}")
    length = len(doc_tokens)
    if length == 0:
        raise ValueError("doc_tokens must be non-empty")
    m = -(-length // n)
    chunks = [
        Chunk(judgment_id=judgment_id, index=i,
              token_span=(i * n, min((i + 1) * n, length)), m=m, n=n)
        for i in range(m)
    ]
    if sentence_token_counts is not None:
        if sum(sentence_token_counts) != length:
            raise ValueError("sentence_token_counts do not sum to len(doc_tokens)")
        offset = 0
        for sentence_index, count in enumerate(sentence_token_counts):
            if count > 0:
                first = offset // n
                last = (offset + count - 1) // n
            else:
                # Zero-width sentence (e.g. punctuation only): keep it
                # addressable by assigning it to the chunk at its offset.
                first = last = min(offset, length - 1) // n
            for chunk_index in range(first, last + 1):
                chunks[chunk_index].sentence_indices.append(sentence_index)
            offset += count
    return chunks


def map_summary_sentences(doc_sentences: Sequence[Sentence],
                          summary_sentences: Sequence[Sentence],
                          embedder) -> SentenceMapping:
    """Assign every summary sentence its most similar document sentence.

    Sentence vectors come from the embedding provider (mean of token-level
    embeddings) and are L2-normalized here before cosine comparison; ties
    break to the smallest document sentence index.
    """
    if not doc_sentences or not summary_sentences:
        raise ValueError("doc_sentences and summary_sentences must be non-empty")
    try:
        doc_vectors = embedder.embed_sentences([s.text for s in doc_sentences])
        summary_vectors = embedder.embed_sentences([s.text for s in summary_sentences])
    except ProviderError as exc:
        raise ProviderError(
            f"sentence mapping failed ({len(doc_sentences)} doc / "
            f"{len(summary_sentences)} summary sentences): {exc}") from exc
    doc_matrix = _normalize_rows(np.asarray(doc_vectors, dtype=np.float64))
    summary_matrix = _normalize_rows(np.asarray(summary_vectors, dtype=np.float64))
    similarities = summary_matrix @ doc_matrix.T
    entries = []
    for i in range(len(summary_sentences)):
        j = int(np.argmax(similarities[i]))
        entries.append(MappingEntry(
            summary_sentence_index=i,
            doc_sentence_index=j,
            similarity=float(similarities[i, j]),
        ))
    return SentenceMapping(entries=entries)


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


def build_chunk_pairs(chunks: Sequence[Chunk], mapping: SentenceMapping,
                      summary_sentences: Sequence[Sentence],
                      ) -> tuple[list[AlignedPair], AlignmentDiagnostics]:
    """Group mapped summary sentences by the chunk anchoring their document
    sentence, preserving summary order.

    Chunks that receive no summary sentence are dropped from the output and
    counted in the diagnostics.
    """
    if len(mapping.entries) != len(summary_sentences):
        raise ValueError("mapping must cover every summary sentence exactly once")
    anchor_of: dict[int, int] = {}
    for chunk in chunks:
        for sentence_index in chunk.sentence_indices:
            anchor_of.setdefault(sentence_index, chunk.index)
    grouped: dict[int, list[int]] = {}
    for entry in sorted(mapping.entries, key=lambda e: e.summary_sentence_index):
        anchor = anchor_of.get(entry.doc_sentence_index)
        if anchor is None:
            raise ValueError(
                f"mapped document sentence {entry.doc_sentence_index} is not in any chunk")
        grouped.setdefault(anchor, []).append(entry.summary_sentence_index)
    pairs = []
    diagnostics = AlignmentDiagnostics(total_chunks=len(chunks))
    for chunk in sorted(chunks, key=lambda c: c.index):
        indices = grouped.get(chunk.index)
        if not indices:
            diagnostics.dropped_chunks += 1
            continue
        pairs.append(AlignedPair(
            chunk=chunk,
            summary_sentence_indices=indices,
            summary_text=" ".join(summary_sentences[i].text for i in indices),
        ))
    return pairs, diagnostics


def reassemble(chunk_outputs: Sequence[tuple[int, str]]) -> str:
    """Concatenate per-chunk outputs in ascending chunk order.

    The indices must form a permutation of 0..m-1.
    """
    if not chunk_outputs:
        raise ValueError("no chunk outputs to reassemble")
    by_index: dict[int, str] = {}
    for index, text in chunk_outputs:
        if index in by_index:
            raise ValueError(f"duplicate chunk {index}")
        by_index[index] = text
    m = max(by_index) + 1
    missing = [i for i in range(m) if i not in by_index]
    if missing:
        raise ValueError(f"missing chunk {missing[0]}")
    return " ".join(text for _, text in sorted(by_index.items()) if text)


def summary_budget(reference_summary_tokens: int, m: int) -> int:
    """Per-chunk summary token budget: ceil(reference length / m), at least 1."""
    if m < 1:
        raise ValueError(f"chunk count must be >= 1, got {m}")
    return max(1, -(-reference_summary_tokens // m))
