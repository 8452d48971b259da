"""Greedy extractive-label generation.

Converts an abstractive reference summary into per-sentence binary labels by
iteratively adding the document sentence whose inclusion most improves
ROUGE-2 F1 against the reference, stopping when no addition strictly
improves it. Candidate summaries are assembled in document order, so the
scored token stream (including bigrams across sentence joins) matches what
a sequence labeler would reproduce.
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass
from typing import Sequence

from .textseg import Sentence

# Minimum F1 gain (on the [0, 1] scale) counted as a strict improvement;
# guards against float-noise loops on large documents.
IMPROVEMENT_EPSILON = 1e-9


@dataclass
class LabelEntry:
    sentence_index: int
    label: int


@dataclass
class ExtractiveLabelSet:
    """Binary labels for one document, with the greedy pick order.

    ``final_rouge2_f1`` is on the reporting scale [0, 100].
    """

    judgment_id: str
    labels: list[LabelEntry]
    selected_order: list[int]
    final_rouge2_f1: float

    def dense_labels(self) -> list[int]:
        return [entry.label for entry in self.labels]

    def to_dict(self) -> dict:
        return {
            "id": self.judgment_id,
            "labels": self.dense_labels(),
            "selected_order": self.selected_order,
            "final_rouge2_f1": self.final_rouge2_f1,
        }


def _f1(overlap: int, n_candidate: int, n_reference: int) -> float:
    if overlap == 0 or n_candidate == 0 or n_reference == 0:
        return 0.0
    precision = overlap / n_candidate
    recall = overlap / n_reference
    return 2 * precision * recall / (precision + recall)


def build_extractive_labels(doc_sentences: Sequence[Sentence],
                            reference_tokens: Sequence[str],
                            judgment_id: str = "") -> ExtractiveLabelSet:
    """Label document sentences by greedy ROUGE-2 maximization.

    Ties break to the smallest sentence index. When no sentence lifts F1
    above zero (no shared bigram), all labels are zero and callers should
    filter the document before training.
    """
    if not doc_sentences:
        raise ValueError("doc_sentences must be non-empty")
    if len(reference_tokens) < 2:
        raise ValueError("reference too short for ROUGE-2 oracle")

    ref_counts: dict[tuple[str, str], int] = {}
    for gram in zip(reference_tokens, reference_tokens[1:]):
        ref_counts[gram] = ref_counts.get(gram, 0) + 1
    ref_total = len(reference_tokens) - 1

    sentence_tokens = [list(s.tokens) for s in doc_sentences]

    # Incremental state for the current candidate (selected sentences
    # concatenated in document order): bigram multiset, clipped overlap with
    # the reference, and token count.
    selected: list[int] = []
    cand_counts: dict[tuple[str, str], int] = {}
    overlap = 0
    total_tokens = 0
    current_f1 = 0.0
    selected_order: list[int] = []

    def candidate_changes(index: int) -> dict[tuple[str, str], int]:
        """Net bigram-count changes from inserting sentence ``index``."""
        tokens = sentence_tokens[index]
        changes: dict[tuple[str, str], int] = {}
        for gram in zip(tokens, tokens[1:]):
            changes[gram] = changes.get(gram, 0) + 1
        pos = 0
        while pos < len(selected) and selected[pos] < index:
            pos += 1
        prev_last = sentence_tokens[selected[pos - 1]][-1] if pos > 0 else None
        next_first = sentence_tokens[selected[pos]][0] if pos < len(selected) else None
        if prev_last is not None:
            gram = (prev_last, tokens[0])
            changes[gram] = changes.get(gram, 0) + 1
        if next_first is not None:
            gram = (tokens[-1], next_first)
            changes[gram] = changes.get(gram, 0) + 1
        if prev_last is not None and next_first is not None:
            gram = (prev_last, next_first)
            changes[gram] = changes.get(gram, 0) - 1
        return changes

    def overlap_delta(changes: dict[tuple[str, str], int]) -> int:
        delta = 0
        for gram, diff in changes.items():
            limit = ref_counts.get(gram)
            if limit is None or diff == 0:
                continue
            have = cand_counts.get(gram, 0)
            delta += min(have + diff, limit) - min(have, limit)
        return delta

    remaining = {i for i, tokens in enumerate(sentence_tokens) if tokens}
    while remaining:
        best_index = -1
        best_f1 = current_f1 + IMPROVEMENT_EPSILON
        best_changes = None
        best_overlap = overlap
        for index in sorted(remaining):
            changes = candidate_changes(index)
            new_overlap = overlap + overlap_delta(changes)
            n_candidate = total_tokens + len(sentence_tokens[index]) - 1
            f1 = _f1(new_overlap, n_candidate, ref_total)
            if f1 > best_f1:
                best_index, best_f1 = index, f1
                best_changes, best_overlap = changes, new_overlap
        if best_index < 0:
            break
        for gram, diff in best_changes.items():
            count = cand_counts.get(gram, 0) + diff
            if count:
                cand_counts[gram] = count
            else:
                cand_counts.pop(gram, None)
        overlap = best_overlap
        total_tokens += len(sentence_tokens[best_index])
        current_f1 = best_f1
        insort(selected, best_index)
        selected_order.append(best_index)
        remaining.remove(best_index)

    chosen = set(selected_order)
    labels = [LabelEntry(sentence_index=i, label=int(i in chosen))
              for i in range(len(doc_sentences))]
    return ExtractiveLabelSet(
        judgment_id=judgment_id,
        labels=labels,
        selected_order=selected_order,
        final_rouge2_f1=current_f1 * 100.0,
    )
