"""ROUGE-2 and ROUGE-L F1 over word-token sequences.

Scores are kept in [0, 1]; reporting surfaces multiply by 100. ROUGE-L uses
whole-sequence LCS (the "rougeL" convention, not per-sentence "rougeLsum")
with a linear-memory DP. No stemming or stopword removal is applied.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _score(overlap: float, n_candidate: int, n_reference: int) -> RougeScore:
    precision = overlap / n_candidate if n_candidate else 0.0
    recall = overlap / n_reference if n_reference else 0.0
    return RougeScore(precision=precision, recall=recall, f1=_f1(precision, recall))


def bigram_counts(tokens: Sequence[str]) -> Counter:
    return Counter(zip(tokens, tokens[1:]))


def rouge2(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """ROUGE-2: clipped multiset bigram overlap."""
    cand = bigram_counts(candidate)
    ref = bigram_counts(reference)
    if len(cand) > len(ref):
        cand, ref = ref, cand
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    return _score(overlap, max(len(candidate) - 1, 0), max(len(reference) - 1, 0))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence, two-row DP."""
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        append = curr.append
        for j, y in enumerate(b, start=1):
            if x == y:
                append(prev[j - 1] + 1)
            else:
                p = prev[j]
                c = curr[j - 1]
                append(p if p >= c else c)
        prev = curr
    return prev[-1]


def rougeL(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """ROUGE-L: whole-sequence LCS F1."""
    length = lcs_length(candidate, reference)
    return _score(length, len(candidate), len(reference))
