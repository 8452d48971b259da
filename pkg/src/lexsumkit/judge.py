"""Semantic-relevance and factual-consistency metrics, plus the paired
significance tests used to compare systems.

All metric values are reported on the [0, 100] scale. The rank tests use
exact conditional distributions (dynamic programming over the observed
ranks, which handles average-rank ties) up to the documented size
crossovers, then tie-corrected normal approximations with continuity
correction.
"""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ProviderError
from .rouge import rouge2, rougeL
from .textseg import split_sentences, tokenize_words

METRICS = ("r2", "rL", "bertscore", "neprec", "summac")
PROVIDER_METRICS = frozenset({"bertscore", "neprec", "summac"})
ALTERNATIVES = ("greater", "less", "two_sided")

WILCOXON_EXACT_MAX_N = 25
MANN_WHITNEY_EXACT_MAX_N = 20


@dataclass
class ScoreReport:
    judgment_id: str
    values: dict[str, float]

    def to_dict(self) -> dict:
        return {"id": self.judgment_id, **self.values}


@dataclass
class TestResult:
    test: str
    statistic: float
    p_value: float
    alternative: str
    significant_at_99: bool
    method: str

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "alternative": self.alternative,
            "significant_at_99": self.significant_at_99,
            "method": self.method,
        }


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


def bertscore_f1(candidate_tokens: Sequence[str], reference_tokens: Sequence[str],
                 embedder) -> float:
    """Greedy-matching token-embedding F1, scaled to [0, 100].

    Precision is the mean over candidate tokens of the best cosine against
    any reference token; recall is symmetric. No IDF weighting or baseline
    rescaling is applied.
    """
    if not candidate_tokens or not reference_tokens:
        raise ValueError("candidate and reference token sequences must be non-empty")
    texts = [" ".join(candidate_tokens), " ".join(reference_tokens)]
    cand_vectors, ref_vectors = embedder.embed_tokens(texts)
    if len(cand_vectors) != len(candidate_tokens) or len(ref_vectors) != len(reference_tokens):
        raise ProviderError(
            "embedding backend did not return one vector per token "
            f"({len(cand_vectors)}/{len(candidate_tokens)} candidate, "
            f"{len(ref_vectors)}/{len(reference_tokens)} reference)")
    cand = _normalize_rows(np.asarray(cand_vectors, dtype=np.float64))
    ref = _normalize_rows(np.asarray(ref_vectors, dtype=np.float64))
    similarities = cand @ ref.T
    precision = float(similarities.max(axis=1).mean())
    recall = float(similarities.max(axis=0).mean())
    if precision + recall <= 0:
        return 0.0
    f1 = 2 * precision * recall / (precision + recall)
    return min(max(f1, 0.0), 1.0) * 100.0


def _normalize_surface(surface: str) -> str:
    return " ".join(unicodedata.normalize("NFKC", surface).casefold().split())


def named_entity_precision(document_text: str, summary_text: str, ner_provider,
                           language: str = "en") -> float:
    """Fraction of distinct summary entities also present in the document,
    scaled to [0, 100].

    Matching is exact on NFKC-normalized, case-folded, whitespace-collapsed
    surfaces. A summary with no detected entities scores 100 (no entities
    means no entity errors).
    """
    summary_entities = {
        _normalize_surface(e.surface) for e in ner_provider.ner(summary_text, language)
    }
    summary_entities.discard("")
    if not summary_entities:
        return 100.0
    document_entities = {
        _normalize_surface(e.surface) for e in ner_provider.ner(document_text, language)
    }
    return len(summary_entities & document_entities) / len(summary_entities) * 100.0


def _sentence_text(sentence) -> str:
    return sentence.text if hasattr(sentence, "text") else sentence


def nli_consistency(doc_sentences: Sequence, summary_sentences: Sequence,
                    nli_provider,
                    sentence_aggregator: Callable[[list[float]], float] = max,
                    ) -> float:
    """Mean over summary sentences of aggregated entailment against the
    document sentences, scaled to [0, 100].

    The default aggregator takes the max entailment probability over
    document sentences (zero-shot aggregation); pass a custom
    ``sentence_aggregator`` to e.g. bin the per-document-sentence scores
    into a histogram and apply learned weights.
    """
    if not summary_sentences:
        raise ValueError("no summary sentences")
    if not doc_sentences:
        raise ValueError("no document sentences")
    doc_texts = [_sentence_text(s) for s in doc_sentences]
    summary_texts = [_sentence_text(s) for s in summary_sentences]
    pairs = [(doc, summary) for summary in summary_texts for doc in doc_texts]
    probs = nli_provider.nli(pairs)
    scores = []
    stride = len(doc_texts)
    for i in range(len(summary_texts)):
        per_doc = [p.entail for p in probs[i * stride:(i + 1) * stride]]
        scores.append(sentence_aggregator(per_doc))
    return sum(scores) / len(scores) * 100.0


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def _tie_group_sizes(values: Sequence[float]) -> list[int]:
    counts: dict[float, int] = {}
    for value in values:
        counts[value] = counts.get(value, 0) + 1
    return [c for c in counts.values() if c > 1]


def _norm_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2))


def _sum_distribution(doubled_ranks: Sequence[int]) -> list[int]:
    """Counts of subsets by doubled-rank sum (subset-sum polynomial)."""
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    reached = 0
    for rank in doubled_ranks:
        for s in range(reached, -1, -1):
            if counts[s]:
                counts[s + rank] += counts[s]
        reached += rank
    return counts


def _tail_p(counts: Sequence[int], total: int, observed: int,
            alternative: str) -> float:
    greater = sum(counts[observed:])
    less = sum(counts[:observed + 1])
    if alternative == "greater":
        return greater / total
    if alternative == "less":
        return less / total
    return min(1.0, 2 * min(greater, less) / total)


def _check_alternative(alternative: str) -> None:
    if alternative not in ALTERNATIVES:
        raise ValueError(f"unknown alternative {alternative!r} (expected one of {ALTERNATIVES})")


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float],
                         alternative: str = "greater",
                         method: str = "auto") -> TestResult:
    """Paired signed-rank test; ``alternative='greater'`` means ``a`` tends
    above ``b``.

    Zero differences are dropped. Exact conditional distribution for
    n <= 25, otherwise a tie-corrected normal approximation with continuity
    correction. The statistic is W+, the positive-rank sum.
    """
    _check_alternative(alternative)
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    diffs = [x - y for x, y in zip(a, b) if x != y]
    if not diffs:
        raise ValueError("degenerate pairing: all differences are zero")
    n = len(diffs)
    magnitudes = [abs(d) for d in diffs]
    ranks = _average_ranks(magnitudes)
    w_plus = sum(rank for rank, diff in zip(ranks, diffs) if diff > 0)

    if method == "auto":
        method = "exact" if n <= WILCOXON_EXACT_MAX_N else "normal"
    if method == "exact":
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _sum_distribution(doubled)
        p = _tail_p(counts, 2 ** n, int(round(2 * w_plus)), alternative)
    elif method == "normal":
        mean = n * (n + 1) / 4
        variance = n * (n + 1) * (2 * n + 1) / 24
        variance -= sum(t ** 3 - t for t in _tie_group_sizes(magnitudes)) / 48
        p = _one_sided_normal(w_plus, mean, variance, alternative)
    else:
        raise ValueError(f"unknown method {method!r}")
    return TestResult(test="wilcoxon_signed_rank", statistic=float(w_plus), p_value=p,
                      alternative=alternative, significant_at_99=p < 0.01, method=method)


def _one_sided_normal(statistic: float, mean: float, variance: float,
                      alternative: str) -> float:
    if variance <= 0:
        return 1.0
    sd = math.sqrt(variance)
    p_greater = _norm_sf((statistic - 0.5 - mean) / sd)
    p_less = 1.0 - _norm_sf((statistic + 0.5 - mean) / sd)
    if alternative == "greater":
        return p_greater
    if alternative == "less":
        return p_less
    return min(1.0, 2 * min(p_greater, p_less))


def mann_whitney_u(a: Sequence[float], b: Sequence[float],
                   alternative: str = "greater",
                   method: str = "auto") -> TestResult:
    """Two-sample rank-sum test; the statistic is U for sample ``a``.

    Exact conditional distribution (handles ties) for combined sizes
    <= 20, otherwise a tie-corrected normal approximation with continuity
    correction.
    """
    _check_alternative(alternative)
    if not a or not b:
        raise ValueError("empty inputs")
    n1, n2 = len(a), len(b)
    combined = list(a) + list(b)
    ranks = _average_ranks(combined)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2

    if method == "auto":
        method = "exact" if n1 + n2 <= MANN_WHITNEY_EXACT_MAX_N else "normal"
    if method == "exact":
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _choose_sum_distribution(doubled, n1)
        total = math.comb(n1 + n2, n1)
        p = _tail_p(counts, total, int(round(2 * r1)), alternative)
    elif method == "normal":
        total_n = n1 + n2
        mean = n1 * n2 / 2
        tie_term = sum(t ** 3 - t for t in _tie_group_sizes(combined))
        variance = n1 * n2 / 12 * ((total_n + 1) - tie_term / (total_n * (total_n - 1)))
        p = _one_sided_normal(u1, mean, variance, alternative)
    else:
        raise ValueError(f"unknown method {method!r}")
    return TestResult(test="mann_whitney_u", statistic=float(u1), p_value=p,
                      alternative=alternative, significant_at_99=p < 0.01, method=method)


def _choose_sum_distribution(doubled_ranks: Sequence[int], choose: int) -> list[int]:
    """Counts of ``choose``-sized subsets of the ranks by doubled-rank sum."""
    total = sum(doubled_ranks)
    table = [[0] * (total + 1) for _ in range(choose + 1)]
    table[0][0] = 1
    for rank in doubled_ranks:
        for k in range(min(choose, len(doubled_ranks)) - 1, -1, -1):
            row = table[k]
            nxt = table[k + 1]
            for s in range(total - rank, -1, -1):
                if row[s]:
                    nxt[s + rank] += row[s]
    return table[choose]


def score_pair(doc_text: str, reference_text: str, system_text: str, language: str,
               metrics: Sequence[str], provider=None,
               judgment_id: str = "", doc_language: str = "en") -> ScoreReport:
    """Compute the requested metrics for one (document, reference, system)
    triple. Provider-backed metrics raise :class:`ProviderError` when no
    backend is configured."""
    values: dict[str, float] = {}
    needed = PROVIDER_METRICS.intersection(metrics)
    if needed and provider is None:
        raise ProviderError(
            f"metrics {sorted(needed)} require a provider backend "
            "(set LEXSUMKIT_PROVIDER to stub | subprocess:<command> | http:<url>)")
    for metric in metrics:
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r} (expected one of {METRICS})")
    system_tokens = tokenize_words(system_text, language)
    reference_tokens = tokenize_words(reference_text, language)
    if "r2" in metrics:
        values["r2"] = rouge2(system_tokens, reference_tokens).f1 * 100.0
    if "rL" in metrics:
        values["rL"] = rougeL(system_tokens, reference_tokens).f1 * 100.0
    if "bertscore" in metrics:
        if system_tokens and reference_tokens:
            values["bertscore"] = bertscore_f1(system_tokens, reference_tokens, provider)
        else:
            values["bertscore"] = 0.0
    if "neprec" in metrics:
        values["neprec"] = named_entity_precision(doc_text, system_text, provider, language)
    if "summac" in metrics:
        doc_sentences = split_sentences(doc_text, doc_language)
        system_sentences = split_sentences(system_text, language)
        if doc_sentences and system_sentences:
            values["summac"] = nli_consistency(doc_sentences, system_sentences, provider)
        else:
            values["summac"] = 0.0
    return ScoreReport(judgment_id=judgment_id, values=values)


def corpus_means(reports: Sequence[ScoreReport]) -> dict[str, float]:
    """Plain per-document means of every metric present in the reports."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for report in reports:
        for metric, value in report.values.items():
            sums[metric] = sums.get(metric, 0.0) + value
            counts[metric] = counts.get(metric, 0) + 1
    return {metric: sums[metric] / counts[metric] for metric in sums}
