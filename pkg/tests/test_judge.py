import itertools
import math
import random

import pytest
import scipy.stats
from lexsumkit.errors import ProviderError
from lexsumkit.judge import (
    bertscore_f1,
    corpus_means,
    mann_whitney_u,
    named_entity_precision,
    nli_consistency,
    score_pair,
    wilcoxon_signed_rank,
)
from lexsumkit.provider import Entity, StubProvider
from lexsumkit.textseg import Sentence


class TokenTableEmbedder:
    """Test double: fixed per-token vectors, one vector per whitespace token."""

    def __init__(self, table):
        self.table = table

    def embed_tokens(self, texts, language=None):
        return [[list(self.table[token]) for token in text.split()] for text in texts]


class FixedNer:
    """Test double: canned entity lists keyed by exact text."""

    def __init__(self, mapping):
        self.mapping = mapping

    def ner(self, text, language):
        return [Entity(surface=s, type="ENT") for s in self.mapping.get(text, [])]


class TestBertscore:
    def test_identity_is_100_with_stub(self):
        tokens = "the supreme court allowed the appeal".split()
        assert bertscore_f1(tokens, tokens, StubProvider()) == pytest.approx(100.0, abs=1e-9)

    def test_orthogonal_tokens(self):
        embedder = TokenTableEmbedder({"a": (1.0, 0.0), "b": (0.0, 1.0)})
        assert bertscore_f1(["a"], ["b"], embedder) == 0.0

    def test_hand_computed_partial_match(self):
        embedder = TokenTableEmbedder({"a": (1.0, 0.0), "b": (0.0, 1.0)})
        # P = mean(1, 0) = 0.5, R = 1 -> F1 = 2/3.
        value = bertscore_f1(["a", "b"], ["a"], embedder)
        assert value == pytest.approx(200 / 3, abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            bertscore_f1([], ["a"], StubProvider())

    def test_vector_count_mismatch_is_provider_error(self):
        class Broken:
            def embed_tokens(self, texts, language=None):
                return [[[1.0, 0.0]] for _ in texts]

        with pytest.raises(ProviderError):
            bertscore_f1(["a", "b"], ["a"], Broken())


class TestNamedEntityPrecision:
    def test_half_matched(self):
        ner = FixedNer({
            "summary": ["Supreme Court", "Delhi"],
            "document": ["Supreme Court", "Ram"],
        })
        assert named_entity_precision("document", "summary", ner) == 50.0

    def test_subset_scores_100(self):
        ner = FixedNer({"summary": ["Delhi"], "document": ["Supreme Court", "Delhi"]})
        assert named_entity_precision("document", "summary", ner) == 100.0

    def test_vacuous_100_without_entities(self):
        ner = FixedNer({"document": ["Supreme Court"]})
        assert named_entity_precision("document", "summary", ner) == 100.0

    def test_normalization_casefold_and_whitespace(self):
        ner = FixedNer({
            "summary": ["supreme  court"],
            "document": ["Supreme Court"],
        })
        assert named_entity_precision("document", "summary", ner) == 100.0

    def test_removing_unmatched_entity_never_decreases(self):
        doc_entities = ["Supreme Court"]
        with_extra = FixedNer({"s": ["Supreme Court", "Mars"], "d": doc_entities})
        without = FixedNer({"s": ["Supreme Court"], "d": doc_entities})
        assert (named_entity_precision("d", "s", without)
                >= named_entity_precision("d", "s", with_extra))

    def test_stub_provider_end_to_end(self):
        document = "The Supreme Court of India heard the matter in Delhi today."
        summary = "The Supreme Court heard it."
        score = named_entity_precision(document, summary, StubProvider())
        assert score == 100.0


def sentences(texts):
    return [Sentence(index=i, text=t, tokens=t.split()) for i, t in enumerate(texts)]


class TestNliConsistency:
    def test_copied_sentences_score_100(self):
        docs = sentences(["the appeal was dismissed", "costs follow the event"])
        summary = sentences(["costs follow the event"])
        assert nli_consistency(docs, summary, StubProvider()) == 100.0

    def test_copied_and_novel_average(self):
        docs = sentences(["the appeal was dismissed"])
        summary = sentences(["the appeal was dismissed", "zebras graze quietly"])
        assert nli_consistency(docs, summary, StubProvider()) == pytest.approx(50.0)

    def test_document_order_invariance(self):
        docs = ["alpha beta", "gamma delta", "epsilon zeta"]
        summary = sentences(["gamma delta", "alpha beta"])
        forward = nli_consistency(sentences(docs), summary, StubProvider())
        backward = nli_consistency(sentences(list(reversed(docs))), summary, StubProvider())
        assert forward == backward

    def test_empty_summary_rejected(self):
        with pytest.raises(ValueError, match="no summary sentences"):
            nli_consistency(sentences(["a"]), [], StubProvider())

    def test_custom_aggregator_hook(self):
        docs = sentences(["the appeal was dismissed", "zebras graze"])
        summary = sentences(["the appeal was dismissed"])
        mean_agg = lambda scores: sum(scores) / len(scores)  # noqa: E731
        value = nli_consistency(docs, summary, StubProvider(), sentence_aggregator=mean_agg)
        assert 0.0 < value < 100.0


def brute_wilcoxon(diffs, alternative):
    """Exact enumeration over all sign assignments of the observed ranks."""
    ranks = scipy.stats.rankdata([abs(d) for d in diffs])
    observed = sum(r for r, d in zip(ranks, diffs) if d > 0)
    n = len(diffs)
    greater = less = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        greater += w >= observed - 1e-9
        less += w <= observed + 1e-9
    total = 2 ** n
    if alternative == "greater":
        return greater / total
    if alternative == "less":
        return less / total
    return min(1.0, 2 * min(greater, less) / total)


def brute_mann_whitney(a, b, alternative):
    """Exact enumeration over all rank assignments to the first sample."""
    ranks = scipy.stats.rankdata(list(a) + list(b))
    n1 = len(a)
    observed = sum(ranks[:n1])
    greater = less = total = 0
    for subset in itertools.combinations(range(len(ranks)), n1):
        r1 = sum(ranks[i] for i in subset)
        total += 1
        greater += r1 >= observed - 1e-9
        less += r1 <= observed + 1e-9
    if alternative == "greater":
        return greater / total
    if alternative == "less":
        return less / total
    return min(1.0, 2 * min(greater, less) / total)


class TestWilcoxon:
    def test_all_positive_n5_exact(self):
        result = wilcoxon_signed_rank([2, 3, 4, 5, 6], [1, 2, 3, 4, 5], "greater")
        assert result.statistic == 15.0
        assert result.p_value == 0.03125
        assert result.method == "exact"
        assert not result.significant_at_99

    def test_degenerate_pairing(self):
        with pytest.raises(ValueError, match="degenerate pairing"):
            wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0], "greater")

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([1, 2, 3], [1, 2], "greater")

    def test_shifted_pairs_significant_n40(self):
        rng = random.Random(99)
        b = [rng.gauss(0.0, 1.0) for _ in range(40)]
        a = [x + 1.0 + rng.gauss(0.0, 1.0) for x in b]
        result = wilcoxon_signed_rank(a, b, "greater")
        assert result.method == "normal"
        assert result.p_value < 0.01
        assert result.significant_at_99

    def test_matches_brute_enumeration(self):
        rng = random.Random(5)
        for _ in range(25):
            n = rng.randint(5, 11)
            # Low-resolution values force ties in |d| and some zero diffs.
            a = [rng.randint(0, 6) for _ in range(n)]
            b = [rng.randint(0, 6) for _ in range(n)]
            diffs = [x - y for x, y in zip(a, b) if x != y]
            if not diffs:
                continue
            for alternative in ("greater", "less", "two_sided"):
                mine = wilcoxon_signed_rank(a, b, alternative).p_value
                brute = brute_wilcoxon(diffs, alternative)
                assert mine == pytest.approx(brute, abs=1e-12)

    def test_matches_scipy_exact_without_ties(self):
        rng = random.Random(17)
        for _ in range(10):
            n = 9
            a = rng.sample(range(1000), n)
            b = rng.sample(range(1000, 2000), n)
            mine = wilcoxon_signed_rank(a, b, "two_sided").p_value
            ref = scipy.stats.wilcoxon(a, b, alternative="two-sided", method="exact").pvalue
            assert mine == pytest.approx(ref, abs=1e-12)

    def test_one_sided_tails_sum_to_one_plus_point_mass(self):
        a = [10, 8, 6, 14, 3, 9, 2]
        b = [7, 9, 1, 2, 4, 3, 8]
        greater = wilcoxon_signed_rank(a, b, "greater", method="exact").p_value
        less = wilcoxon_signed_rank(a, b, "less", method="exact").p_value
        assert greater + less > 1.0  # overlap is exactly P(W = w) > 0

    def test_exact_vs_normal_agreement_at_crossover(self):
        # n = 25 is the largest size served by the exact path.
        rng = random.Random(22)
        b = [rng.gauss(0.0, 1.0) for _ in range(25)]
        a = [x + rng.gauss(0.2, 1.0) for x in b]
        for alternative in ("greater", "less", "two_sided"):
            exact = wilcoxon_signed_rank(a, b, alternative, method="exact").p_value
            approx = wilcoxon_signed_rank(a, b, alternative, method="normal").p_value
            assert abs(exact - approx) <= 0.005


class TestMannWhitney:
    def test_small_fixture_exact(self):
        result = mann_whitney_u([1, 2], [3, 4], "less")
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(1 / 6, abs=1e-15)
        assert result.method == "exact"

    def test_identical_samples_two_sided(self):
        result = mann_whitney_u([5, 5, 5], [5, 5, 5], "two_sided")
        assert result.p_value == pytest.approx(1.0)

    def test_fully_separated_size_10(self):
        a = list(range(10, 20))
        b = list(range(10))
        result = mann_whitney_u(a, b, "greater")
        assert result.method == "exact"
        assert result.p_value == pytest.approx(1 / math.comb(20, 10))
        assert result.significant_at_99

    def test_empty_inputs(self):
        with pytest.raises(ValueError, match="empty"):
            mann_whitney_u([], [1.0], "greater")

    def test_matches_brute_enumeration(self):
        rng = random.Random(7)
        for _ in range(25):
            n1 = rng.randint(2, 6)
            n2 = rng.randint(2, 6)
            a = [rng.randint(0, 5) for _ in range(n1)]
            b = [rng.randint(0, 5) for _ in range(n2)]
            for alternative in ("greater", "less", "two_sided"):
                mine = mann_whitney_u(a, b, alternative).p_value
                brute = brute_mann_whitney(a, b, alternative)
                assert mine == pytest.approx(brute, abs=1e-12)

    def test_matches_scipy_exact_without_ties(self):
        rng = random.Random(3)
        for _ in range(10):
            a = rng.sample(range(1000), 6)
            b = rng.sample(range(1000, 2000), 7)
            for alternative, scipy_alt in (("greater", "greater"), ("less", "less")):
                mine = mann_whitney_u(a, b, alternative).p_value
                ref = scipy.stats.mannwhitneyu(a, b, alternative=scipy_alt,
                                               method="exact").pvalue
                assert mine == pytest.approx(ref, abs=1e-12)

    def test_exact_vs_normal_agreement_at_crossover(self):
        # Combined size 20 is the largest served by the exact path.
        rng = random.Random(7)
        a = [rng.gauss(0.4, 1.0) for _ in range(10)]
        b = [rng.gauss(0.0, 1.0) for _ in range(10)]
        for alternative in ("greater", "less", "two_sided"):
            exact = mann_whitney_u(a, b, alternative, method="exact").p_value
            approx = mann_whitney_u(a, b, alternative, method="normal").p_value
            assert abs(exact - approx) <= 0.005

    def test_unknown_alternative(self):
        with pytest.raises(ValueError):
            mann_whitney_u([1, 2, 3], [4, 5, 6], "sideways")


class TestScorePair:
    def test_rouge_metrics(self):
        report = score_pair(
            doc_text="ignored document.",
            reference_text="the cat lay on the mat",
            system_text="the cat sat on the mat",
            language="en", metrics=["r2", "rL"], judgment_id="d1")
        assert report.values["r2"] == pytest.approx(60.0, abs=0.01)
        assert report.values["rL"] == pytest.approx(83.33, abs=0.01)

    def test_provider_metric_without_backend(self):
        with pytest.raises(ProviderError, match="provider backend"):
            score_pair("doc.", "ref text", "sys text", "en", ["bertscore"])

    def test_unknown_metric(self):
        with pytest.raises(ValueError, match="unknown metric"):
            score_pair("doc.", "ref", "sys", "en", ["rouge9"])

    def test_full_metric_set_with_stub(self):
        text = "The Supreme Court allowed the appeal. Costs follow the event."
        report = score_pair(text, text, text, "en",
                            ["r2", "rL", "bertscore", "neprec", "summac"],
                            provider=StubProvider(), judgment_id="x")
        assert report.values["r2"] == pytest.approx(100.0)
        assert report.values["rL"] == pytest.approx(100.0)
        assert report.values["bertscore"] == pytest.approx(100.0, abs=1e-9)
        assert report.values["neprec"] == 100.0
        assert report.values["summac"] == pytest.approx(100.0)

    def test_corpus_means(self):
        reports = [
            score_pair("d.", "a b c", "a b c", "en", ["r2"], judgment_id="1"),
            score_pair("d.", "a b c", "x y z", "en", ["r2"], judgment_id="2"),
        ]
        means = corpus_means(reports)
        assert means["r2"] == pytest.approx(50.0)
