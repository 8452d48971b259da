"""Pre-training sample generation: span-corruption denoising pairs and
fixed-window next-token sequences, drawn from legal corpora in English,
Hindi, or an equal mix.

Randomness comes from :class:`PortableRng`, a Mersenne-Twister stream with
integer draws, shuffles, and compositions implemented here so that emitted
data files are byte-identical across platforms and Python versions.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Sequence

from .corpus import PretrainDoc
from .errors import PoolExhaustedError, SentinelMismatchError
from .textseg import tokenize_words

DOC_SEPARATOR = "</s>"

_SENTINEL_RE = re.compile(r"^<extra_id_(\d+)>$")


def sentinel_token(index: int) -> str:
    return f"<extra_id_{index}>"


def sentinel_index(token: str) -> int | None:
    match = _SENTINEL_RE.match(token)
    return int(match.group(1)) if match else None


def derive_seed(root: int, *parts) -> int:
    """Stable 64-bit child seed from a root seed and a label path."""
    digest = hashlib.blake2b(str(root).encode(), digest_size=8)
    for part in parts:
        digest.update(b"\x1f")
        digest.update(str(part).encode())
    return int.from_bytes(digest.digest(), "big")


class PortableRng:
    """Seedable RNG with a pinned output stream.

    Backed by MT19937 (``random.Random.getrandbits``); rejection-sampled
    integer draws, Fisher-Yates shuffling, and uniform compositions are
    implemented locally rather than via stdlib helpers whose internals may
    change between Python releases.
    """

    def __init__(self, seed: int):
        self._mt = random.Random(seed)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        bits = n.bit_length()
        value = self._mt.getrandbits(bits)
        while value >= n:
            value = self._mt.getrandbits(bits)
        return value

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def composition(self, total: int, parts: int) -> list[int]:
        """Uniformly random split of ``total`` into ``parts`` ordered
        non-negative integers (stars and bars)."""
        if parts < 1:
            raise ValueError("composition needs parts >= 1")
        if parts == 1:
            return [total]
        # Selection-sample parts-1 separator slots among total + parts - 1.
        slots = total + parts - 1
        want = parts - 1
        separators = []
        chosen = 0
        for slot in range(slots):
            if self._mt.random() * (slots - slot) < (want - chosen):
                separators.append(slot)
                chosen += 1
                if chosen == want:
                    break
        sizes = []
        prev = -1
        for sep in separators:
            sizes.append(sep - prev - 1)
            prev = sep
        sizes.append(slots - prev - 1)
        return sizes


def _round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


@dataclass(frozen=True)
class CorruptionConfig:
    sequence_length: int = 512
    mask_rate: float = 0.15
    mean_span_length: float = 3.0
    max_target_length: int = 128
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.mask_rate < 1.0:
            raise ValueError(f"mask_rate must be in (0, 1), got {self.mask_rate}")
        if self.mean_span_length < 1.0:
            raise ValueError(f"mean_span_length must be >= 1, got {self.mean_span_length}")
        if self.sequence_length < self.mean_span_length:
            raise ValueError("sequence_length must be >= mean_span_length")
        if self.max_target_length < 3:
            raise ValueError("max_target_length must be >= 3 (one sentinel, one token, one terminator)")


@dataclass
class DenoisingSample:
    """A (corrupted input, recovery target) pair.

    Each masked span in the input is one sentinel token; the target lists
    every sentinel followed by its span, terminated by one final sentinel.
    """

    input_tokens: list[str]
    target_tokens: list[str]
    source_window: tuple[int, int]


@dataclass
class NextTokenSample:
    tokens: list[str]
    source_window: tuple[int, int]


def span_corrupt(window: Sequence[str], config: CorruptionConfig,
                 source_window: tuple[int, int] | None = None) -> DenoisingSample:
    """Corrupt a fixed-length window by masking random token spans.

    Masks ``round(mask_rate * L)`` tokens in ``max(1, round(masked / mean
    span length))`` spans. Span starts are drawn by partitioning the kept
    tokens among the gaps around the spans, so spans are always separated by
    at least one kept token. If the target would exceed
    ``max_target_length``, the span count (and, as a last resort, the masked
    budget) is reduced until it fits.
    """
    length = config.sequence_length
    if len(window) != length:
        raise ValueError(f"window has {len(window)} tokens, expected sequence_length={length}")

    num_masked = _round_half_up(config.mask_rate * length)
    num_masked = max(1, min(num_masked, length - 1))
    if num_masked + 2 > config.max_target_length:
        num_masked = config.max_target_length - 2
    spans = max(1, _round_half_up(num_masked / config.mean_span_length))
    spans = min(spans, num_masked, config.max_target_length - 1 - num_masked)
    spans = max(1, spans)
    kept = length - num_masked
    if kept < spans - 1:
        spans = kept + 1

    rng = PortableRng(config.seed)
    span_lengths = [num_masked // spans + 1] * (num_masked % spans)
    span_lengths += [num_masked // spans] * (spans - len(span_lengths))
    rng.shuffle(span_lengths)

    # Gap layout: [g0] span [g1] span ... [g_{k-1}] span [g_k]; interior
    # gaps get one reserved kept token to forbid adjacent spans.
    free = kept - (spans - 1)
    gaps = rng.composition(free, spans + 1)
    for i in range(1, spans):
        gaps[i] += 1

    input_tokens: list[str] = []
    target_tokens: list[str] = []
    pos = 0
    for span in range(spans):
        gap = gaps[span]
        input_tokens.extend(window[pos:pos + gap])
        pos += gap
        input_tokens.append(sentinel_token(span))
        target_tokens.append(sentinel_token(span))
        target_tokens.extend(window[pos:pos + span_lengths[span]])
        pos += span_lengths[span]
    input_tokens.extend(window[pos:pos + gaps[spans]])
    pos += gaps[spans]
    assert pos == length
    target_tokens.append(sentinel_token(spans))

    if source_window is None:
        source_window = (0, length)
    return DenoisingSample(input_tokens=input_tokens, target_tokens=target_tokens,
                           source_window=source_window)


def _parse_target(target_tokens: Sequence[str]) -> dict[int, list[str]]:
    spans: dict[int, list[str]] = {}
    current: int | None = None
    expected = 0
    for token in target_tokens:
        index = sentinel_index(token)
        if index is None:
            if current is None:
                raise SentinelMismatchError("target does not start with a sentinel")
            spans[current].append(token)
            continue
        if index != expected:
            raise SentinelMismatchError(
                f"target sentinel {sentinel_token(index)} out of order, expected "
                f"{sentinel_token(expected)}")
        spans[index] = []
        current = index
        expected += 1
    if current is None:
        raise SentinelMismatchError("target contains no sentinels")
    if spans[current]:
        raise SentinelMismatchError("target has tokens after its final sentinel")
    del spans[current]
    return spans


def reconstruct(sample: DenoisingSample) -> list[str]:
    """Invert :func:`span_corrupt`: substitute target spans back into the
    input at their sentinels, recovering the original window."""
    spans = _parse_target(sample.target_tokens)
    expected = 0
    output: list[str] = []
    for token in sample.input_tokens:
        index = sentinel_index(token)
        if index is None:
            output.append(token)
            continue
        if index != expected:
            raise SentinelMismatchError(
                f"input sentinel {sentinel_token(index)} out of order, expected "
                f"{sentinel_token(expected)}")
        if index not in spans:
            raise SentinelMismatchError(
                f"input sentinel {sentinel_token(index)} has no span in the target")
        output.extend(spans[index])
        expected += 1
    if expected != len(spans):
        missing = sentinel_token(expected)
        raise SentinelMismatchError(f"target sentinel {missing} absent from input")
    return output


def next_token_samples(stream: Sequence[str], window: int) -> list[NextTokenSample]:
    """Consecutive non-overlapping windows of exactly ``window`` tokens; the
    remainder is discarded."""
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    count = len(stream) // window
    return [
        NextTokenSample(tokens=list(stream[i * window:(i + 1) * window]),
                        source_window=(i * window, (i + 1) * window))
        for i in range(count)
    ]


@dataclass(frozen=True)
class LanguageMix:
    """Which languages to draw from, and the total sample quota."""

    languages: tuple[str, ...]
    quota: int

    PRESETS = {"en": ("en",), "hi": ("hi",), "en+hi": ("en", "hi")}

    def __post_init__(self):
        if self.quota < 1:
            raise ValueError("quota must be >= 1")
        if not self.languages or len(set(self.languages)) != len(self.languages):
            raise ValueError("languages must be non-empty and unique")
        if self.quota % len(self.languages):
            raise ValueError(
                f"quota {self.quota} not divisible across {len(self.languages)} languages")

    @classmethod
    def parse(cls, preset: str, quota: int) -> "LanguageMix":
        try:
            languages = cls.PRESETS[preset]
        except KeyError:
            raise ValueError(
                f"unknown language mix {preset!r} (expected one of {sorted(cls.PRESETS)})")
        return cls(languages=languages, quota=quota)

    def per_language_quota(self) -> dict[str, int]:
        share = self.quota // len(self.languages)
        return {language: share for language in self.languages}


DocumentSource = Iterable[PretrainDoc] | Callable[[], Iterable[PretrainDoc]]


def _reiterable(source: DocumentSource) -> DocumentSource:
    """Each language reads the source from the top, so one-shot iterators
    must be materialized; factories and sequences pass through."""
    if callable(source) or isinstance(source, (list, tuple)):
        return source
    return list(source)


def _documents_for(source: DocumentSource, language: str) -> Iterator[PretrainDoc]:
    documents = source() if callable(source) else source
    return (doc for doc in documents if doc.language == language)


def window_stream(documents: Iterable[PretrainDoc], window_len: int,
                  separator: str = DOC_SEPARATOR,
                  ) -> Iterator[tuple[list[str], tuple[int, int]]]:
    """Tile fixed-length token windows over a document stream.

    Documents are tokenized and concatenated with a separator token between
    adjacent documents; the trailing partial window is discarded.
    """
    buffer: list[str] = []
    start = 0
    consumed = 0
    first = True
    for doc in documents:
        if not first:
            buffer.append(separator)
        first = False
        buffer.extend(tokenize_words(doc.text, doc.language))
        while len(buffer) - start >= window_len:
            window = buffer[start:start + window_len]
            yield window, (consumed, consumed + window_len)
            start += window_len
            consumed += window_len
            if start >= 4 * window_len:
                del buffer[:start]
                start = 0


def _mixed_stream(mix: LanguageMix, seed: int,
                  windows_for: Callable[[str], Iterator],
                  make_sample: Callable[[str, int, list[str], tuple[int, int]], object],
                  ) -> Iterator[tuple[str, object]]:
    quotas = mix.per_language_quota()
    order: list[str] = []
    for language in mix.languages:
        order.extend([language] * quotas[language])
    PortableRng(derive_seed(seed, "interleave")).shuffle(order)
    generators = {language: windows_for(language) for language in mix.languages}
    produced = dict.fromkeys(mix.languages, 0)
    for language in order:
        try:
            window, span = next(generators[language])
        except StopIteration:
            shortfall = quotas[language] - produced[language]
            raise PoolExhaustedError(
                f"{language} pool exhausted after {produced[language]} of "
                f"{quotas[language]} samples (shortfall {shortfall})",
                shortfall=shortfall) from None
        yield language, make_sample(language, produced[language], window, span)
        produced[language] += 1


def build_pretrain_corpus(documents: DocumentSource, config: CorruptionConfig,
                          mix: LanguageMix, separator: str = DOC_SEPARATOR,
                          ) -> Iterator[tuple[str, DenoisingSample]]:
    """Emit ``(language, DenoisingSample)`` pairs meeting the mix quotas.

    Per-language emission order follows a seeded shuffle; every sample gets
    its own child seed so runs are reproducible end to end. Raises
    :class:`PoolExhaustedError` if a language's windows run out early.
    """
    documents = _reiterable(documents)

    def windows_for(language: str):
        return window_stream(_documents_for(documents, language),
                             config.sequence_length, separator)

    def make_sample(language: str, index: int, window: list[str],
                    span: tuple[int, int]) -> DenoisingSample:
        sample_config = replace(config, seed=derive_seed(config.seed, language, index))
        return span_corrupt(window, sample_config, source_window=span)

    return _mixed_stream(mix, config.seed, windows_for, make_sample)


def build_ntp_corpus(documents: DocumentSource, window: int, mix: LanguageMix,
                     seed: int, separator: str = DOC_SEPARATOR,
                     ) -> Iterator[tuple[str, NextTokenSample]]:
    """Emit ``(language, NextTokenSample)`` pairs meeting the mix quotas."""
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    documents = _reiterable(documents)

    def windows_for(language: str):
        return window_stream(_documents_for(documents, language), window, separator)

    def make_sample(language: str, index: int, tokens: list[str],
                    span: tuple[int, int]) -> NextTokenSample:
        return NextTokenSample(tokens=tokens, source_window=span)

    return _mixed_stream(mix, seed, windows_for, make_sample)
