"""Model backends and the id registry.

Every backend is deterministic at inference time (no sampling, fixed
hashes), so repeated requests agree bit-for-bit on the same machine.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass

DEFAULT_EMBED_MODEL = "feature-hash-embed-256"
DEFAULT_NER_MODEL = "legal-pattern-ner-v1"
DEFAULT_NLI_MODEL = "lexical-overlap-nli-v1"


@dataclass(frozen=True)
class BackendConfig:
    embed_model_id: str = DEFAULT_EMBED_MODEL
    ner_model_id: str = DEFAULT_NER_MODEL
    nli_model_id: str = DEFAULT_NLI_MODEL
    device: str = "cpu"
    batch_size: int = 64

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.device not in ("cpu", "accelerator"):
            raise ValueError(f"unknown device {self.device!r}")


class ModelResolutionError(Exception):
    """A configured model id cannot be loaded."""


def _strip_edges(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start])[0] in "PS":
        start += 1
    while end > start and unicodedata.category(token[end - 1])[0] in "PS":
        end -= 1
    return token[start:end]


def _content_tokens(text: str) -> list[str]:
    tokens = []
    for raw in text.casefold().split():
        stripped = _strip_edges(raw)
        if stripped:
            tokens.append(stripped)
    return tokens


class FeatureHashEmbedder:
    """256-dim embeddings from hashed character trigrams plus a whole-word
    feature, L2-normalized; sentence vectors are the L2-normalized mean of
    token vectors."""

    dim = 256

    def __init__(self, model_id: str = DEFAULT_EMBED_MODEL):
        self.model_id = model_id
        self._cache: dict[str, list[float]] = {}

    def _token_vector(self, token: str) -> list[float]:
        cached = self._cache.get(token)
        if cached is not None:
            return cached
        acc = [0.0] * self.dim
        padded = f"^{token}$"
        features = [padded[i:i + 3] for i in range(len(padded) - 2)]
        features.append("W:" + token)
        for feature in features:
            digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8)
            value = int.from_bytes(digest.digest(), "big")
            acc[value % self.dim] += 1.0 if value & 0x100 else -1.0
        norm = sum(x * x for x in acc) ** 0.5 or 1.0
        vector = [x / norm for x in acc]
        self._cache[token] = vector
        return vector

    def embed_tokens(self, texts, language=None):
        return [[list(self._token_vector(token)) for token in text.split()]
                for text in texts]

    def embed_sentences(self, texts, language=None):
        out = []
        for text in texts:
            tokens = text.split()
            acc = [0.0] * self.dim
            for token in tokens:
                vector = self._token_vector(token)
                for i in range(self.dim):
                    acc[i] += vector[i]
            if tokens:
                acc = [x / len(tokens) for x in acc]
            norm = sum(x * x for x in acc) ** 0.5
            if norm > 0:
                acc = [x / norm for x in acc]
            out.append(acc)
        return out


class PatternNer:
    """Rule-based NER tuned for Indian legal prose.

    English: maximal runs of capitalized tokens, allowing the connectors
    of/and/for between capitalized words ("Supreme Court of India" stays one
    entity); honorifics type the following run as PER, institutional cue
    words as ORG, a place gazetteer as LOC, everything else MISC.
    Hindi: runs of gazetteer words (no case in Devanagari).
    """

    CONNECTORS = frozenset({"of", "and", "for"})
    HONORIFICS = frozenset({"mr.", "mrs.", "ms.", "dr.", "smt.", "shri", "shri.",
                            "justice", "hon'ble", "sri"})
    ORG_CUES = frozenset({"court", "courts", "tribunal", "commission", "authority",
                          "board", "bank", "corporation", "council", "ltd", "ltd.",
                          "pvt", "pvt.", "co.", "committee", "ministry", "department",
                          "state", "government", "union"})
    LOC_WORDS = frozenset({"india", "delhi", "mumbai", "bombay", "kolkata", "calcutta",
                           "chennai", "madras", "lucknow", "allahabad", "prayagraj",
                           "patna", "punjab", "haryana", "uttar", "pradesh", "madhya",
                           "andhra", "bihar", "bengal", "karnataka", "kerala",
                           "gujarat", "rajasthan", "maharashtra"})
    # Devanagari legal/place gazetteer: supreme/high court, India, Delhi,
    # Uttar Pradesh, government, tribunal.
    HI_GAZETTEER = {
        "सर्वोच्च": "ORG",      # sarvochch
        "उच्च": "ORG",                              # uchch
        "न्यायालय": "ORG",      # nyayalay
        "अधिकरण": "ORG",                  # adhikaran
        "सरकार": "ORG",                        # sarkar
        "भारत": "LOC",                              # bharat
        "दिल्ली": "LOC",                  # dilli
        "उत्तर": "LOC",                        # uttar
        "प्रदेश": "LOC",                  # pradesh
    }

    def __init__(self, model_id: str = DEFAULT_NER_MODEL):
        self.model_id = model_id

    def ner(self, text, language="en"):
        if language == "hi":
            return self._hindi_entities(text)
        return self._english_entities(text)

    @staticmethod
    def _spans(text):
        position = 0
        for piece in text.split():
            start = text.index(piece, position)
            position = start + len(piece)
            yield piece, start, position

    def _breaks_run(self, token: str) -> bool:
        """A sentence-final token ends the current run; honorifics,
        initials, and dotted abbreviations ("A.I.R.") do not."""
        if token[-1] not in ".?!":
            return False
        if token.lower() in self.HONORIFICS:
            return False
        core = _strip_edges(token)
        return len(core) > 1 and "." not in core

    def _english_entities(self, text):
        tokens = list(self._spans(text))
        entities = []
        i = 0
        while i < len(tokens):
            piece, start, end = tokens[i]
            if not piece[0].isupper():
                i += 1
                continue
            run_start, run_end = start, end
            last_words = [piece]
            j = i + 1
            while j < len(tokens) and not self._breaks_run(last_words[-1]):
                nxt, nxt_start, nxt_end = tokens[j]
                if nxt[0].isupper():
                    run_end = nxt_end
                    last_words.append(nxt)
                    j += 1
                elif (nxt.lower() in self.CONNECTORS and j + 1 < len(tokens)
                      and tokens[j + 1][0][0].isupper()):
                    follower, _, follower_end = tokens[j + 1]
                    run_end = follower_end
                    last_words.extend([nxt, follower])
                    j += 2
                else:
                    break
            surface = text[run_start:run_end]
            while surface and unicodedata.category(surface[-1])[0] in "PS":
                surface = surface[:-1]
            if surface:
                preceding = tokens[i - 1][0].lower() if i > 0 else ""
                entities.append({
                    "surface": surface,
                    "type": self._entity_type(last_words, preceding),
                })
            i = j
        return entities

    def _entity_type(self, words, preceding):
        lowered = [_strip_edges(w.lower()) for w in words]
        if any(w in self.ORG_CUES or w + "." in self.ORG_CUES for w in lowered):
            return "ORG"
        if lowered and all(w in self.LOC_WORDS for w in lowered if w):
            return "LOC"
        honorific_forms = {preceding, _strip_edges(preceding),
                           _strip_edges(preceding) + "."}
        if honorific_forms & self.HONORIFICS:
            return "PER"
        if lowered and (lowered[0] in self.HONORIFICS or lowered[0] + "." in self.HONORIFICS):
            return "PER"
        return "MISC"

    def _hindi_entities(self, text):
        entities = []
        run_start = run_end = None
        run_type = None
        for piece, start, _end in self._spans(text):
            word = _strip_edges(piece)
            kind = self.HI_GAZETTEER.get(word)
            if kind is not None and word:
                offset = piece.index(word)
                if run_start is None:
                    run_start = start + offset
                    run_type = kind
                run_end = start + offset + len(word)
            else:
                if run_start is not None:
                    entities.append({"surface": text[run_start:run_end],
                                     "type": run_type})
                run_start = run_end = run_type = None
        if run_start is not None:
            entities.append({"surface": text[run_start:run_end], "type": run_type})
        return [e for e in entities if e["surface"]]


class LexicalNli:
    """Entailment as hypothesis-token coverage by the premise; a negation
    cue present on exactly one side shifts most of that mass to
    contradiction. Probabilities always sum to 1."""

    NEGATION = frozenset({"not", "no", "never", "without", "nor", "cannot", "n't",
                          "नहीं", "न"})

    def __init__(self, model_id: str = DEFAULT_NLI_MODEL):
        self.model_id = model_id

    def nli(self, pairs):
        results = []
        for premise, hypothesis in pairs:
            premise_tokens = set(_content_tokens(premise))
            hypothesis_tokens = set(_content_tokens(hypothesis))
            if not hypothesis_tokens:
                results.append({"entail": 0.0, "neutral": 1.0, "contradict": 0.0})
                continue
            content_hyp = hypothesis_tokens - self.NEGATION
            content_prem = premise_tokens - self.NEGATION
            if content_hyp:
                overlap = len(content_hyp & content_prem) / len(content_hyp)
            else:
                overlap = 1.0 if hypothesis_tokens <= premise_tokens else 0.0
            negated_premise = bool(premise_tokens & self.NEGATION)
            negated_hypothesis = bool(hypothesis_tokens & self.NEGATION)
            if negated_premise != negated_hypothesis:
                entail = overlap * 0.25
                contradict = overlap * 0.75
            else:
                entail = overlap
                contradict = 0.0
            neutral = 1.0 - entail - contradict
            results.append({"entail": entail, "neutral": neutral,
                            "contradict": contradict})
        return results


def _load_sentence_transformer(model_id: str):
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ModelResolutionError(
            f"model {model_id!r} needs the sentence-transformers package") from exc
    try:
        model = SentenceTransformer(model_id.split(":", 1)[1])
    except Exception as exc:  # noqa: BLE001 - loader errors vary by hub backend
        raise ModelResolutionError(f"cannot load {model_id!r}: {exc}") from exc

    class _StAdapter:
        dim = model.get_sentence_embedding_dimension()

        def __init__(self):
            self.model_id = model_id

        def embed_sentences(self, texts, language=None):
            return [vec.tolist() for vec in
                    model.encode(list(texts), normalize_embeddings=True)]

        def embed_tokens(self, texts, language=None):
            # One embedding per whitespace word, encoded independently.
            return [self.embed_sentences(text.split()) for text in texts]

    return _StAdapter()


def _load_hf_nli(model_id: str):
    try:
        from transformers import pipeline
    except ImportError as exc:
        raise ModelResolutionError(
            f"model {model_id!r} needs the transformers package") from exc
    try:
        classifier = pipeline("text-classification",
                              model=model_id.split(":", 1)[1],
                              top_k=None, device=-1)
    except Exception as exc:  # noqa: BLE001
        raise ModelResolutionError(f"cannot load {model_id!r}: {exc}") from exc

    class _HfNliAdapter:
        def __init__(self):
            self.model_id = model_id

        def nli(self, pairs):
            outputs = classifier([{"text": p, "text_pair": h} for p, h in pairs])
            results = []
            for scores in outputs:
                probs = {"entail": 0.0, "neutral": 0.0, "contradict": 0.0}
                for entry in scores:
                    label = entry["label"].lower()
                    if "entail" in label:
                        probs["entail"] = float(entry["score"])
                    elif "neutral" in label:
                        probs["neutral"] = float(entry["score"])
                    elif "contra" in label:
                        probs["contradict"] = float(entry["score"])
                total = sum(probs.values()) or 1.0
                results.append({k: v / total for k, v in probs.items()})
            return results

    return _HfNliAdapter()


def _load_spacy_ner(model_id: str):
    try:
        import spacy
    except ImportError as exc:
        raise ModelResolutionError(f"model {model_id!r} needs the spacy package") from exc
    try:
        nlp = spacy.load(model_id.split(":", 1)[1])
    except Exception as exc:  # noqa: BLE001
        raise ModelResolutionError(f"cannot load {model_id!r}: {exc}") from exc

    class _SpacyAdapter:
        def __init__(self):
            self.model_id = model_id

        def ner(self, text, language="en"):
            return [{"surface": ent.text, "type": ent.label_}
                    for ent in nlp(text).ents]

    return _SpacyAdapter()


def resolve_embedder(model_id: str):
    if model_id == DEFAULT_EMBED_MODEL:
        return FeatureHashEmbedder()
    if model_id.startswith("st:"):
        return _load_sentence_transformer(model_id)
    raise ModelResolutionError(f"unknown embedding model id {model_id!r}")


def resolve_ner(model_id: str):
    if model_id == DEFAULT_NER_MODEL:
        return PatternNer()
    if model_id.startswith("spacy:"):
        return _load_spacy_ner(model_id)
    raise ModelResolutionError(f"unknown NER model id {model_id!r}")


def resolve_nli(model_id: str):
    if model_id == DEFAULT_NLI_MODEL:
        return LexicalNli()
    if model_id.startswith("hf-nli:"):
        return _load_hf_nli(model_id)
    raise ModelResolutionError(f"unknown NLI model id {model_id!r}")
