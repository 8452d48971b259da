"""Client for external embedding / NER / NLI backends, plus a deterministic
in-process stub so everything runs without an ML runtime.

Wire protocol (newline-delimited JSON over a child-process pipe, or HTTP
POST of one request per call):

    request   {"id": <u64>, "op": <str>, "payload": {...}}\\n
    response  {"id": <u64>, "result": {...}}\\n   or   {"id": <u64>, "error": <str>}\\n

Backend selection via the ``LEXSUMKIT_PROVIDER`` environment variable:
``stub`` | ``subprocess:<command>`` | ``http:<url>``. Subprocess backends
emit one ready line (``{"ready": true, "dim": ..., "models": {...}}``)
before serving; HTTP backends expose the same document at ``GET /health``.

``python -m lexsumkit.provider`` serves the stub over stdin/stdout, which is
the reference implementation of the serving side of the protocol.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import shlex
import subprocess
import sys
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ProviderError

ENV_VAR = "LEXSUMKIT_PROVIDER"
BATCH_LIMIT = 64
STUB_DIM = 64
_PROB_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Entity:
    surface: str
    type: str


@dataclass(frozen=True)
class EntailmentProbs:
    entail: float
    neutral: float
    contradict: float


class Provider:
    """Interface shared by the stub and the remote transports."""

    def embed_tokens(self, texts: Sequence[str], language: str | None = None,
                     ) -> list[list[list[float]]]:
        raise NotImplementedError

    def embed_sentences(self, texts: Sequence[str], language: str | None = None,
                        ) -> list[list[float]]:
        raise NotImplementedError

    def ner(self, text: str, language: str) -> list[Entity]:
        raise NotImplementedError

    def nli(self, pairs: Sequence[tuple[str, str]]) -> list[EntailmentProbs]:
        raise NotImplementedError

    def handshake(self) -> dict:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class StubProvider(Provider):
    """Pure function of the input text; byte-identical across runs and
    platforms.

    Embeddings are 64-dim vectors built from hashed character trigrams and
    L2-normalized, so identical text always embeds identically and lexical
    overlap yields rough similarity. NER flags maximal runs of capitalized
    tokens. NLI scores entailment as the fraction of hypothesis tokens
    present in the premise (contradiction is never predicted).
    """

    dim = STUB_DIM
    model_ids = {
        "embed": "stub-hashed-trigram-64",
        "ner": "stub-capitalized-runs",
        "nli": "stub-token-overlap",
    }

    def __init__(self):
        self._token_cache: dict[str, tuple[float, ...]] = {}

    def _token_vector(self, token: str) -> tuple[float, ...]:
        cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        acc = [0.0] * STUB_DIM
        padded = f"^{token}$"
        for i in range(len(padded) - 2):
            digest = hashlib.blake2b(padded[i:i + 3].encode("utf-8"), digest_size=8)
            value = int.from_bytes(digest.digest(), "big")
            sign = 1.0 if value & 0x40 else -1.0
            acc[value % STUB_DIM] += sign
        norm = sum(x * x for x in acc) ** 0.5
        if norm == 0.0:
            # Trigram signs cancelled out; fall back to a whole-token bucket.
            digest = hashlib.blake2b(padded.encode("utf-8"), digest_size=8)
            acc[int.from_bytes(digest.digest(), "big") % STUB_DIM] = 1.0
            norm = 1.0
        vector = tuple(x / norm for x in acc)
        self._token_cache[token] = vector
        return vector

    def embed_tokens(self, texts, language=None):
        return [[list(self._token_vector(token)) for token in text.split()]
                for text in texts]

    def embed_sentences(self, texts, language=None):
        vectors = []
        for text in texts:
            tokens = text.split()
            acc = [0.0] * STUB_DIM
            for token in tokens:
                for i, component in enumerate(self._token_vector(token)):
                    acc[i] += component
            if tokens:
                acc = [x / len(tokens) for x in acc]
            norm = sum(x * x for x in acc) ** 0.5
            if norm > 0.0:
                acc = [x / norm for x in acc]
            vectors.append(acc)
        return vectors

    def ner(self, text, language):
        entities = []
        run_start = run_end = None
        position = 0
        for piece in text.split():
            start = text.index(piece, position)
            position = start + len(piece)
            if piece[0].isupper():
                if run_start is None:
                    run_start = start
                run_end = start + len(piece)
            else:
                if run_start is not None:
                    entities.append(self._run_entity(text, run_start, run_end))
                run_start = run_end = None
        if run_start is not None:
            entities.append(self._run_entity(text, run_start, run_end))
        return [e for e in entities if e.surface]

    @staticmethod
    def _run_entity(text: str, start: int, end: int) -> Entity:
        surface = text[start:end]
        while surface and not surface[-1].isalnum():
            surface = surface[:-1]
        return Entity(surface=surface, type="ENT")

    def nli(self, pairs):
        results = []
        for premise, hypothesis in pairs:
            hyp = set(hypothesis.lower().split())
            if not hyp:
                results.append(EntailmentProbs(entail=0.0, neutral=1.0, contradict=0.0))
                continue
            prem = set(premise.lower().split())
            entail = len(hyp & prem) / len(hyp)
            results.append(EntailmentProbs(entail=entail, neutral=1.0 - entail,
                                           contradict=0.0))
        return results

    def handshake(self):
        return {"backend": "stub", "dim": self.dim, "models": dict(self.model_ids)}


def _batches(items: Sequence, size: int) -> Iterable[Sequence]:
    for start in range(0, len(items), size):
        yield items[start:start + size]


class _RemoteProvider(Provider):
    """Shared marshaling, batching, and response validation for transports."""

    def __init__(self, max_in_flight: int = 8):
        self._dim: int | None = None
        self._in_flight = threading.Semaphore(max_in_flight)

    def _call(self, op: str, payload: dict) -> dict:
        raise NotImplementedError

    def _submit(self, op: str, payload: dict) -> dict:
        with self._in_flight:
            return self._call(op, payload)

    def _check_vector(self, vector) -> list[float]:
        if not isinstance(vector, list) or not vector:
            raise ProviderError("backend returned a malformed vector")
        if self._dim is None:
            self._dim = len(vector)
        elif len(vector) != self._dim:
            raise ProviderError(
                f"vector dimension drift: got {len(vector)}, session dimension {self._dim}")
        return [float(x) for x in vector]

    def embed_tokens(self, texts, language=None):
        out: list[list[list[float]]] = []
        for batch in _batches(list(texts), BATCH_LIMIT):
            result = self._submit("embed_tokens", {"texts": list(batch), "language": language})
            vectors = result.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(batch):
                raise ProviderError("embed_tokens: backend returned wrong vector group count")
            out.extend([[self._check_vector(v) for v in group] for group in vectors])
        return out

    def embed_sentences(self, texts, language=None):
        out: list[list[float]] = []
        for batch in _batches(list(texts), BATCH_LIMIT):
            result = self._submit("embed_sentences", {"texts": list(batch), "language": language})
            vectors = result.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(batch):
                raise ProviderError("embed_sentences: backend returned wrong vector count")
            out.extend(self._check_vector(v) for v in vectors)
        return out

    def ner(self, text, language):
        result = self._submit("ner", {"text": text, "language": language})
        entities = result.get("entities")
        if not isinstance(entities, list):
            raise ProviderError("ner: backend returned no entity list")
        return [Entity(surface=str(e["surface"]), type=str(e.get("type", "ENT")))
                for e in entities]

    def nli(self, pairs):
        out: list[EntailmentProbs] = []
        for batch in _batches(list(pairs), BATCH_LIMIT):
            result = self._submit("nli", {"pairs": [[p, h] for p, h in batch]})
            probs = result.get("probs")
            if not isinstance(probs, list) or len(probs) != len(batch):
                raise ProviderError("nli: backend returned wrong probability count")
            for entry in probs:
                triple = EntailmentProbs(
                    entail=float(entry["entail"]),
                    neutral=float(entry["neutral"]),
                    contradict=float(entry["contradict"]),
                )
                total = triple.entail + triple.neutral + triple.contradict
                if abs(total - 1.0) > _PROB_TOLERANCE:
                    raise ProviderError(f"nli probabilities sum to {total}, expected 1")
                out.append(triple)
        return out


class SubprocessProvider(_RemoteProvider):
    """Talks the line protocol to a child process; responses may arrive out
    of order and are re-associated by request id."""

    def __init__(self, command: str, max_in_flight: int = 8,
                 timeout: float = 120.0, ready_timeout: float = 60.0):
        super().__init__(max_in_flight)
        self._timeout = timeout
        self._ids = itertools.count(1)
        self._write_lock = threading.Lock()
        self._cond = threading.Condition()
        self._responses: dict[int, dict] = {}
        self._closed = False
        self._ready = threading.Event()
        self._handshake: dict = {}
        try:
            self._process = subprocess.Popen(
                shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1)
        except OSError as exc:
            raise ProviderError(f"failed to launch provider backend {command!r}: {exc}") from exc
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        if not self._ready.wait(ready_timeout):
            self.close()
            raise ProviderError(f"provider backend {command!r} sent no ready line")

    def _read_loop(self):
        for line in self._process.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                message = json.loads(line)
            except json.JSONDecodeError:
                continue
            if not isinstance(message, dict):
                continue
            if message.get("ready"):
                self._handshake = message
                self._ready.set()
                continue
            with self._cond:
                self._responses[message.get("id")] = message
                self._cond.notify_all()
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def _call(self, op, payload):
        request_id = next(self._ids)
        line = json.dumps({"id": request_id, "op": op, "payload": payload},
                          ensure_ascii=False)
        with self._write_lock:
            if self._closed or self._process.poll() is not None:
                raise ProviderError("provider backend process has exited")
            try:
                self._process.stdin.write(line + "\n")
                self._process.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise ProviderError(f"provider backend pipe failed: {exc}") from exc
        with self._cond:
            deadline_hit = not self._cond.wait_for(
                lambda: request_id in self._responses or self._closed,
                timeout=self._timeout)
            response = self._responses.pop(request_id, None)
        if response is None:
            if deadline_hit:
                raise ProviderError(f"provider backend timed out on request {request_id}")
            raise ProviderError("provider backend closed before responding")
        if "error" in response:
            raise ProviderError(f"backend error: {response['error']}")
        result = response.get("result")
        if not isinstance(result, dict):
            raise ProviderError("backend response carries no result object")
        return result

    def handshake(self):
        return dict(self._handshake)

    def close(self):
        process = getattr(self, "_process", None)
        if process is None:
            return
        try:
            if process.stdin:
                process.stdin.close()
        except OSError:
            pass
        try:
            process.terminate()
            process.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            process.kill()


class HttpProvider(_RemoteProvider):
    """POSTs one request document per call to a configured endpoint."""

    def __init__(self, url: str, max_in_flight: int = 8, timeout: float = 120.0):
        super().__init__(max_in_flight)
        self._url = url.rstrip("/")
        self._timeout = timeout
        self._ids = itertools.count(1)

    def _call(self, op, payload):
        request_id = next(self._ids)
        body = json.dumps({"id": request_id, "op": op, "payload": payload},
                          ensure_ascii=False).encode("utf-8")
        request = urllib.request.Request(
            self._url, data=body, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(request, timeout=self._timeout) as response:
                message = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, json.JSONDecodeError, OSError) as exc:
            raise ProviderError(f"http provider request failed: {exc}") from exc
        if not isinstance(message, dict) or message.get("id") != request_id:
            raise ProviderError("http provider response id does not match the request")
        if "error" in message:
            raise ProviderError(f"backend error: {message['error']}")
        result = message.get("result")
        if not isinstance(result, dict):
            raise ProviderError("backend response carries no result object")
        return result

    def handshake(self):
        try:
            with urllib.request.urlopen(self._url + "/health", timeout=self._timeout) as response:
                return json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, json.JSONDecodeError, OSError) as exc:
            raise ProviderError(f"http provider health check failed: {exc}") from exc


def from_env(environ=None) -> Provider | None:
    """Build the provider selected by ``LEXSUMKIT_PROVIDER``; None if unset."""
    environ = os.environ if environ is None else environ
    value = environ.get(ENV_VAR, "").strip()
    if not value:
        return None
    if value == "stub":
        return StubProvider()
    if value.startswith("subprocess:"):
        return SubprocessProvider(value[len("subprocess:"):])
    if value.startswith(("http://", "https://")):
        return HttpProvider(value)
    if value.startswith("http:"):
        return HttpProvider(value[len("http:"):])
    raise ProviderError(
        f"unrecognized provider backend {value!r} "
        "(expected stub | subprocess:<command> | http:<url>)")


def dispatch_request(provider: Provider, request) -> dict:
    """Serve one parsed wire request against a provider; shared by the stub
    server below and usable by any backend speaking the protocol."""
    if not isinstance(request, dict):
        raise ValueError("request is not an object")
    op = request.get("op")
    payload = request.get("payload")
    if not isinstance(payload, dict):
        raise ValueError("request payload missing or not an object")
    if op == "embed_tokens":
        texts = _texts_field(payload)
        return {"vectors": provider.embed_tokens(texts, payload.get("language"))}
    if op == "embed_sentences":
        texts = _texts_field(payload)
        return {"vectors": provider.embed_sentences(texts, payload.get("language"))}
    if op == "ner":
        text = payload.get("text")
        if not isinstance(text, str):
            raise ValueError("ner payload needs a 'text' string")
        entities = provider.ner(text, payload.get("language", "en"))
        return {"entities": [{"surface": e.surface, "type": e.type} for e in entities]}
    if op == "nli":
        pairs = payload.get("pairs")
        if (not isinstance(pairs, list)
                or any(not isinstance(p, list) or len(p) != 2 for p in pairs)):
            raise ValueError("nli payload needs 'pairs' of [premise, hypothesis]")
        probs = provider.nli([(str(p), str(h)) for p, h in pairs])
        return {"probs": [
            {"entail": p.entail, "neutral": p.neutral, "contradict": p.contradict}
            for p in probs
        ]}
    raise ValueError(f"unknown op {op!r}")


def _texts_field(payload: dict) -> list[str]:
    texts = payload.get("texts")
    if not isinstance(texts, list) or any(not isinstance(t, str) for t in texts):
        raise ValueError("payload needs a 'texts' list of strings")
    return texts


def serve_stub(stdin=None, stdout=None) -> None:
    """Serve the stub over stdin/stdout with a ready line; malformed
    requests get error responses and never stop the loop."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    provider = StubProvider()
    print(json.dumps({"ready": True, **provider.handshake()}), file=stdout, flush=True)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        request_id = 0
        try:
            request = json.loads(line)
            if isinstance(request, dict) and isinstance(request.get("id"), int):
                request_id = request["id"]
            response = {"id": request_id, "result": dispatch_request(provider, request)}
        except Exception as exc:  # noqa: BLE001 - the loop must survive anything
            response = {"id": request_id, "error": str(exc)}
        print(json.dumps(response, ensure_ascii=False), file=stdout, flush=True)


if __name__ == "__main__":
    serve_stub()
