"""Serving loop for the provider wire protocol.

Requests arrive one JSON object per line on stdin (or as single POSTed
documents in HTTP mode):

    {"id": <u64>, "op": "embed_tokens"|"embed_sentences"|"ner"|"nli", "payload": {...}}

Responses carry the same id with either a ``result`` or an ``error`` field.
Startup prints one ready line with the vector dimension and resolved model
ids. Malformed requests produce error responses; the loop never exits on
bad input.
"""

from __future__ import annotations

import http.server
import json
import sys

from .models import BackendConfig, resolve_embedder, resolve_ner, resolve_nli


class Backend:
    """Resolved models plus request dispatch with internal batching."""

    def __init__(self, config: BackendConfig):
        self.config = config
        self.embedder = resolve_embedder(config.embed_model_id)
        self.ner_model = resolve_ner(config.ner_model_id)
        self.nli_model = resolve_nli(config.nli_model_id)

    def ready_line(self) -> dict:
        return {
            "ready": True,
            "dim": self.embedder.dim,
            "models": {
                "embed": self.embedder.model_id,
                "ner": self.ner_model.model_id,
                "nli": self.nli_model.model_id,
            },
        }

    def _batched(self, items, fn):
        out = []
        size = self.config.batch_size
        for start in range(0, len(items), size):
            out.extend(fn(items[start:start + size]))
        return out

    def dispatch(self, request) -> dict:
        if not isinstance(request, dict):
            raise ValueError("request is not an object")
        op = request.get("op")
        payload = request.get("payload")
        if not isinstance(payload, dict):
            raise ValueError("request payload missing or not an object")
        language = payload.get("language")
        if op == "embed_tokens":
            texts = self._texts(payload)
            vectors = self._batched(texts, lambda batch: self.embedder.embed_tokens(
                batch, language))
            return {"vectors": vectors}
        if op == "embed_sentences":
            texts = self._texts(payload)
            vectors = self._batched(texts, lambda batch: self.embedder.embed_sentences(
                batch, language))
            return {"vectors": vectors}
        if op == "ner":
            text = payload.get("text")
            if not isinstance(text, str):
                raise ValueError("ner payload needs a 'text' string")
            return {"entities": self.ner_model.ner(text, payload.get("language", "en"))}
        if op == "nli":
            pairs = payload.get("pairs")
            if (not isinstance(pairs, list)
                    or any(not isinstance(p, list) or len(p) != 2 for p in pairs)):
                raise ValueError("nli payload needs 'pairs' of [premise, hypothesis]")
            pair_tuples = [(str(p), str(h)) for p, h in pairs]
            return {"probs": self._batched(pair_tuples, self.nli_model.nli)}
        raise ValueError(f"unknown op {op!r}")

    @staticmethod
    def _texts(payload) -> list[str]:
        texts = payload.get("texts")
        if not isinstance(texts, list) or any(not isinstance(t, str) for t in texts):
            raise ValueError("payload needs a 'texts' list of strings")
        return texts


def serve_stdio(backend: Backend, stdin=None, stdout=None) -> None:
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    print(json.dumps(backend.ready_line()), file=stdout, flush=True)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        request_id = 0
        try:
            request = json.loads(line)
            if isinstance(request, dict) and isinstance(request.get("id"), int):
                request_id = request["id"]
            response = {"id": request_id, "result": backend.dispatch(request)}
        except Exception as exc:  # noqa: BLE001 - survive any bad request
            response = {"id": request_id, "error": str(exc)}
        print(json.dumps(response, ensure_ascii=False), file=stdout, flush=True)


def make_http_server(backend: Backend, host: str = "127.0.0.1", port: int = 0):
    """HTTP flavor of the same schema: POST / with one request document,
    GET /health for the ready document."""

    class Handler(http.server.BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, payload):
            body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/health":
                self._send(backend.ready_line())
            else:
                self.send_error(404)

        def do_POST(self):
            request_id = 0
            try:
                length = int(self.headers.get("Content-Length", 0))
                request = json.loads(self.rfile.read(length).decode("utf-8"))
                if isinstance(request, dict) and isinstance(request.get("id"), int):
                    request_id = request["id"]
                self._send({"id": request_id, "result": backend.dispatch(request)})
            except Exception as exc:  # noqa: BLE001
                self._send({"id": request_id, "error": str(exc)})

    return http.server.ThreadingHTTPServer((host, port), Handler)
