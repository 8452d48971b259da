"""Entry point: resolve the configured models, emit the ready line, serve.

Model load failures exit nonzero before any ready line, so clients waiting
on the handshake fail fast.
"""

import argparse
import sys

from .models import (
    BackendConfig,
    DEFAULT_EMBED_MODEL,
    DEFAULT_NER_MODEL,
    DEFAULT_NLI_MODEL,
    ModelResolutionError,
)
from .server import Backend, make_http_server, serve_stdio


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lexsum-sidecar",
        description="Embedding/NER/NLI backend speaking the provider wire protocol.")
    parser.add_argument("--embed-model", default=DEFAULT_EMBED_MODEL,
                        help="built-in id or st:<sentence-transformers model>")
    parser.add_argument("--ner-model", default=DEFAULT_NER_MODEL,
                        help="built-in id or spacy:<pipeline name>")
    parser.add_argument("--nli-model", default=DEFAULT_NLI_MODEL,
                        help="built-in id or hf-nli:<model name>")
    parser.add_argument("--device", default="cpu", choices=["cpu", "accelerator"])
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--http", type=int, metavar="PORT", default=None,
                        help="serve over HTTP on this port instead of stdio")
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)

    try:
        config = BackendConfig(
            embed_model_id=args.embed_model,
            ner_model_id=args.ner_model,
            nli_model_id=args.nli_model,
            device=args.device,
            batch_size=args.batch_size,
        )
        backend = Backend(config)
    except (ModelResolutionError, ValueError) as exc:
        print(f"lexsum-sidecar: {exc}", file=sys.stderr)
        return 3

    if args.http is not None:
        server = make_http_server(backend, args.host, args.http)
        import json
        print(json.dumps({**backend.ready_line(),
                          "http": f"http://{args.host}:{server.server_address[1]}"}),
              flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        return 0

    serve_stdio(backend)
    return 0


if __name__ == "__main__":
    sys.exit(main())
