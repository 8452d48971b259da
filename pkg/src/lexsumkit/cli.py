"""Command-line entry point wiring the pipelines together.

Every subcommand that writes an output file also writes a
``<output>.manifest.json`` run manifest (flags, input/output content
digests, seed, tool version); seeded subcommands are bit-reproducible, so
re-running with identical flags reproduces identical output digests.
Intermediate artifacts are JSON-Lines with a ``v`` schema-version field.
"""

from __future__ import annotations

import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import click

from . import __version__, chunkalign, corruptor, judge, provider as provider_mod
from .corpus import corpus_stats, load_dataset, load_pretrain_corpus, pair_stats
from .errors import ToolkitError
from .oracle import build_extractive_labels
from .textseg import tokenize_words, whitespace_tokens

SCHEMA_VERSION = 1


@dataclass
class RunManifest:
    subcommand: str
    version: str
    config: dict
    inputs: dict[str, str]
    outputs: dict[str, str]
    seed: int | None = None

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_jsonl(path: Path, records) -> tuple[str, int]:
    digest = hashlib.sha256()
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            line = json.dumps(record, ensure_ascii=False) + "\n"
            handle.write(line)
            digest.update(line.encode("utf-8"))
            count += 1
    return digest.hexdigest(), count


def _read_jsonl(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                _fail(f"{path}: line {lineno}: invalid JSON ({exc.msg})")
            if not isinstance(record, dict):
                _fail(f"{path}: line {lineno}: record is not an object")
            records.append(record)
    return records


def _fail(message: str, **details):
    report = {"error": message, **details}
    click.echo(json.dumps(report, ensure_ascii=False), err=True)
    sys.exit(2)


def _finish(subcommand: str, config: dict, inputs: list, output: Path | None,
            output_digest: str | None, seed: int | None = None) -> None:
    if output is None:
        return
    manifest = RunManifest(
        subcommand=subcommand,
        version=__version__,
        config={key: _jsonable(value) for key, value in config.items()},
        inputs={str(p): _sha256_file(Path(p)) for p in inputs},
        outputs={str(output): output_digest},
        seed=seed,
    )
    manifest.write(Path(str(output) + ".manifest.json"))


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    return value


def _load_split(dataset: Path, split: str, language: str):
    try:
        return load_dataset(dataset, split, language)
    except (ToolkitError, OSError) as exc:
        _fail(str(exc), subcommand_input=str(dataset))


@click.group()
@click.version_option(__version__)
def main():
    """Data preparation and evaluation for legal document summarization."""


@main.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option("--split", default="train", show_default=True)
@click.option("--language", default="en", show_default=True,
              help="Summary language to load (en|hi).")
@click.option("--jobs", default=1, show_default=True, help="Parallel worker processes.")
@click.option("--output", type=click.Path(path_type=Path), default=None,
              help="Also write the report to this JSON file (with a manifest).")
def stats(dataset, split, language, jobs, output):
    """Corpus statistics: word counts and extractive coverage/density."""
    ds = _load_split(dataset, split, language)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            rows = list(executor.map(_stats_worker, ds.pairs, chunksize=16))
        n = len(rows)
        report = {
            "n_pairs": n,
            "avg_doc_words": sum(r[0] for r in rows) / n,
            "avg_summary_words": sum(r[1] for r in rows) / n,
            "avg_coverage": sum(r[2] for r in rows) / n,
            "avg_density": sum(r[3] for r in rows) / n,
        }
    else:
        report = corpus_stats(ds).to_dict()
    report = {"v": SCHEMA_VERSION, "split": split, "language": language, **report}
    click.echo(json.dumps(report, ensure_ascii=False))
    if output is not None:
        text = json.dumps(report, ensure_ascii=False, indent=2) + "\n"
        output.write_text(text, encoding="utf-8")
        _finish("stats", {"split": split, "language": language}, [dataset],
                output, hashlib.sha256(text.encode("utf-8")).hexdigest())


def _stats_worker(pair):
    return pair_stats(*pair)


def _oracle_worker(payload):
    judgment_id, sentences, reference_tokens = payload
    return build_extractive_labels(sentences, reference_tokens, judgment_id).to_dict()


@main.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option("--split", default="train", show_default=True)
@click.option("--language", default="en", show_default=True)
@click.option("--output", type=click.Path(path_type=Path), required=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--skip-degenerate", is_flag=True,
              help="Skip documents whose reference has no bigram instead of failing.")
def oracle(dataset, split, language, output, jobs, skip_degenerate):
    """Greedy extractive labels from abstractive reference summaries."""
    ds = _load_split(dataset, split, language)
    payloads = []
    skipped = 0
    for judgment, summary in ds.pairs:
        reference_tokens = tokenize_words(summary.text, summary.language)
        if len(reference_tokens) < 2 or not judgment.sentences:
            if skip_degenerate:
                skipped += 1
                click.echo(f"skipping degenerate document {judgment.id}", err=True)
                continue
            _fail(f"document {judgment.id}: reference too short for ROUGE-2 oracle")
        payloads.append((judgment.id, judgment.sentences, reference_tokens))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            records = executor.map(_oracle_worker, payloads, chunksize=4)
            digest, count = _write_jsonl(
                output, ({"v": SCHEMA_VERSION, **r} for r in records))
    else:
        digest, count = _write_jsonl(
            output, ({"v": SCHEMA_VERSION, **_oracle_worker(p)} for p in payloads))
    config = {"split": split, "language": language, "jobs": jobs,
              "skip_degenerate": skip_degenerate}
    _finish("oracle", config, [dataset], output, digest)
    click.echo(json.dumps({"documents": count, "skipped": skipped}))


def _whitespace_views(judgment):
    per_sentence = [whitespace_tokens(s.text) for s in judgment.sentences]
    doc_tokens = [token for tokens in per_sentence for token in tokens]
    return doc_tokens, [len(tokens) for tokens in per_sentence]


@main.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option("--split", default="train", show_default=True)
@click.option("--language", default="en", show_default=True)
@click.option("--budget", default=512, show_default=True, help="Chunk token budget n.")
@click.option("--output", type=click.Path(path_type=Path), required=True)
def chunk(dataset, split, language, budget, output):
    """Split documents into token-budget chunks."""
    ds = _load_split(dataset, split, language)

    def records():
        for judgment, _summary in ds.pairs:
            doc_tokens, counts = _whitespace_views(judgment)
            if not doc_tokens:
                continue
            for piece in chunkalign.chunk_document(doc_tokens, budget, counts, judgment.id):
                start, end = piece.token_span
                yield {
                    "v": SCHEMA_VERSION, "id": judgment.id, "chunk_index": piece.index,
                    "m": piece.m, "n": piece.n,
                    "chunk_text": " ".join(doc_tokens[start:end]),
                }

    digest, count = _write_jsonl(output, records())
    _finish("chunk", {"split": split, "language": language, "budget": budget},
            [dataset], output, digest)
    click.echo(json.dumps({"chunks": count}))


@main.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option("--split", default="train", show_default=True)
@click.option("--language", default="en", show_default=True,
              help="Summary language; documents stay English.")
@click.option("--budget", default=512, show_default=True)
@click.option("--output", type=click.Path(path_type=Path), required=True)
def align(dataset, split, language, budget, output):
    """Chunk documents and pair each chunk with its mapped summary sentences
    (fine-tuning data generation)."""
    backend = _resolve_provider(required_for="align (sentence embeddings)")
    ds = _load_split(dataset, split, language)
    dropped = {"count": 0}

    def records():
        for judgment, summary in ds.pairs:
            doc_tokens, counts = _whitespace_views(judgment)
            if not doc_tokens or not judgment.sentences or not summary.sentences:
                continue
            chunks = chunkalign.chunk_document(doc_tokens, budget, counts, judgment.id)
            mapping = chunkalign.map_summary_sentences(
                judgment.sentences, summary.sentences, backend)
            pairs, diagnostics = chunkalign.build_chunk_pairs(
                chunks, mapping, summary.sentences)
            dropped["count"] += diagnostics.dropped_chunks
            for pair in pairs:
                start, end = pair.chunk.token_span
                yield {
                    "v": SCHEMA_VERSION, "id": judgment.id,
                    "chunk_index": pair.chunk.index, "m": pair.chunk.m,
                    "n": pair.chunk.n,
                    "chunk_text": " ".join(doc_tokens[start:end]),
                    "summary_text": pair.summary_text,
                }

    try:
        digest, count = _write_jsonl(output, records())
    except ToolkitError as exc:
        _fail(str(exc))
    _finish("align", {"split": split, "language": language, "budget": budget},
            [dataset], output, digest)
    click.echo(json.dumps({"pairs": count, "dropped_chunks": dropped["count"]}))


@main.command()
@click.argument("corpus_file", type=click.Path(exists=True, path_type=Path))
@click.option("--languages", default="en", show_default=True,
              help="Language mix preset: en | hi | en+hi.")
@click.option("--quota", default=1000, show_default=True, help="Total sample count.")
@click.option("--seed", default=0, show_default=True)
@click.option("--sequence-length", default=512, show_default=True)
@click.option("--mask-rate", default=0.15, show_default=True)
@click.option("--mean-span", default=3.0, show_default=True)
@click.option("--max-target", default=128, show_default=True)
@click.option("--output", type=click.Path(path_type=Path), required=True)
def corrupt(corpus_file, languages, quota, seed, sequence_length, mask_rate,
            mean_span, max_target, output):
    """Span-corruption denoising samples from a pre-training corpus."""
    try:
        config = corruptor.CorruptionConfig(
            sequence_length=sequence_length, mask_rate=mask_rate,
            mean_span_length=mean_span, max_target_length=max_target, seed=seed)
        mix = corruptor.LanguageMix.parse(languages, quota)
    except ValueError as exc:
        _fail(str(exc))
    samples = corruptor.build_pretrain_corpus(
        lambda: load_pretrain_corpus(corpus_file), config, mix)
    try:
        digest, count = _write_jsonl(output, (
            {"v": SCHEMA_VERSION, "language": lang,
             "input": " ".join(sample.input_tokens),
             "target": " ".join(sample.target_tokens)}
            for lang, sample in samples))
    except ToolkitError as exc:
        _fail(str(exc))
    config_snapshot = {"languages": languages, "quota": quota,
                       "sequence_length": sequence_length, "mask_rate": mask_rate,
                       "mean_span": mean_span, "max_target": max_target}
    _finish("corrupt", config_snapshot, [corpus_file], output, digest, seed=seed)
    click.echo(json.dumps({"samples": count}))


@main.command()
@click.argument("corpus_file", type=click.Path(exists=True, path_type=Path))
@click.option("--languages", default="en", show_default=True)
@click.option("--quota", default=1000, show_default=True)
@click.option("--window", default=128, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--output", type=click.Path(path_type=Path), required=True)
def ntp(corpus_file, languages, quota, window, seed, output):
    """Fixed-window next-token samples from a pre-training corpus."""
    try:
        mix = corruptor.LanguageMix.parse(languages, quota)
        samples = corruptor.build_ntp_corpus(
            lambda: load_pretrain_corpus(corpus_file), window, mix, seed)
        digest, count = _write_jsonl(output, (
            {"v": SCHEMA_VERSION, "language": lang, "tokens": " ".join(sample.tokens)}
            for lang, sample in samples))
    except (ToolkitError, ValueError) as exc:
        _fail(str(exc))
    _finish("ntp", {"languages": languages, "quota": quota, "window": window},
            [corpus_file], output, digest, seed=seed)
    click.echo(json.dumps({"samples": count}))


def _resolve_provider(required_for: str | None = None):
    try:
        backend = provider_mod.from_env()
    except ToolkitError as exc:
        _fail(str(exc))
    if backend is None and required_for is not None:
        _fail(f"{required_for} requires a provider backend; set "
              f"{provider_mod.ENV_VAR} to stub | subprocess:<command> | http:<url>")
    return backend


def _texts_by_id(path: Path, text_keys: tuple[str, ...]) -> dict[str, str]:
    table = {}
    for record in _read_jsonl(path):
        record_id = record.get("id")
        text = next((record[k] for k in text_keys if isinstance(record.get(k), str)), None)
        if record_id is None or text is None:
            _fail(f"{path}: records need 'id' and one of {text_keys}")
        table[str(record_id)] = text
    return table


@main.command()
@click.option("--documents", type=click.Path(exists=True, path_type=Path), required=True,
              help="JSONL of {id, text|doc_text} source documents.")
@click.option("--references", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--system", "system_file", type=click.Path(exists=True, path_type=Path),
              required=True, help="JSONL of {id, text} system summaries.")
@click.option("--language", default="en", show_default=True,
              help="Language of the summaries being scored.")
@click.option("--metrics", default="r2,rL", show_default=True)
@click.option("--output", type=click.Path(path_type=Path), default=None,
              help="Write per-document score reports to this JSONL file.")
def score(documents, references, system_file, language, metrics, output):
    """Score system summaries against references and source documents;
    prints corpus means to stdout."""
    metric_list = [m.strip() for m in metrics.split(",") if m.strip()]
    needs_provider = bool(judge.PROVIDER_METRICS.intersection(metric_list))
    backend = _resolve_provider(
        required_for=f"metrics {sorted(judge.PROVIDER_METRICS.intersection(metric_list))}"
        if needs_provider else None)
    doc_texts = _texts_by_id(documents, ("text", "doc_text"))
    ref_texts = _texts_by_id(references, ("text",))
    reports = []
    for record in _read_jsonl(system_file):
        record_id = str(record.get("id"))
        system_text = record.get("text")
        if system_text is None:
            _fail(f"{system_file}: records need 'id' and 'text'")
        if record_id not in ref_texts:
            _fail(f"no reference for document {record_id}")
        if record_id not in doc_texts:
            _fail(f"no source document for {record_id}")
        try:
            reports.append(judge.score_pair(
                doc_texts[record_id], ref_texts[record_id], system_text, language,
                metric_list, provider=backend, judgment_id=record_id))
        except (ToolkitError, ValueError) as exc:
            _fail(f"scoring document {record_id}: {exc}")
    if not reports:
        _fail(f"{system_file}: no records")
    means = judge.corpus_means(reports)
    if output is not None:
        digest, _ = _write_jsonl(output, (
            {"v": SCHEMA_VERSION, **r.to_dict()} for r in reports))
        _finish("score", {"language": language, "metrics": metrics},
                [documents, references, system_file], output, digest)
    click.echo(json.dumps({"n_documents": len(reports), "means": means},
                          ensure_ascii=False))


@main.command()
@click.argument("file_a", type=click.Path(exists=True, path_type=Path))
@click.argument("file_b", type=click.Path(exists=True, path_type=Path))
@click.option("--test", "test_name", default="wilcoxon", show_default=True,
              type=click.Choice(["wilcoxon", "mannwhitney"]))
@click.option("--alt", default="greater", show_default=True,
              type=click.Choice(list(judge.ALTERNATIVES)))
@click.option("--metric", default="value", show_default=True,
              help="Record key holding the score.")
@click.option("--method", default="auto", show_default=True,
              type=click.Choice(["auto", "exact", "normal"]))
@click.option("--output", type=click.Path(path_type=Path), default=None)
def sigtest(file_a, file_b, test_name, alt, metric, method, output):
    """Paired significance test between two per-document score files."""
    a_records = _read_jsonl(file_a)
    b_records = _read_jsonl(file_b)

    def values(records, path):
        out = []
        for record in records:
            value = record.get(metric)
            if not isinstance(value, (int, float)):
                _fail(f"{path}: records need a numeric {metric!r} field")
            out.append(float(value))
        return out

    a_values = values(a_records, file_a)
    b_values = values(b_records, file_b)
    if (test_name == "wilcoxon"
            and all("id" in r for r in a_records + b_records)):
        b_by_id = {str(r["id"]): float(r[metric]) for r in b_records}
        missing = [str(r["id"]) for r in a_records if str(r["id"]) not in b_by_id]
        if missing:
            _fail(f"no paired record in {file_b} for ids {missing[:5]}")
        b_values = [b_by_id[str(r["id"])] for r in a_records]
    try:
        if test_name == "wilcoxon":
            result = judge.wilcoxon_signed_rank(a_values, b_values, alt, method=method)
        else:
            result = judge.mann_whitney_u(a_values, b_values, alt, method=method)
    except ValueError as exc:
        _fail(str(exc))
    payload = {"v": SCHEMA_VERSION, **result.to_dict()}
    if output is not None:
        text = json.dumps(payload, indent=2) + "\n"
        output.write_text(text, encoding="utf-8")
        _finish("sigtest", {"test": test_name, "alt": alt, "metric": metric,
                            "method": method},
                [file_a, file_b], output,
                hashlib.sha256(text.encode("utf-8")).hexdigest())
    click.echo(json.dumps(payload))


@main.command(name="providers-check")
def providers_check():
    """Handshake with the configured provider backend and run sanity probes."""
    backend = _resolve_provider(required_for="providers-check")
    try:
        info = backend.handshake()
        first = backend.embed_sentences(["the court allowed the appeal"])
        second = backend.embed_sentences(["the court allowed the appeal"])
        deterministic = first == second
        dim = len(first[0]) if first and first[0] else 0
        probs = backend.nli([("the appeal was allowed", "the appeal was allowed")])[0]
        entities = backend.ner("The Supreme Court of India allowed the appeal.", "en")
    except ToolkitError as exc:
        _fail(str(exc))
    finally:
        backend.close()
    report = {
        "v": SCHEMA_VERSION,
        "handshake": info,
        "embedding_dim": dim,
        "deterministic_embeddings": deterministic,
        "identity_entailment": probs.entail,
        "sample_entities": [e.surface for e in entities],
    }
    ok = deterministic and dim > 0 and probs.entail >= max(probs.neutral, probs.contradict)
    report["ok"] = ok
    click.echo(json.dumps(report, ensure_ascii=False))
    if not ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
