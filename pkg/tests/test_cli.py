import json

import pytest
from click.testing import CliRunner

from conftest import dataset_record
from lexsumkit.cli import main
from lexsumkit.provider import ENV_VAR


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def dataset_path(write_jsonl):
    return write_jsonl([
        dataset_record("d1", "The court heard the appeal. The appeal was allowed. Costs follow.",
                       summary_en="The appeal was allowed. Costs follow."),
        dataset_record("d2", "The petition was dismissed. No costs were ordered.",
                       summary_en="The petition was dismissed."),
    ], name="dataset.jsonl")


@pytest.fixture
def corpus_path(write_jsonl):
    records = []
    for language in ("en", "hi"):
        for i in range(3):
            words = " ".join(f"{language}doc{i}tok{j}" for j in range(120))
            records.append({"id": f"{language}-{i}", "text": words, "language": language})
    return write_jsonl(records, name="corpus.jsonl")


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


class TestStats:
    def test_report_fields(self, runner, dataset_path):
        result = runner.invoke(main, ["stats", str(dataset_path), "--split", "train"])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["n_pairs"] == 2
        assert report["avg_coverage"] > 0.5

    def test_output_and_manifest(self, runner, dataset_path, tmp_path):
        out = tmp_path / "stats.json"
        result = runner.invoke(main, ["stats", str(dataset_path), "--output", str(out)])
        assert result.exit_code == 0, result.output
        manifest = json.loads((tmp_path / "stats.json.manifest.json").read_text())
        assert manifest["subcommand"] == "stats"
        assert str(dataset_path) in manifest["inputs"]

    def test_jobs_flag_matches_serial(self, runner, dataset_path):
        serial = runner.invoke(main, ["stats", str(dataset_path)])
        parallel = runner.invoke(main, ["stats", str(dataset_path), "--jobs", "2"])
        assert json.loads(serial.output) == json.loads(parallel.output)

    def test_missing_split_fails(self, runner, dataset_path):
        result = runner.invoke(main, ["stats", str(dataset_path), "--split", "test"])
        assert result.exit_code == 2
        assert "no records" in result.output


class TestOracle:
    def test_labels_schema(self, runner, dataset_path, tmp_path):
        out = tmp_path / "labels.jsonl"
        result = runner.invoke(main, ["oracle", str(dataset_path), "--output", str(out)])
        assert result.exit_code == 0, result.output
        records = read_jsonl(out)
        assert [r["id"] for r in records] == ["d1", "d2"]
        first = records[0]
        assert set(first) >= {"id", "labels", "selected_order", "final_rouge2_f1", "v"}
        assert all(label in (0, 1) for label in first["labels"])
        assert first["final_rouge2_f1"] > 0

    def test_jobs_flag_matches_serial(self, runner, dataset_path, tmp_path):
        out_a = tmp_path / "a.jsonl"
        out_b = tmp_path / "b.jsonl"
        runner.invoke(main, ["oracle", str(dataset_path), "--output", str(out_a)])
        runner.invoke(main, ["oracle", str(dataset_path), "--output", str(out_b),
                             "--jobs", "2"])
        assert out_a.read_text() == out_b.read_text()

    def test_degenerate_reference_fails_without_flag(self, runner, write_jsonl, tmp_path):
        path = write_jsonl([dataset_record("bad", "Some document.", summary_en="word")],
                           name="degenerate.jsonl")
        out = tmp_path / "labels.jsonl"
        result = runner.invoke(main, ["oracle", str(path), "--output", str(out)])
        assert result.exit_code == 2
        assert "too short" in result.output
        result = runner.invoke(main, ["oracle", str(path), "--output", str(out),
                                      "--skip-degenerate"])
        assert result.exit_code == 0


class TestChunkAlign:
    def test_chunks_cover_document(self, runner, dataset_path, tmp_path):
        out = tmp_path / "chunks.jsonl"
        result = runner.invoke(main, ["chunk", str(dataset_path), "--budget", "4",
                                      "--output", str(out)])
        assert result.exit_code == 0, result.output
        records = [r for r in read_jsonl(out) if r["id"] == "d1"]
        assert all(r["m"] == len(records) for r in records)
        assert [r["chunk_index"] for r in records] == list(range(len(records)))

    def test_align_requires_provider(self, runner, dataset_path, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_VAR, raising=False)
        result = runner.invoke(main, ["align", str(dataset_path),
                                      "--output", str(tmp_path / "pairs.jsonl")])
        assert result.exit_code == 2
        assert ENV_VAR in result.output

    def test_align_with_stub(self, runner, dataset_path, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_VAR, "stub")
        out = tmp_path / "pairs.jsonl"
        result = runner.invoke(main, ["align", str(dataset_path), "--budget", "6",
                                      "--output", str(out)])
        assert result.exit_code == 0, result.output
        records = read_jsonl(out)
        assert records
        assert set(records[0]) >= {"id", "chunk_index", "m", "n", "chunk_text",
                                   "summary_text", "v"}
        # Every summary sentence lands in exactly one pair per document.
        d1_text = " ".join(r["summary_text"] for r in records if r["id"] == "d1")
        assert "allowed" in d1_text and "Costs" in d1_text


class TestCorrupt:
    def test_deterministic_manifests(self, runner, corpus_path, tmp_path):
        args = ["corrupt", str(corpus_path), "--languages", "en", "--quota", "4",
                "--seed", "7", "--sequence-length", "32", "--max-target", "32"]
        out_a, out_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert runner.invoke(main, args + ["--output", str(out_a)]).exit_code == 0
        assert runner.invoke(main, args + ["--output", str(out_b)]).exit_code == 0
        digest_a = json.loads((tmp_path / "a.jsonl.manifest.json").read_text())["outputs"]
        digest_b = json.loads((tmp_path / "b.jsonl.manifest.json").read_text())["outputs"]
        assert list(digest_a.values()) == list(digest_b.values())
        assert out_a.read_text() == out_b.read_text()

    def test_seed_changes_output(self, runner, corpus_path, tmp_path):
        base = ["corrupt", str(corpus_path), "--languages", "en", "--quota", "4",
                "--sequence-length", "32", "--max-target", "32"]
        out_a, out_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        runner.invoke(main, base + ["--seed", "1", "--output", str(out_a)])
        runner.invoke(main, base + ["--seed", "2", "--output", str(out_b)])
        assert out_a.read_text() != out_b.read_text()

    def test_records_round_trip(self, runner, corpus_path, tmp_path):
        out = tmp_path / "samples.jsonl"
        result = runner.invoke(main, [
            "corrupt", str(corpus_path), "--languages", "en+hi", "--quota", "6",
            "--seed", "3", "--sequence-length", "32", "--max-target", "32",
            "--output", str(out)])
        assert result.exit_code == 0, result.output
        records = read_jsonl(out)
        assert len(records) == 6
        langs = [r["language"] for r in records]
        assert langs.count("en") == 3 and langs.count("hi") == 3
        assert all("<extra_id_0>" in r["input"] for r in records)

    def test_pool_exhaustion_reports_shortfall(self, runner, corpus_path, tmp_path):
        result = runner.invoke(main, [
            "corrupt", str(corpus_path), "--languages", "en", "--quota", "100",
            "--sequence-length", "64", "--seed", "0",
            "--output", str(tmp_path / "x.jsonl")])
        assert result.exit_code == 2
        assert "shortfall" in result.output


class TestNtp:
    def test_windows(self, runner, corpus_path, tmp_path):
        out = tmp_path / "ntp.jsonl"
        result = runner.invoke(main, ["ntp", str(corpus_path), "--languages", "en",
                                      "--quota", "4", "--window", "16", "--seed", "5",
                                      "--output", str(out)])
        assert result.exit_code == 0, result.output
        records = read_jsonl(out)
        assert len(records) == 4
        assert all(len(r["tokens"].split()) == 16 for r in records)


class TestScore:
    def make_files(self, write_jsonl, identical=True):
        docs = write_jsonl([
            {"id": "1", "text": "The Supreme Court allowed the appeal. Costs follow."}],
            name="docs.jsonl")
        refs = write_jsonl([
            {"id": "1", "text": "The Supreme Court allowed the appeal."}],
            name="refs.jsonl")
        system_text = ("The Supreme Court allowed the appeal." if identical
                       else "Something completely different entirely.")
        system = write_jsonl([{"id": "1", "text": system_text}], name="system.jsonl")
        return docs, refs, system

    def test_rouge_only_without_provider(self, runner, write_jsonl, monkeypatch):
        monkeypatch.delenv(ENV_VAR, raising=False)
        docs, refs, system = self.make_files(write_jsonl)
        result = runner.invoke(main, ["score", "--documents", str(docs),
                                      "--references", str(refs), "--system", str(system)])
        assert result.exit_code == 0, result.output
        means = json.loads(result.output)["means"]
        assert means["r2"] == pytest.approx(100.0)

    def test_provider_metric_without_backend_fails(self, runner, write_jsonl, monkeypatch):
        monkeypatch.delenv(ENV_VAR, raising=False)
        docs, refs, system = self.make_files(write_jsonl)
        result = runner.invoke(main, ["score", "--documents", str(docs),
                                      "--references", str(refs), "--system", str(system),
                                      "--metrics", "r2,bertscore"])
        assert result.exit_code == 2
        assert "bertscore" in result.output and ENV_VAR in result.output

    def test_full_metrics_with_stub(self, runner, write_jsonl, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_VAR, "stub")
        docs, refs, system = self.make_files(write_jsonl)
        out = tmp_path / "reports.jsonl"
        result = runner.invoke(main, [
            "score", "--documents", str(docs), "--references", str(refs),
            "--system", str(system), "--metrics", "r2,rL,bertscore,neprec,summac",
            "--output", str(out)])
        assert result.exit_code == 0, result.output
        (report,) = read_jsonl(out)
        assert report["bertscore"] == pytest.approx(100.0)
        assert report["neprec"] == 100.0
        assert report["summac"] == pytest.approx(100.0)


class TestSigtest:
    def test_wilcoxon_fixture(self, runner, write_jsonl):
        a = write_jsonl([{"id": str(i), "value": v} for i, v in enumerate([2, 3, 4, 5, 6])],
                        name="a.jsonl")
        b = write_jsonl([{"id": str(i), "value": v} for i, v in enumerate([1, 2, 3, 4, 5])],
                        name="b.jsonl")
        result = runner.invoke(main, ["sigtest", str(a), str(b), "--test", "wilcoxon",
                                      "--alt", "greater"])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["p_value"] == 0.03125
        assert report["statistic"] == 15.0
        assert report["significant_at_99"] is False

    def test_mannwhitney(self, runner, write_jsonl):
        a = write_jsonl([{"value": 1.0}, {"value": 2.0}], name="a.jsonl")
        b = write_jsonl([{"value": 3.0}, {"value": 4.0}], name="b.jsonl")
        result = runner.invoke(main, ["sigtest", str(a), str(b), "--test", "mannwhitney",
                                      "--alt", "less"])
        report = json.loads(result.output)
        assert report["p_value"] == pytest.approx(1 / 6)

    def test_pairing_by_id(self, runner, write_jsonl):
        a = write_jsonl([{"id": "x", "value": 2.0}, {"id": "y", "value": 3.0},
                         {"id": "z", "value": 4.0}, {"id": "w", "value": 5.0},
                         {"id": "v", "value": 6.0}], name="a.jsonl")
        # Same pairs, shuffled order in b.
        b = write_jsonl([{"id": "v", "value": 5.0}, {"id": "w", "value": 4.0},
                         {"id": "x", "value": 1.0}, {"id": "y", "value": 2.0},
                         {"id": "z", "value": 3.0}], name="b.jsonl")
        result = runner.invoke(main, ["sigtest", str(a), str(b), "--alt", "greater"])
        report = json.loads(result.output)
        assert report["p_value"] == 0.03125

    def test_degenerate_pairing_fails(self, runner, write_jsonl):
        a = write_jsonl([{"value": 1.0}] * 5, name="a.jsonl")
        result = runner.invoke(main, ["sigtest", str(a), str(a)])
        assert result.exit_code == 2
        assert "degenerate" in result.output


class TestProvidersCheck:
    def test_with_stub(self, runner, monkeypatch):
        monkeypatch.setenv(ENV_VAR, "stub")
        result = runner.invoke(main, ["providers-check"])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["ok"] is True
        assert report["deterministic_embeddings"] is True
        assert report["embedding_dim"] == 64

    def test_without_backend(self, runner, monkeypatch):
        monkeypatch.delenv(ENV_VAR, raising=False)
        result = runner.invoke(main, ["providers-check"])
        assert result.exit_code == 2

    def test_unknown_flag_rejected(self, runner):
        result = runner.invoke(main, ["stats", "--bogus-flag"])
        assert result.exit_code != 0
