import json

import pytest


@pytest.fixture
def write_jsonl(tmp_path):
    """Write records to a JSONL file under tmp_path and return its path."""

    def make(records, name="data.jsonl"):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
        return path

    return make


def dataset_record(record_id, doc_text, summary_en="the court allowed the appeal.",
                   summary_hi="न्यायालय ने अपील स्वीकार की।",
                   split="train"):
    return {
        "id": record_id,
        "split": split,
        "doc_text": doc_text,
        "summary_en": summary_en,
        "summary_hi": summary_hi,
    }
