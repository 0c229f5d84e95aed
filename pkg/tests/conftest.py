from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from sqlforge import metrics
from sqlforge.schema_catalog import DatabaseSchema, corpus_db_path, introspect_database

from corpus_builder import build_corpus, make_sample_records


@dataclass(frozen=True)
class FixtureCorpus:
    root: Path

    @property
    def variant_root(self) -> Path:
        return self.root / "variants"

    @property
    def samples_path(self) -> Path:
        return self.root / "samples.jsonl"

    def db_path(self, db_id: str) -> Path:
        return corpus_db_path(self.root, db_id)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> FixtureCorpus:
    root = tmp_path_factory.mktemp("corpus")
    build_corpus(root)
    return FixtureCorpus(root=root)


@pytest.fixture(scope="session")
def sample_records() -> list[dict]:
    return make_sample_records()


@pytest.fixture(scope="session")
def samples(corpus, sample_records) -> list[metrics.Sample]:
    return metrics.samples_from_records(sample_records, corpus.root)


@pytest.fixture(scope="session")
def schemas(corpus) -> dict[str, DatabaseSchema]:
    out = {}
    for db_dir in sorted((corpus.root / "database").iterdir()):
        db_id = db_dir.name
        out[db_id] = introspect_database(corpus.db_path(db_id), db_id)
    return out
