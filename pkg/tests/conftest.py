"""Shared fixtures: the shipped 12-table corpus and tmp corpus builders."""

import csv
from pathlib import Path

import pytest

from tablescout.corpus import Corpus, load_corpus
from tablescout.encoders import LocalHashEncoder
from tablescout.headerindex import build_header_index
from tablescout.retrieval import RetrievalConfig, RetrievalContext

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS12_DIR = FIXTURES / "corpus12"
QUESTIONS_PATH = FIXTURES / "questions.jsonl"
TRUTH_PATH = FIXTURES / "truth.jsonl"


def write_csv(path: Path, headers, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        writer.writerows(rows)


def make_corpus(root: Path, tables) -> Corpus:
    """Build a corpus from {table_id: (headers, rows)} under ``root``."""
    for table_id, (headers, rows) in tables.items():
        write_csv(root / f"{table_id}.csv", headers, rows)
    return load_corpus(root)


@pytest.fixture(scope="session")
def corpus12() -> Corpus:
    return load_corpus(CORPUS12_DIR)


@pytest.fixture(scope="session")
def encoder() -> LocalHashEncoder:
    return LocalHashEncoder(256)


@pytest.fixture(scope="session")
def ctx12(corpus12, encoder) -> RetrievalContext:
    index = build_header_index(corpus12, encoder)
    return RetrievalContext(corpus12, index, encoder, RetrievalConfig(k=5, eta=0.7, tau=0.6))
