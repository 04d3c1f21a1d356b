from __future__ import annotations

import json
from pathlib import Path

import pytest

from quandary.corpus import Principle, Quandary

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def make_quandary(qid: str = "q1", context=("Some situation happened to me.",), question: str = "What should I do?"):
    return Quandary(id=qid, context=tuple(context), question=question, source="test")


def make_principle(pid: str, text: str, provenance: str = "retrieved") -> Principle:
    return Principle(id=pid, text=text, provenance=provenance)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def jsonl_writer(tmp_path):
    def write(name: str, records: list[dict]) -> Path:
        path = tmp_path / name
        with path.open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
        return path

    return write
