"""Data model, ingestion, persistence, splits, and length statistics.

A corpus is a set of quandaries (context paragraphs plus a question sentence)
and the reference answers written for them, stored as append-only JSONL with
an in-memory index. One JSONL file may mix quandary and answer records; they
are discriminated by shape (quandaries carry "question"/"context", answers
carry "quandary_id").
"""

from __future__ import annotations

import json
import random
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

PROVENANCES = frozenset({"retrieved", "generated", "handcrafted", "human"})
SPLIT_NAMES = ("train", "validation", "test")

# Sentence terminator followed by whitespace or end of text. Abbreviations are
# deliberately not special-cased; the rule is fixed for reproducibility.
_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])(?:\s+|$)")


class CorpusError(Exception):
    """Base error for corpus operations."""


class DuplicateIdError(CorpusError):
    """A record reuses an id already present in the store."""


class EmptySplitError(CorpusError):
    """Statistics were requested over a split with no quandaries."""


@dataclass(frozen=True)
class Quandary:
    """An ethical dilemma: ordered context paragraphs plus a question sentence."""

    id: str
    context: tuple[str, ...]
    question: str
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "context", tuple(self.context))
        if not self.id:
            raise ValueError("quandary id must be non-empty")
        if not self.context or any(not p.strip() for p in self.context):
            raise ValueError("context must be a non-empty list of non-empty paragraphs")
        if not self.question.strip():
            raise ValueError("question must be non-empty")

    def full_text(self) -> str:
        """Context paragraphs and question joined with single spaces."""
        return " ".join([*self.context, self.question])


@dataclass(frozen=True)
class ReferenceAnswer:
    """An answer written for a quandary, typically by a professional ethicist."""

    quandary_id: str
    text: str
    author: str = "ethicist"

    def __post_init__(self):
        if not self.quandary_id:
            raise ValueError("quandary_id must be non-empty")
        if not self.text.strip():
            raise ValueError("answer text must be non-empty")


@dataclass(frozen=True)
class Principle:
    """A one-sentence ethical principle (rule-of-thumb) with provenance."""

    id: str
    text: str
    provenance: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("principle id must be non-empty")
        if not re.sub(r"\s+", "", self.text):
            raise ValueError("principle text must be non-empty after whitespace normalization")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {sorted(PROVENANCES)}, got {self.provenance!r}")


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    quandary_ids: tuple[str, ...]

    def __post_init__(self):
        if self.name not in SPLIT_NAMES:
            raise ValueError(f"split name must be one of {SPLIT_NAMES}")
        object.__setattr__(self, "quandary_ids", tuple(self.quandary_ids))

    def __len__(self) -> int:
        return len(self.quandary_ids)


@dataclass(frozen=True)
class CorpusStats:
    """Population mean/std of word and sentence counts per quandary and per answer."""

    sample_count: int
    words_per_quandary: tuple[float, float]
    sentences_per_quandary: tuple[float, float]
    words_per_answer: tuple[float, float]
    sentences_per_answer: tuple[float, float]


@dataclass(frozen=True)
class RejectedLine:
    line_no: int
    reason: str


@dataclass
class IngestReport:
    quandary_count: int = 0
    answer_count: int = 0
    rejected: list[RejectedLine] = field(default_factory=list)


class QuandaryStore:
    """Insertion-ordered quandaries with a unique-id index.

    Reads are safe under concurrent access; writes are serialized by a single
    lock (the stores are single-writer by design). When bound to a journal
    path, every accepted record is appended to the file as one JSON line.
    """

    def __init__(self, journal: Path | str | None = None):
        self._items: dict[str, Quandary] = {}
        self._lock = threading.Lock()
        self._journal = Path(journal) if journal else None

    def add(self, quandary: Quandary) -> None:
        with self._lock:
            if quandary.id in self._items:
                raise DuplicateIdError(f"duplicate quandary id {quandary.id!r}")
            self._items[quandary.id] = quandary
            if self._journal:
                with self._journal.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(quandary_to_record(quandary)) + "\n")

    def get(self, quandary_id: str) -> Quandary:
        return self._items[quandary_id]

    def ids(self) -> list[str]:
        return list(self._items)

    def __contains__(self, quandary_id: str) -> bool:
        return quandary_id in self._items

    def __iter__(self) -> Iterator[Quandary]:
        return iter(list(self._items.values()))

    def __len__(self) -> int:
        return len(self._items)


class AnswerStore:
    """Reference answers indexed by quandary id (several answers per id allowed)."""

    def __init__(self, journal: Path | str | None = None):
        self._items: list[ReferenceAnswer] = []
        self._by_quandary: dict[str, list[ReferenceAnswer]] = {}
        self._lock = threading.Lock()
        self._journal = Path(journal) if journal else None

    def add(self, answer: ReferenceAnswer) -> None:
        with self._lock:
            self._items.append(answer)
            self._by_quandary.setdefault(answer.quandary_id, []).append(answer)
            if self._journal:
                with self._journal.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(answer_to_record(answer)) + "\n")

    def for_quandary(self, quandary_id: str) -> list[ReferenceAnswer]:
        return list(self._by_quandary.get(quandary_id, []))

    def __iter__(self) -> Iterator[ReferenceAnswer]:
        return iter(list(self._items))

    def __len__(self) -> int:
        return len(self._items)


def quandary_to_record(q: Quandary) -> dict:
    return {"id": q.id, "context": list(q.context), "question": q.question, "source": q.source}


def answer_to_record(a: ReferenceAnswer) -> dict:
    return {"quandary_id": a.quandary_id, "text": a.text, "author": a.author}


def principle_to_record(p: Principle) -> dict:
    return {"id": p.id, "text": p.text, "provenance": p.provenance}


def _require_fields(obj: dict, fields: Iterable[str]) -> str | None:
    for name in fields:
        if name not in obj:
            return f"missing field {name!r}"
    return None


def ingest(path: Path | str, format: str = "jsonl") -> tuple[QuandaryStore, AnswerStore, IngestReport]:
    """Load quandary and answer records from one JSONL file.

    Malformed lines are skipped and reported; duplicate quandary ids and
    answers whose quandary_id does not resolve are rejected and reported.
    Answers are validated after all quandaries so record order in the file
    does not matter.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported format {format!r}")
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"no such file: {path}")

    quandaries = QuandaryStore()
    answers = AnswerStore()
    report = IngestReport()
    pending_answers: list[tuple[int, dict]] = []

    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                report.rejected.append(RejectedLine(line_no, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(obj, dict):
                report.rejected.append(RejectedLine(line_no, "record is not a JSON object"))
                continue
            if "quandary_id" in obj:
                missing = _require_fields(obj, ("quandary_id", "text"))
                if missing:
                    report.rejected.append(RejectedLine(line_no, missing))
                    continue
                pending_answers.append((line_no, obj))
            else:
                missing = _require_fields(obj, ("id", "context", "question"))
                if missing:
                    report.rejected.append(RejectedLine(line_no, missing))
                    continue
                try:
                    quandary = Quandary(
                        id=str(obj["id"]),
                        context=tuple(obj["context"]),
                        question=str(obj["question"]),
                        source=str(obj.get("source", "")),
                    )
                    quandaries.add(quandary)
                except (ValueError, TypeError, DuplicateIdError) as exc:
                    report.rejected.append(RejectedLine(line_no, str(exc)))
                    continue
                report.quandary_count += 1

    for line_no, obj in pending_answers:
        qid = str(obj["quandary_id"])
        if qid not in quandaries:
            report.rejected.append(RejectedLine(line_no, f"quandary_id {qid!r} does not resolve"))
            continue
        try:
            answers.add(ReferenceAnswer(quandary_id=qid, text=str(obj["text"]), author=str(obj.get("author", ""))))
        except ValueError as exc:
            report.rejected.append(RejectedLine(line_no, str(exc)))
            continue
        report.answer_count += 1

    return quandaries, answers, report


def export(quandaries: QuandaryStore, answers: AnswerStore, path: Path | str) -> None:
    """Write all records back out as JSONL; ingest(export(...)) round-trips exactly."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for q in quandaries:
            fh.write(json.dumps(quandary_to_record(q), ensure_ascii=False) + "\n")
        for a in answers:
            fh.write(json.dumps(answer_to_record(a), ensure_ascii=False) + "\n")


def load_principles(path: Path | str) -> list[Principle]:
    """Load a JSONL file of principle records."""
    principles = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                principles.append(Principle(id=str(obj["id"]), text=str(obj["text"]), provenance=str(obj["provenance"])))
            except (KeyError, ValueError) as exc:
                raise CorpusError(f"{path}:{line_no}: {exc}") from exc
    return principles


def save_principles(principles: Iterable[Principle], path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in principles:
            fh.write(json.dumps(principle_to_record(p), ensure_ascii=False) + "\n")


def split_sentences(text: str) -> list[str]:
    """Split on '.', '!' or '?' followed by whitespace or end of text."""
    return [piece.strip() for piece in _SENTENCE_BOUNDARY.split(text) if piece.strip()]


def count_words(text: str) -> int:
    """A word is a maximal non-whitespace run."""
    return len(text.split())


def compute_stats(split: DatasetSplit, quandaries: QuandaryStore, answers: AnswerStore) -> CorpusStats:
    """Length statistics over one split: population mean/std of words and sentences."""
    if len(split) == 0:
        raise EmptySplitError(f"split {split.name!r} is empty")

    q_words, q_sents, a_words, a_sents = [], [], [], []
    for qid in split.quandary_ids:
        text = quandaries.get(qid).full_text()
        q_words.append(count_words(text))
        q_sents.append(len(split_sentences(text)))
        for answer in answers.for_quandary(qid):
            a_words.append(count_words(answer.text))
            a_sents.append(len(split_sentences(answer.text)))

    def mean_std(values: list[int]) -> tuple[float, float]:
        if not values:
            return (0.0, 0.0)
        arr = np.asarray(values, dtype=float)
        return (float(arr.mean()), float(arr.std()))

    return CorpusStats(
        sample_count=len(split),
        words_per_quandary=mean_std(q_words),
        sentences_per_quandary=mean_std(q_sents),
        words_per_answer=mean_std(a_words),
        sentences_per_answer=mean_std(a_sents),
    )


def make_splits(
    ids: Iterable[str], seed: int, test_size: int, validation_size: int = 0
) -> tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    """Deterministic (seeded) shuffle split into train/validation/test.

    The test split gets exactly test_size ids; validation_size is optional
    and defaults to 0; the remainder is train.
    """
    id_list = list(ids)
    if len(set(id_list)) != len(id_list):
        raise ValueError("ids must be unique")
    if test_size > len(id_list):
        raise ValueError(f"test_size {test_size} exceeds id count {len(id_list)}")
    if test_size + validation_size > len(id_list):
        raise ValueError("test_size + validation_size exceeds id count")

    shuffled = list(id_list)
    random.Random(seed).shuffle(shuffled)
    test = shuffled[:test_size]
    validation = shuffled[test_size : test_size + validation_size]
    train = shuffled[test_size + validation_size :]
    return (
        DatasetSplit("train", tuple(train)),
        DatasetSplit("validation", tuple(validation)),
        DatasetSplit("test", tuple(test)),
    )
