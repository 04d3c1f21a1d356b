"""Lexical retrieval of candidate principles over a BM25 inverted index.

The index is immutable after construction: rebuilding produces a new value,
so any number of readers may share one safely. Scoring is BM25 with k1=1.2,
b=0.75 and Robertson IDF (0.5 smoothing) floored at zero, ties broken by
ascending principle id.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import Principle, Quandary

BM25_K1 = 1.2
BM25_B = 0.75

INDEX_FORMAT = "quandary-bm25-index"
INDEX_VERSION = 1

_TOKEN = re.compile(r"[a-z0-9]+")

POLARITIES = ("higher_better", "lower_better")


class RetrievalError(Exception):
    """Base error for index construction and querying."""


class EmptyIndexError(RetrievalError):
    """An index was requested over zero principles."""


def normalize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; no stemming, empties dropped."""
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class ScoredPrinciple:
    """A principle with the score one scorer assigned it.

    polarity declares which direction is better in the producing scorer's own
    space: "higher_better" for similarities, "lower_better" for perplexities.
    """

    principle: Principle
    score: float
    scorer_id: str
    polarity: str

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score!r}")
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}")


class InvertedIndex:
    """Term -> (principle_id, term frequency) postings with BM25 statistics."""

    def __init__(self, principles: list[Principle]):
        if not principles:
            raise EmptyIndexError("cannot build an index over zero principles")
        seen: dict[str, Principle] = {}
        for p in principles:
            if p.id in seen:
                raise RetrievalError(f"duplicate principle id {p.id!r}")
            seen[p.id] = p
        self.principles: dict[str, Principle] = seen
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self.doc_length: dict[str, int] = {}
        for p in principles:
            tokens = normalize(p.text)
            self.doc_length[p.id] = len(tokens)
            counts: dict[str, int] = {}
            for tok in tokens:
                counts[tok] = counts.get(tok, 0) + 1
            for tok, tf in counts.items():
                self.postings.setdefault(tok, []).append((p.id, tf))
        self.doc_count = len(principles)
        self.avg_doc_length = sum(self.doc_length.values()) / self.doc_count

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, []))

    def idf(self, term: str) -> float:
        # Robertson IDF with 0.5 smoothing, floored at 0 so rare-term scores
        # stay non-negative.
        df = self.document_frequency(term)
        if df == 0:
            return 0.0
        return max(0.0, math.log((self.doc_count - df + 0.5) / (df + 0.5)))

    def score(self, query_tokens: list[str], principle_id: str) -> float:
        """BM25 score of one document against a tokenized query."""
        dl = self.doc_length[principle_id]
        norm = BM25_K1 * (1 - BM25_B + BM25_B * dl / self.avg_doc_length)
        tf_by_term: dict[str, int] = {}
        for term in set(query_tokens):
            for doc_id, tf in self.postings.get(term, []):
                if doc_id == principle_id:
                    tf_by_term[term] = tf
                    break
        total = 0.0
        for term in query_tokens:
            tf = tf_by_term.get(term)
            if tf is None:
                continue
            total += self.idf(term) * (tf * (BM25_K1 + 1)) / (tf + norm)
        return total


def build_index(principles: list[Principle]) -> InvertedIndex:
    return InvertedIndex(list(principles))


def retrieve_top_k(index: InvertedIndex, quandary: Quandary, k: int = 10) -> list[ScoredPrinciple]:
    """Rank every indexed principle against context+question, return the top k.

    The result is a prefix of the full exhaustive ranking: score descending,
    ties by ascending principle id; |result| = min(k, corpus size).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query = normalize(quandary.full_text())
    ranked = sorted(
        index.principles,
        key=lambda pid: (-index.score(query, pid), pid),
    )
    return [
        ScoredPrinciple(
            principle=index.principles[pid],
            score=index.score(query, pid),
            scorer_id="bm25",
            polarity="higher_better",
        )
        for pid in ranked[: min(k, index.doc_count)]
    ]


def save_index(index: InvertedIndex, path: Path | str) -> None:
    """Persist as JSONL: a versioned header line, then one principle per line.

    Postings and statistics are derived data and are recomputed on load; the
    reconstruction is deterministic, so save/load round-trips to an identical
    index.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {"format": INDEX_FORMAT, "version": INDEX_VERSION, "doc_count": index.doc_count}
        fh.write(json.dumps(header) + "\n")
        for p in index.principles.values():
            fh.write(json.dumps({"id": p.id, "text": p.text, "provenance": p.provenance}, ensure_ascii=False) + "\n")


def load_index(path: Path | str) -> InvertedIndex:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != INDEX_FORMAT:
            raise RetrievalError(f"not an index file: {path}")
        if header.get("version") != INDEX_VERSION:
            raise RetrievalError(f"unsupported index version {header.get('version')!r}")
        principles = [
            Principle(id=obj["id"], text=obj["text"], provenance=obj["provenance"])
            for obj in (json.loads(line) for line in fh if line.strip())
        ]
    index = build_index(principles)
    if index.doc_count != header.get("doc_count"):
        raise RetrievalError("index file is truncated: document count mismatch")
    return index
