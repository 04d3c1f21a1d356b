#!/usr/bin/env python3
"""Lexical retrieval: build the BM25 index over a rule-of-thumb pool and pull
the top candidates for a quandary."""

from pathlib import Path

from quandary.corpus import Quandary, load_principles
from quandary.retrieval import build_index, retrieve_top_k

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

principles = load_principles(FIXTURES / "principles_100.jsonl")
index = build_index(principles)
print(f"indexed {index.doc_count} principles, average length {index.avg_doc_length:.1f} tokens")

quandary = Quandary(
    id="demo",
    context=(
        "My manager asked me to lie to a client about delivery dates.",
        "The client has trusted me personally for years.",
    ),
    question="Should I deceive the client to protect my employer?",
    source="demo",
)

print("\ntop 10 by BM25 (higher is better):")
for ranked in retrieve_top_k(index, quandary, k=10):
    print(f"  {ranked.score:6.3f}  {ranked.principle.id}  {ranked.principle.text}")
