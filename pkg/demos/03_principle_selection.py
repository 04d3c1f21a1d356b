#!/usr/bin/env python3
"""Stage 1, the principle provider: merge candidates from three sources
(retrieved, generated, hand-crafted), score them, filter by threshold,
deduplicate, and select up to three -- automatically or via a human."""

from pathlib import Path

from quandary.corpus import Quandary, load_principles
from quandary.llm import BackendConfig, CompletionClient
from quandary.retrieval import build_index
from quandary.scoring import (
    build_candidate_pool,
    confirm_selection,
    default_scorer_config,
    score_pool,
    select_principles,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
HANDCRAFTED = Path(__file__).resolve().parent.parent / "src/quandary/data/principles/handcrafted.jsonl"

quandary = Quandary(
    id="demo",
    context=("A coworker keeps taking credit for analysis I produce.",),
    question="Should I report him or confront him directly?",
    source="demo",
)

index = build_index(load_principles(FIXTURES / "principles_100.jsonl"))
client = CompletionClient(BackendConfig(kind="mock"))  # deterministic offline backend
pool = build_candidate_pool(
    quandary,
    index=index,
    client=client,
    handcrafted=load_principles(HANDCRAFTED),
    top_k=10,
    seed=0,
)
print(f"pooled {len(pool)} candidates:",
      {p.provenance: sum(1 for q in pool if q.provenance == p.provenance) for p in pool})

config = default_scorer_config("lexical")  # cosine similarity, higher is better
scored, dropped = score_pool(quandary, pool, config)

print(f"\nautomatic selection (threshold {config.threshold}, max 3):")
selection = select_principles(quandary, scored, config, mode="automatic")
for p in selection.principles:
    print(f"  [{p.provenance}] {p.text}")

# The same pool can instead be parked for a human: candidates are ranked and
# held under a token until a reviewer confirms (or adds free text).
pending = select_principles(quandary, scored, config, mode="human")
print(f"\nhuman review: {len(pending.candidates)} candidates held under token {pending.token}")
human = confirm_selection(
    pending,
    [pending.candidates[0].principle.id, {"text": "Credit belongs to the person who did the work."}],
    annotator="demo-reviewer",
)
for p in human.principles:
    print(f"  [{p.provenance}] {p.text}")
