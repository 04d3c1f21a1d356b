#!/usr/bin/env python3
"""Stage 2, principle-guided generation: a two-exemplar prompt produces the
first answer segment; each further principle extends the full transcript so
the backend conditions on everything before it. The concatenated answer is
wrapped in the precautionary disclaimer."""

from quandary.corpus import Principle, Quandary
from quandary.generation import generate_answer
from quandary.llm import BackendConfig, CompletionClient
from quandary.scoring import PrincipleSelection

quandary = Quandary(
    id="demo",
    context=(
        "Our book club voted to read an author whose public behavior I find repugnant.",
        "Buying the book funds that behavior, but skipping punishes my friends.",
    ),
    question="Is it wrong to buy and read the book anyway?",
    source="demo",
)

selection = PrincipleSelection(
    quandary_id="demo",
    principles=(
        Principle(id="d1", text="Reading a work is not an endorsement of its author.", provenance="human"),
        Principle(id="d2", text="Money given knowingly supports what it funds.", provenance="human"),
    ),
    mode="human",
    selected_by="demo-reviewer",
)

client = CompletionClient(BackendConfig(kind="mock"))
answer = generate_answer(quandary, selection, client, seed=42)

print(f"{len(answer.segments)} segments; step-2 prompt contains step-1 prompt+answer as a prefix:",
      answer.trace[1].prompt.startswith(answer.trace[0].prompt + answer.trace[0].raw_response))

print("\n--- step-1 prompt (tail) ---")
print("...", answer.trace[0].prompt[-260:])

print("\n--- final answer, disclaimer-wrapped ---")
print(answer.disclaimer_wrapped)
