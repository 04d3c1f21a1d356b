#!/usr/bin/env python3
"""Reference-based metrics: ROUGE-1/2/L, corpus BLEU with its worked
two-pair fixture, and greedy-matching BERTScore over embedding providers."""

import json
import math
from pathlib import Path

from quandary.metrics import OneHotProvider, TableProvider, bertscore, corpus_bleu, rouge_l, rouge_n

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

cand = "you should tell the client the truth about the delay"
ref = "tell the client the truth even when the truth costs you"
for n in (1, 2):
    s = rouge_n(cand, ref, n)
    print(f"ROUGE-{n}: P={s.precision:.3f} R={s.recall:.3f} F1={s.f1:.3f}")
s = rouge_l(cand, ref)
print(f"ROUGE-L: P={s.precision:.3f} R={s.recall:.3f} F1={s.f1:.3f}")

# The shipped two-pair BLEU fixture has a fully hand-derived value:
# pooled precisions 10/11, 7/9, 4/7, 2/5 and brevity penalty exp(1 - 13/11).
pairs = [json.loads(l) for l in (FIXTURES / "bleu_pairs.jsonl").read_text().splitlines()]
got = corpus_bleu([p["candidate"] for p in pairs], [p["reference"] for p in pairs])
expected = 100.0 * math.exp(1 - 13 / 11) * (10 / 11 * 7 / 9 * 4 / 7 * 2 / 5) ** 0.25
print(f"\ncorpus BLEU on the worked fixture: {got:.6f} (hand-derived {expected:.6f})")

# BERTScore degrades gracefully to token identity under one-hot embeddings...
print("\nBERTScore, one-hot:", round(bertscore(cand, ref, OneHotProvider()).f1, 3))

# ...and uses real geometry when the provider supplies it.
table = {
    "good": [1.0, 0.0, 0.0],
    "kind": [0.6, 0.8, 0.0],
    "fair": [0.6, 0.0, 0.8],
    "act": [0.0, 0.0, 1.0],
}
s = bertscore("good kind act", "good fair act", TableProvider(table))
print(f"BERTScore, hand table: P={s.precision:.4f} R={s.recall:.4f} F1={s.f1:.4f} (= 13/15, 14/15, 364/405)")
