#!/usr/bin/env python3
"""Corpus handling: ingest a JSONL file of quandaries and reference answers,
look at length statistics, and cut deterministic splits."""

from pathlib import Path

from quandary.corpus import compute_stats, ingest, make_splits

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# One file holds both record kinds; lines are discriminated by shape.
quandaries, answers, report = ingest(FIXTURES / "corpus_pipeline.jsonl")
print(f"ingested {len(quandaries)} quandaries and {len(answers)} answers "
      f"({len(report.rejected)} rejected lines)")

first = next(iter(quandaries))
print("\nfirst quandary:")
for paragraph in first.context:
    print("  ", paragraph)
print("  Q:", first.question)

# Splits are a seeded shuffle: same seed, same split, any platform.
train, validation, test = make_splits(quandaries.ids(), seed=13, test_size=4, validation_size=2)
print(f"\nsplits: train={len(train)} validation={len(validation)} test={len(test)}")
print("test ids:", list(test.quandary_ids))

stats = compute_stats(train, quandaries, answers)
print("\ntrain-split statistics (population mean +/- std):")
print(f"  words/quandary:     {stats.words_per_quandary[0]:6.1f} +/- {stats.words_per_quandary[1]:.1f}")
print(f"  sentences/quandary: {stats.sentences_per_quandary[0]:6.1f} +/- {stats.sentences_per_quandary[1]:.1f}")
print(f"  words/answer:       {stats.words_per_answer[0]:6.1f} +/- {stats.words_per_answer[1]:.1f}")
print(f"  sentences/answer:   {stats.sentences_per_answer[0]:6.1f} +/- {stats.sentences_per_answer[1]:.1f}")
