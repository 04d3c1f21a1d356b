#!/usr/bin/env python3
"""Blinded A/B analysis over the shipped 130-record fixture: success rates
and win-tie-loss per criterion, the conditional rate, and the metric-score
stratification with significance tests."""

import json
from pathlib import Path

from quandary.analysis import (
    CRITERIA,
    build_stratified_report,
    conditional_rate,
    format_criteria_table,
    format_stratified_table,
    load_annotations,
    load_blinding,
    success_rate,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

records = load_annotations(FIXTURES / "annotations_130.jsonl")
blinding = load_blinding(FIXTURES / "blinding_130.json")
scores = {k: float(v) for k, v in json.loads((FIXTURES / "scores_bertscore_130.json").read_text()).items()}

reports = [success_rate(records, c, "pipeline", blinding) for c in CRITERIA]
print(format_criteria_table(reports, system="pipeline"))

coh_to_just = conditional_rate(records, "coherence", "justification", "pipeline", blinding)
print(f"P(justified | coherent) = {coh_to_just:.2f}%\n")

stratified = build_stratified_report("bertscore", scores, records, "pipeline", blinding)
print(format_stratified_table([stratified]))
for row in stratified.criteria:
    verdict = "significant" if row.p_value < 0.05 else "not significant"
    print(f"  {row.criterion:>17}: low {row.rate_low:5.2f}% vs high {row.rate_high:5.2f}%  "
          f"(two-sided p = {row.p_value:.4f}, {verdict} at 0.05)")
