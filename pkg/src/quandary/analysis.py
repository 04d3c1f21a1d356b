"""Blinded A/B annotation bookkeeping and the downstream statistics: success
rates and win-tie-loss, mean +/- 0.5 sigma stratification, per-stratum and
conditional criterion rates, and a pooled two-proportion z-test.

All analyses are pure functions over immutable record snapshots. The blinding
map (pair id -> which system hides behind each label) lives server-side only
and is the one input that de-blinds choices.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

CRITERIA = ("multi_perspective", "coherence", "justification")
CHOICES = ("A", "B", "Both", "None")

# Served to annotators verbatim, one per criterion.
CRITERION_QUESTIONS = {
    "multi_perspective": "Which of the answers is addressing the ethical dilemma from multiple perspectives?",
    "coherence": "Which answer is more coherent?",
    "justification": "Which answer includes sound reasoning for its stances?",
}


class AnalysisError(Exception):
    """Invalid analysis input (unresolvable pairs, duplicate records, empty sets)."""


@dataclass(frozen=True)
class BlindedPair:
    pair_id: str
    quandary_id: str
    label_A: str
    label_B: str
    seed: int

    def __post_init__(self):
        if self.label_A == self.label_B:
            raise ValueError("a blinded pair must hide two distinct systems")


@dataclass(frozen=True)
class AnnotationRecord:
    pair_id: str
    annotator: str
    criterion: str
    choice: str

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.choice not in CHOICES:
            raise ValueError(f"choice must be one of {CHOICES}, got {self.choice!r}")


@dataclass(frozen=True)
class CriterionReport:
    criterion: str
    total: int
    breakdown: dict  # {"system_only", "reference_only", "both", "none"} -> count
    success_rate_system: float  # percentage
    success_rate_reference: float
    win_tie_loss: tuple[float, float, float]  # percentages


@dataclass(frozen=True)
class StratifiedCriterion:
    criterion: str
    rate_low: float
    rate_high: float
    p_value: float


@dataclass(frozen=True)
class StratifiedReport:
    metric: str
    mean: float
    std: float
    factor: float
    low_ids: frozenset
    high_ids: frozenset
    criteria: tuple[StratifiedCriterion, ...]


def assign_blinding(pair_id: str, systems: tuple[str, str], seed: int, quandary_id: str = "") -> BlindedPair:
    """Deterministic unbiased A/B assignment from sha256(pair_id, seed).

    The same (pair_id, seed) always produces the same assignment on every
    platform; the mapping itself must be stored server-side only.
    """
    s1, s2 = systems
    if s1 == s2:
        raise ValueError("cannot blind a pair of identical systems")
    digest = hashlib.sha256(f"{pair_id}\x1f{seed}".encode("utf-8")).digest()
    if digest[0] & 1 == 0:
        label_a, label_b = s1, s2
    else:
        label_a, label_b = s2, s1
    return BlindedPair(
        pair_id=pair_id, quandary_id=quandary_id or pair_id, label_A=label_a, label_B=label_b, seed=seed
    )


def _aggregate_choices(records: Sequence[AnnotationRecord], criterion: str) -> dict[str, str]:
    """Majority choice per pair for one criterion; ties across annotators
    resolve to None. Both and None stay distinct outcomes throughout."""
    votes: dict[str, dict[str, int]] = {}
    seen: set[tuple[str, str, str]] = set()
    for rec in records:
        if rec.criterion != criterion:
            continue
        key = (rec.pair_id, rec.annotator, rec.criterion)
        if key in seen:
            raise AnalysisError(f"duplicate annotation record {key}")
        seen.add(key)
        votes.setdefault(rec.pair_id, {}).setdefault(rec.choice, 0)
        votes[rec.pair_id][rec.choice] += 1

    aggregated: dict[str, str] = {}
    for pair_id, counts in votes.items():
        best = max(counts.values())
        winners = [c for c, n in counts.items() if n == best]
        aggregated[pair_id] = winners[0] if len(winners) == 1 else "None"
    return aggregated


def _deblind_outcome(choice: str, pair: BlindedPair, system: str) -> str:
    """Map a blinded choice to {system_only, reference_only, both, none}."""
    if choice == "Both":
        return "both"
    if choice == "None":
        return "none"
    chosen = pair.label_A if choice == "A" else pair.label_B
    return "system_only" if chosen == system else "reference_only"


def success_rate(
    records: Sequence[AnnotationRecord],
    criterion: str,
    system: str,
    blinding: Mapping[str, BlindedPair],
) -> CriterionReport:
    """De-blind and tally one criterion.

    Success counts a pair when the system was chosen alone or Both was
    chosen; the denominator is every annotated pair, None included. Win-tie-
    loss maps win = chosen alone, tie = Both or None, loss = the other system
    chosen alone.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    aggregated = _aggregate_choices(records, criterion)
    if not aggregated:
        raise AnalysisError(f"no records for criterion {criterion!r}")

    breakdown = {"system_only": 0, "reference_only": 0, "both": 0, "none": 0}
    for pair_id, choice in aggregated.items():
        if pair_id not in blinding:
            raise AnalysisError(f"pair {pair_id!r} does not resolve in the blinding map")
        breakdown[_deblind_outcome(choice, blinding[pair_id], system)] += 1

    total = len(aggregated)
    pct = lambda n: 100.0 * n / total
    return CriterionReport(
        criterion=criterion,
        total=total,
        breakdown=breakdown,
        success_rate_system=pct(breakdown["system_only"] + breakdown["both"]),
        success_rate_reference=pct(breakdown["reference_only"] + breakdown["both"]),
        win_tie_loss=(
            pct(breakdown["system_only"]),
            pct(breakdown["both"] + breakdown["none"]),
            pct(breakdown["reference_only"]),
        ),
    )


def stratify(scores: Mapping[str, float], factor: float = 0.5) -> tuple[frozenset, frozenset, float, float]:
    """Split ids into low (< mean - factor*std) and high (> mean + factor*std).

    Population statistics; strict inequalities, so the middle band (and
    everything, when std is 0) is excluded.
    """
    if len(scores) < 2:
        raise AnalysisError("stratification needs at least 2 scores")
    values = np.asarray(list(scores.values()), dtype=float)
    mean = float(values.mean())
    std = float(values.std())
    low = frozenset(i for i, v in scores.items() if v < mean - factor * std)
    high = frozenset(i for i, v in scores.items() if v > mean + factor * std)
    return low, high, mean, std


def _success_pairs(
    records: Sequence[AnnotationRecord],
    criterion: str,
    system: str,
    blinding: Mapping[str, BlindedPair],
) -> dict[str, bool]:
    aggregated = _aggregate_choices(records, criterion)
    out: dict[str, bool] = {}
    for pair_id, choice in aggregated.items():
        if pair_id not in blinding:
            raise AnalysisError(f"pair {pair_id!r} does not resolve in the blinding map")
        outcome = _deblind_outcome(choice, blinding[pair_id], system)
        out[pair_id] = outcome in ("system_only", "both")
    return out


def criterion_rate_by_stratum(
    stratum_ids: Iterable[str],
    records: Sequence[AnnotationRecord],
    criterion: str,
    system: str,
    blinding: Mapping[str, BlindedPair],
) -> float:
    """Success rate (percent) restricted to pairs whose quandary is in the stratum."""
    stratum = set(stratum_ids)
    if not stratum:
        raise AnalysisError("empty stratum")
    successes = _success_pairs(records, criterion, system, blinding)
    in_stratum = [ok for pair_id, ok in successes.items() if blinding[pair_id].quandary_id in stratum]
    if not in_stratum:
        raise AnalysisError("no annotated pairs fall in the stratum")
    return 100.0 * sum(in_stratum) / len(in_stratum)


def conditional_rate(
    records: Sequence[AnnotationRecord],
    condition_criterion: str,
    target_criterion: str,
    system: str,
    blinding: Mapping[str, BlindedPair],
) -> float:
    """P(target success | condition success), as a percentage."""
    condition = _success_pairs(records, condition_criterion, system, blinding)
    target = _success_pairs(records, target_criterion, system, blinding)
    condition_pairs = [pair_id for pair_id, ok in condition.items() if ok]
    if not condition_pairs:
        raise AnalysisError(f"no pairs satisfy the condition criterion {condition_criterion!r}")
    hits = sum(1 for pair_id in condition_pairs if target.get(pair_id, False))
    return 100.0 * hits / len(condition_pairs)


# Abramowitz & Stegun 26.2.17 rational approximation of the standard normal
# CDF; absolute error < 7.5e-8, comfortably inside the 1e-6 contract.
_AS_B = (0.319381530, -0.356563782, 1.781477937, -1.821255978, 1.330274429)
_AS_P = 0.2316419


def normal_cdf(x: float) -> float:
    if x < 0:
        return 1.0 - normal_cdf(-x)
    t = 1.0 / (1.0 + _AS_P * x)
    poly = t * (_AS_B[0] + t * (_AS_B[1] + t * (_AS_B[2] + t * (_AS_B[3] + t * _AS_B[4]))))
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return 1.0 - pdf * poly


def two_proportion_test(k1: int, n1: int, k2: int, n2: int) -> float:
    """Two-sided p-value of the pooled two-proportion z-test.

    Symmetric in its two samples; equal proportions give p = 1.0 (z = 0).
    """
    for k, n in ((k1, n1), (k2, n2)):
        if n < 1:
            raise ValueError("sample sizes must be >= 1")
        if not 0 <= k <= n:
            raise ValueError(f"successes must satisfy 0 <= k <= n, got k={k}, n={n}")
    p1 = k1 / n1
    p2 = k2 / n2
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return 1.0
    z = (p1 - p2) / se
    return 2.0 * (1.0 - normal_cdf(abs(z)))


def build_stratified_report(
    metric: str,
    scores: Mapping[str, float],
    records: Sequence[AnnotationRecord],
    system: str,
    blinding: Mapping[str, BlindedPair],
    factor: float = 0.5,
    criteria: Sequence[str] = CRITERIA,
) -> StratifiedReport:
    """Low/high criterion rates with a significance test per criterion."""
    low, high, mean, std = stratify(scores, factor)
    if not low or not high:
        raise AnalysisError("stratification produced an empty stratum; scores are too uniform")
    successes_by_criterion = {c: _success_pairs(records, c, system, blinding) for c in criteria}

    rows = []
    for criterion in criteria:
        successes = successes_by_criterion[criterion]
        in_low = [ok for pid, ok in successes.items() if blinding[pid].quandary_id in low]
        in_high = [ok for pid, ok in successes.items() if blinding[pid].quandary_id in high]
        if not in_low or not in_high:
            raise AnalysisError(f"no annotated pairs in one stratum for criterion {criterion!r}")
        rows.append(
            StratifiedCriterion(
                criterion=criterion,
                rate_low=100.0 * sum(in_low) / len(in_low),
                rate_high=100.0 * sum(in_high) / len(in_high),
                p_value=two_proportion_test(sum(in_low), len(in_low), sum(in_high), len(in_high)),
            )
        )
    return StratifiedReport(
        metric=metric,
        mean=mean,
        std=std,
        factor=factor,
        low_ids=low,
        high_ids=high,
        criteria=tuple(rows),
    )


def format_criteria_table(reports: Sequence[CriterionReport], system: str) -> str:
    """Aligned text table of per-criterion success and win-tie-loss rates."""
    header = ("criterion", "success %", "ref success %", "win", "tie", "loss")
    rows = [header]
    for r in reports:
        w, t, l = r.win_tie_loss
        rows.append(
            (
                r.criterion,
                f"{r.success_rate_system:.2f}",
                f"{r.success_rate_reference:.2f}",
                f"{w:.2f}",
                f"{t:.2f}",
                f"{l:.2f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = [f"system: {system}"]
    for row in rows:
        lines.append(row[0].ljust(widths[0]) + "  " + "  ".join(row[i].rjust(widths[i]) for i in range(1, len(header))))
    return "\n".join(lines) + "\n"


def format_stratified_table(reports: Sequence[StratifiedReport]) -> str:
    rows = [("metric", "stratum", *[c.replace("_", "-") for c in CRITERIA])]
    for report in reports:
        by_name = {c.criterion: c for c in report.criteria}
        rows.append(
            (report.metric, "low", *[f"{by_name[c].rate_low:.2f}" if c in by_name else "-" for c in CRITERIA])
        )
        rows.append(
            (report.metric, "high", *[f"{by_name[c].rate_high:.2f}" if c in by_name else "-" for c in CRITERIA])
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) if i < 2 else row[i].rjust(widths[i]) for i in range(len(row))))
    return "\n".join(lines) + "\n"


def save_annotations(records: Iterable[AnnotationRecord], path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "pair_id": rec.pair_id,
                        "annotator": rec.annotator,
                        "criterion": rec.criterion,
                        "choice": rec.choice,
                    }
                )
                + "\n"
            )


def load_annotations(path: Path | str) -> list[AnnotationRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                records.append(
                    AnnotationRecord(
                        pair_id=str(obj["pair_id"]),
                        annotator=str(obj["annotator"]),
                        criterion=str(obj["criterion"]),
                        choice=str(obj["choice"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise AnalysisError(f"{path}:{line_no}: {exc}") from exc
    return records


def save_blinding(blinding: Mapping[str, BlindedPair], path: Path | str) -> None:
    payload = {
        pair_id: {
            "quandary_id": bp.quandary_id,
            "label_A": bp.label_A,
            "label_B": bp.label_B,
            "seed": bp.seed,
        }
        for pair_id, bp in blinding.items()
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_blinding(path: Path | str) -> dict[str, BlindedPair]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return {
        pair_id: BlindedPair(
            pair_id=pair_id,
            quandary_id=obj["quandary_id"],
            label_A=obj["label_A"],
            label_B=obj["label_B"],
            seed=int(obj.get("seed", 0)),
        )
        for pair_id, obj in payload.items()
    }
