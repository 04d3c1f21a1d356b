"""Reference-based automatic evaluation: ROUGE-1/2/L, corpus-level BLEU-4,
sentence BLEU, and greedy-matching BERTScore over a pluggable embedding
provider.

All metric functions are pure. ROUGE and BERTScore tokenize with the
retrieval normalizer (lowercase alphanumeric runs); BLEU uses a
punctuation-splitting tokenizer that preserves case (punctuation marks become
their own tokens). Scores are reported on a 0-100 scale in corpus reports.
"""

from __future__ import annotations

import json
import logging
import math
import re
import urllib.request
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import ReferenceAnswer
from .retrieval import normalize

logger = logging.getLogger(__name__)

METRIC_NAMES = ("rouge1", "rouge2", "rougeL", "bleu_sentence", "bertscore")

_BLEU_TOKEN = re.compile(r"\w+|[^\w\s]")

# Zero n-gram precisions at sentence level are replaced by this epsilon before
# the geometric mean; the corpus-level score uses no smoothing (zero -> 0).
SENTENCE_BLEU_EPSILON = 0.01


class MetricError(Exception):
    """Invalid metric input (misaligned corpora, missing references)."""


@dataclass(frozen=True)
class PairScore:
    quandary_id: str
    metric: str
    precision: float
    recall: float
    f1: float

    def __post_init__(self):
        for name, v in (("precision", self.precision), ("recall", self.recall), ("f1", self.f1)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _pair(quandary_id: str, metric: str, precision: float, recall: float) -> PairScore:
    return PairScore(quandary_id, metric, precision, recall, _f1(precision, recall))


def ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: str, reference: str, n: int, quandary_id: str = "") -> PairScore:
    """Clipped n-gram overlap; empty n-gram sets score zero."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    cand = ngram_counts(normalize(candidate), n)
    ref = ngram_counts(normalize(reference), n)
    overlap = sum((cand & ref).values())
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    return _pair(quandary_id, f"rouge{n}", precision, recall)


def lcs_length(a: list[str], b: list[str]) -> int:
    """Classic O(len(a)*len(b)) longest-common-subsequence length."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str, quandary_id: str = "") -> PairScore:
    cand = normalize(candidate)
    ref = normalize(reference)
    lcs = lcs_length(cand, ref)
    precision = lcs / len(cand) if cand else 0.0
    recall = lcs / len(ref) if ref else 0.0
    return _pair(quandary_id, "rougeL", precision, recall)


def bleu_tokenize(text: str) -> list[str]:
    """Split punctuation into separate tokens, preserve case."""
    return _BLEU_TOKEN.findall(text)


def _bleu_from_pooled(
    matches: list[int], totals: list[int], candidate_len: int, reference_len: int, epsilon: float | None
) -> float:
    precisions = []
    for m, t in zip(matches, totals):
        if t == 0:
            p = 0.0
        else:
            p = m / t
        if p == 0.0:
            if epsilon is None:
                return 0.0
            p = epsilon
        precisions.append(p)
    log_mean = sum(math.log(p) for p in precisions) / 4
    if candidate_len == 0:
        return 0.0
    brevity = 1.0 if candidate_len >= reference_len else math.exp(1 - reference_len / candidate_len)
    return 100.0 * brevity * math.exp(log_mean)


def corpus_bleu(candidates: list[str], references: list[str]) -> float:
    """BLEU-4 with corpus-pooled clipped precisions and no smoothing.

    A pooled precision of zero at any order sends the score to 0; the brevity
    penalty is exp(1 - r/c) when the candidate corpus is shorter than the
    reference corpus.
    """
    if len(candidates) != len(references):
        raise MetricError(f"corpus length mismatch: {len(candidates)} candidates, {len(references)} references")
    if not candidates:
        raise MetricError("empty corpus")
    matches = [0] * 4
    totals = [0] * 4
    cand_len = 0
    ref_len = 0
    for cand_text, ref_text in zip(candidates, references):
        cand = bleu_tokenize(cand_text)
        ref = bleu_tokenize(ref_text)
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, 5):
            c_counts = ngram_counts(cand, n)
            r_counts = ngram_counts(ref, n)
            matches[n - 1] += sum((c_counts & r_counts).values())
            totals[n - 1] += sum(c_counts.values())
    return _bleu_from_pooled(matches, totals, cand_len, ref_len, epsilon=None)


def sentence_bleu(candidate: str, reference: str) -> float:
    """Single-pair BLEU-4 with epsilon-substituted zero precisions."""
    cand = bleu_tokenize(candidate)
    ref = bleu_tokenize(reference)
    matches = []
    totals = []
    for n in range(1, 5):
        c_counts = ngram_counts(cand, n)
        r_counts = ngram_counts(ref, n)
        matches.append(sum((c_counts & r_counts).values()))
        totals.append(sum(c_counts.values()))
    return _bleu_from_pooled(matches, totals, len(cand), len(ref), epsilon=SENTENCE_BLEU_EPSILON)


class OneHotProvider:
    """Identity embeddings: each distinct token maps to its own basis vector.

    Greedy matching then reduces to exact token identity, which makes this
    the deterministic default for tests and offline runs. The vocabulary is
    built per embed() call, which is safe because bertscore embeds candidate
    and reference tokens in a single call.
    """

    def embed(self, tokens: list[str]) -> list[list[float]]:
        vocab: dict[str, int] = {}
        for tok in tokens:
            vocab.setdefault(tok, len(vocab))
        dim = max(len(vocab), 1)
        vectors = []
        for tok in tokens:
            v = [0.0] * dim
            v[vocab[tok]] = 1.0
            vectors.append(v)
        return vectors


class TableProvider:
    """Embeddings looked up in a fixed token -> vector table."""

    def __init__(self, table: dict[str, list[float]]):
        self.table = dict(table)

    def embed(self, tokens: list[str]) -> list[list[float]]:
        try:
            return [list(self.table[tok]) for tok in tokens]
        except KeyError as exc:
            raise MetricError(f"embedding table has no vector for token {exc}") from exc


class HttpEmbeddingProvider:
    """Remote provider speaking POST {"tokens": [...]} -> {"vectors": [[...]]}."""

    def __init__(self, endpoint: str, timeout: float = 30.0, transport=None):
        self.endpoint = endpoint
        self.timeout = timeout
        self._transport = transport or self._post

    def _post(self, url: str, payload: dict, timeout: float) -> tuple[int, str]:
        req = urllib.request.Request(
            url,
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read().decode("utf-8")

    def embed(self, tokens: list[str]) -> list[list[float]]:
        status, body = self._transport(self.endpoint, {"tokens": tokens}, self.timeout)
        if status != 200:
            raise MetricError(f"embedding provider returned HTTP {status}")
        try:
            vectors = json.loads(body)["vectors"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MetricError(f"embedding payload missing vectors: {exc}") from exc
        if len(vectors) != len(tokens):
            raise MetricError("embedding provider returned wrong vector count")
        return vectors


def _unit_rows(vectors: list[list[float]]) -> np.ndarray:
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2:
        raise MetricError("embedding provider must return one vector per token")
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise MetricError("embedding vectors must be unit-normalizable (non-zero)")
    return arr / norms


def bertscore(candidate: str, reference: str, provider, quandary_id: str = "") -> PairScore:
    """Greedy token matching over provider embeddings.

    Candidate and reference tokens are embedded in one provider call so the
    vectors share a space and a dimensionality. Recall averages, over
    reference tokens, the best cosine against any candidate token; precision
    is symmetric; no idf weighting and no baseline rescaling. Cosines are
    clamped at zero so antipodal vectors cannot push a mean below the score
    floor.
    """
    cand_tokens = normalize(candidate)
    ref_tokens = normalize(reference)
    if not cand_tokens or not ref_tokens:
        logger.warning("bertscore over empty token list (candidate=%d, reference=%d tokens): scoring 0",
                       len(cand_tokens), len(ref_tokens))
        return PairScore(quandary_id, "bertscore", 0.0, 0.0, 0.0)
    vectors = _unit_rows(provider.embed(cand_tokens + ref_tokens))
    cand_vecs = vectors[: len(cand_tokens)]
    ref_vecs = vectors[len(cand_tokens) :]
    sim = np.clip(cand_vecs @ ref_vecs.T, 0.0, 1.0)
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    return _pair(quandary_id, "bertscore", precision, recall)


@dataclass
class MetricReport:
    pair_scores: list[PairScore] = field(default_factory=list)
    means: dict[str, tuple[float, float, float]] = field(default_factory=dict)  # metric -> (P, R, F1) in %
    corpus_bleu: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "corpus_bleu": self.corpus_bleu,
            "means": {m: {"precision": p, "recall": r, "f1": f} for m, (p, r, f) in self.means.items()},
            "pairs": [
                {
                    "quandary_id": s.quandary_id,
                    "metric": s.metric,
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                }
                for s in self.pair_scores
            ],
        }

    def format_table(self) -> str:
        rows = [("", "Precision", "Recall", "F1")]
        labels = {
            "rouge1": "ROUGE-1",
            "rouge2": "ROUGE-2",
            "rougeL": "ROUGE-L",
            "bertscore": "BERTscore",
            "bleu_sentence": "BLEU (sent.)",
        }
        for metric in ("rouge1", "rouge2", "rougeL", "bertscore", "bleu_sentence"):
            if metric not in self.means:
                continue
            p, r, f = self.means[metric]
            rows.append((labels[metric], f"{p:.2f}", f"{r:.2f}", f"{f:.2f}"))
        rows.append(("Corpus BLEU", f"{self.corpus_bleu:.2f}", "-", "-"))
        widths = [max(len(row[i]) for row in rows) for i in range(4)]
        lines = []
        for row in rows:
            lines.append(
                row[0].ljust(widths[0]) + "  " + "  ".join(row[i].rjust(widths[i]) for i in range(1, 4))
            )
        return "\n".join(lines) + "\n"


def evaluate_corpus(answers, references: list[ReferenceAnswer], provider=None) -> MetricReport:
    """Score every answer against its reference; disclaimer wrapping excluded.

    `answers` may be GeneratedAnswer objects (their concatenated text is
    scored) or (quandary_id, text) pairs. One reference per quandary id; a
    missing reference is an error.
    """
    provider = provider or OneHotProvider()
    ref_by_id: dict[str, str] = {}
    for ref in references:
        ref_by_id.setdefault(ref.quandary_id, ref.text)

    pairs: list[tuple[str, str, str]] = []
    for answer in answers:
        if hasattr(answer, "concatenated"):
            qid, text = answer.quandary_id, answer.concatenated
        else:
            qid, text = answer
        if qid not in ref_by_id:
            raise MetricError(f"no reference answer for quandary {qid!r}")
        pairs.append((qid, text, ref_by_id[qid]))
    if not pairs:
        raise MetricError("nothing to evaluate")

    report = MetricReport()
    for qid, cand, ref in pairs:
        report.pair_scores.append(rouge_n(cand, ref, 1, qid))
        report.pair_scores.append(rouge_n(cand, ref, 2, qid))
        report.pair_scores.append(rouge_l(cand, ref, qid))
        bleu = sentence_bleu(cand, ref)
        report.pair_scores.append(PairScore(qid, "bleu_sentence", bleu / 100.0, bleu / 100.0, bleu / 100.0))
        report.pair_scores.append(bertscore(cand, ref, provider, qid))

    for metric in METRIC_NAMES:
        scores = [s for s in report.pair_scores if s.metric == metric]
        if scores:
            report.means[metric] = (
                100.0 * float(np.mean([s.precision for s in scores])),
                100.0 * float(np.mean([s.recall for s in scores])),
                100.0 * float(np.mean([s.f1 for s in scores])),
            )
    report.corpus_bleu = corpus_bleu([c for _, c, _ in pairs], [r for _, _, r in pairs])
    return report
