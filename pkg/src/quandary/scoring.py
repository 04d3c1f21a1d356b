"""Rank pooled candidate principles, filter by threshold, deduplicate, and
select up to three — automatically or through a human reviewer.

Thresholds are interpreted in the producing scorer's own space: a
higher-is-better scorer keeps scores >= th, a lower-is-better scorer (such as
perplexity-based relevance, ranked ascending) keeps scores <= th. The default
th of 1.02 applies to the perplexity scorer; the lexical cosine scorer uses a
lower default because its scores live in [0, 1].
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Principle, Quandary
from .llm import CompletionClient, CompletionRequest
from .retrieval import InvertedIndex, ScoredPrinciple, normalize, retrieve_top_k

MAX_SELECTED = 3
DEFAULT_THRESHOLD = 1.02
DEFAULT_LEXICAL_THRESHOLD = 0.05
JACCARD_DUPLICATE_CUTOFF = 0.8

# Relevance request sent to the remote scorer; the affirmative continuation's
# perplexity is the score, so lower means more relevant.
RELEVANCE_TEMPLATE = "Context: {context} Principle: {principle} \n Is the principle relevant to the context?"

ELICITATION_PROMPT = (
    "List {count} one-sentence ethical principles that bear on the following situation. "
    "Write one principle per line.\n\n{context}\n\nQuestion: {question}\n\nPrinciples:\n"
)

SCORER_TOKEN_ENV = "QUANDARY_SCORER_TOKEN"


_INFLIGHT: dict[tuple[str, int], threading.Semaphore] = {}
_INFLIGHT_LOCK = threading.Lock()


def _inflight_cap(config: "ScorerConfig") -> threading.Semaphore:
    """One semaphore per (endpoint, cap): concurrent remote scoring shares it."""
    key = (config.endpoint or "", config.max_inflight)
    with _INFLIGHT_LOCK:
        sem = _INFLIGHT.get(key)
        if sem is None:
            sem = threading.Semaphore(config.max_inflight)
            _INFLIGHT[key] = sem
        return sem


class ScoringError(Exception):
    """Base error for scoring and selection."""


class ScorerUnreachableError(ScoringError):
    """The remote scorer could not be reached within the retry budget."""


class ScorerResponseError(ScoringError):
    """The remote scorer answered with a non-conforming payload."""


class NoCandidatesError(ScoringError):
    """Automatic selection found nothing above threshold; relax th or switch to human mode."""


class AlreadyFinalizedError(ScoringError):
    """A pending selection was confirmed twice; the first confirmation wins."""


@dataclass(frozen=True)
class ScorerConfig:
    scorer_id: str
    kind: str  # "lexical" | "remote_relevance"
    polarity: str
    threshold: float = DEFAULT_THRESHOLD
    endpoint: str | None = None
    timeout: float = 10.0
    max_retries: int = 2
    backoff_base: float = 0.2
    max_inflight: int = 4

    def __post_init__(self):
        if self.kind not in ("lexical", "remote_relevance"):
            raise ValueError("scorer kind must be 'lexical' or 'remote_relevance'")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.kind == "remote_relevance" and not self.endpoint:
            raise ValueError("remote scorer requires an endpoint")


def default_scorer_config(kind: str, endpoint: str | None = None, threshold: float | None = None) -> ScorerConfig:
    if kind == "lexical":
        return ScorerConfig(
            scorer_id="lexical",
            kind="lexical",
            polarity="higher_better",
            threshold=DEFAULT_LEXICAL_THRESHOLD if threshold is None else threshold,
        )
    if kind == "remote_relevance":
        return ScorerConfig(
            scorer_id="remote_relevance",
            kind="remote_relevance",
            polarity="lower_better",
            threshold=DEFAULT_THRESHOLD if threshold is None else threshold,
            endpoint=endpoint,
        )
    raise ValueError(f"unknown scorer kind {kind!r}")


@dataclass(frozen=True)
class DroppedCandidate:
    principle: Principle
    reason: str


@dataclass(frozen=True)
class PrincipleSelection:
    """The 1..3 principles chosen to condition generation, with the ranked
    candidates that were considered."""

    quandary_id: str
    principles: tuple[Principle, ...]
    mode: str  # "automatic" | "human"
    selected_by: str | None = None
    trace: tuple[ScoredPrinciple, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "principles", tuple(self.principles))
        object.__setattr__(self, "trace", tuple(self.trace))
        if self.mode not in ("automatic", "human"):
            raise ValueError("mode must be 'automatic' or 'human'")
        if not 1 <= len(self.principles) <= MAX_SELECTED:
            raise ValueError(f"selection must hold 1..{MAX_SELECTED} principles")
        if self.mode == "human" and not self.selected_by:
            raise ValueError("human selection requires selected_by")
        for i, a in enumerate(self.principles):
            for b in self.principles[i + 1 :]:
                if are_duplicates(a, b):
                    raise ValueError(f"selected principles {a.id!r} and {b.id!r} are duplicates")


class PendingSelection:
    """A ranked candidate pool awaiting a human choice.

    Finalization is atomic: the first confirm_selection wins and later
    attempts raise AlreadyFinalizedError.
    """

    def __init__(
        self,
        quandary: Quandary,
        candidates: list[ScoredPrinciple],
        trace: list[ScoredPrinciple],
        config: ScorerConfig,
        token: str | None = None,
    ):
        self.quandary = quandary
        self.candidates = list(candidates)
        self.trace = list(trace)
        self.config = config
        self.token = token or pending_token(quandary.id, config.scorer_id, candidates)
        self.created_at = time.time()
        self._finalized: PrincipleSelection | None = None
        self._lock = threading.Lock()

    @property
    def finalized(self) -> PrincipleSelection | None:
        return self._finalized


def pending_token(quandary_id: str, scorer_id: str, candidates: Sequence[ScoredPrinciple]) -> str:
    """Deterministic token so repeated candidate computation is idempotent."""
    payload = quandary_id + "\x1f" + scorer_id + "\x1f" + "|".join(c.principle.id for c in candidates)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:20]


def score_lexical(quandary: Quandary, principle: Principle) -> ScoredPrinciple:
    """Cosine similarity of term-frequency vectors over normalized tokens."""
    q_tokens = normalize(quandary.full_text())
    p_tokens = normalize(principle.text)
    q_tf: dict[str, int] = {}
    p_tf: dict[str, int] = {}
    for t in q_tokens:
        q_tf[t] = q_tf.get(t, 0) + 1
    for t in p_tokens:
        p_tf[t] = p_tf.get(t, 0) + 1
    dot = sum(q_tf[t] * p_tf[t] for t in q_tf.keys() & p_tf.keys())
    if dot == 0:
        score = 0.0
    else:
        q_norm = math.sqrt(sum(v * v for v in q_tf.values()))
        p_norm = math.sqrt(sum(v * v for v in p_tf.values()))
        score = dot / (q_norm * p_norm)
    return ScoredPrinciple(principle=principle, score=score, scorer_id="lexical", polarity="higher_better")


def score_remote(
    config: ScorerConfig, quandary: Quandary, principle: Principle, transport=None
) -> ScoredPrinciple:
    """Ask the remote relevance scorer for the perplexity of the affirmative
    continuation; lower perplexity means more relevant."""
    if config.kind != "remote_relevance":
        raise ValueError("score_remote requires a remote_relevance config")
    transport = transport or _urllib_post
    payload = {
        "context": quandary.full_text(),
        "principle": principle.text,
        "template": RELEVANCE_TEMPLATE,
    }

    attempts = 0
    last_error: Exception | None = None
    while attempts <= config.max_retries:
        attempts += 1
        try:
            with _inflight_cap(config):
                status, body = transport(config.endpoint, payload, config.timeout)
        except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
            last_error = exc
            if attempts <= config.max_retries:
                time.sleep(config.backoff_base * (2 ** (attempts - 1)))
            continue
        if status != 200:
            last_error = ScoringError(f"scorer returned HTTP {status}")
            if attempts <= config.max_retries:
                time.sleep(config.backoff_base * (2 ** (attempts - 1)))
            continue
        try:
            perplexity = json.loads(body)["perplexity"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ScorerResponseError(f"scorer payload missing perplexity: {exc}") from exc
        if not isinstance(perplexity, (int, float)) or not math.isfinite(float(perplexity)):
            raise ScorerResponseError(f"scorer perplexity is not a finite number: {perplexity!r}")
        return ScoredPrinciple(
            principle=principle,
            score=float(perplexity),
            scorer_id=config.scorer_id,
            polarity="lower_better",
        )
    raise ScorerUnreachableError(f"scorer unreachable after {config.max_retries} retries: {last_error}")


def _urllib_post(url: str, payload: dict, timeout: float) -> tuple[int, str]:
    import os

    headers = {"Content-Type": "application/json"}
    token = os.environ.get(SCORER_TOKEN_ENV, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    req = urllib.request.Request(url, data=json.dumps(payload).encode("utf-8"), headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode("utf-8", errors="replace")


def _is_better(a: ScoredPrinciple, b: ScoredPrinciple) -> bool:
    if a.polarity == "higher_better":
        return a.score > b.score
    return a.score < b.score


def _shared_polarity(candidates: Sequence[ScoredPrinciple]) -> str:
    polarities = {c.polarity for c in candidates}
    if len(polarities) > 1:
        raise ValueError(f"candidates mix polarities: {sorted(polarities)}")
    return next(iter(polarities))


def rank_candidates(candidates: Sequence[ScoredPrinciple]) -> list[ScoredPrinciple]:
    """Better score first, ties broken by ascending principle id."""
    if not candidates:
        return []
    polarity = _shared_polarity(candidates)
    sign = -1.0 if polarity == "higher_better" else 1.0
    return sorted(candidates, key=lambda c: (sign * c.score, c.principle.id))


def filter_by_threshold(candidates: Sequence[ScoredPrinciple], config: ScorerConfig) -> list[ScoredPrinciple]:
    """Keep candidates on the good side of th in the scorer's own space; order preserved."""
    mismatched = {c.scorer_id for c in candidates if c.scorer_id != config.scorer_id}
    if mismatched:
        raise ValueError(f"candidates from foreign scorers {sorted(mismatched)}; expected {config.scorer_id!r}")
    if config.polarity == "higher_better":
        return [c for c in candidates if c.score >= config.threshold]
    return [c for c in candidates if c.score <= config.threshold]


def are_duplicates(a: Principle, b: Principle) -> bool:
    """Duplicate when normalized texts are equal or token-set Jaccard >= 0.8."""
    ta, tb = normalize(a.text), normalize(b.text)
    if ta == tb:
        return True
    sa, sb = set(ta), set(tb)
    if not sa or not sb:
        return False
    return len(sa & sb) / len(sa | sb) >= JACCARD_DUPLICATE_CUTOFF


def dedup(candidates: Sequence[ScoredPrinciple]) -> list[ScoredPrinciple]:
    """Collapse duplicates, keeping the better-scored member; stable otherwise.

    A candidate that beats every duplicate already kept replaces the first of
    them (and absorbs the rest); one that loses to any kept duplicate is
    dropped. The result is pairwise non-duplicate, so the pass is idempotent.
    """
    survivors: list[ScoredPrinciple] = []
    for cand in candidates:
        dup_idx = [i for i, s in enumerate(survivors) if are_duplicates(s.principle, cand.principle)]
        if not dup_idx:
            survivors.append(cand)
            continue
        if all(_is_better(cand, survivors[i]) for i in dup_idx):
            survivors[dup_idx[0]] = cand
            for i in reversed(dup_idx[1:]):
                del survivors[i]
    return survivors


def generate_principles(
    quandary: Quandary, client: CompletionClient, count: int = 3, seed: int | None = None
) -> list[Principle]:
    """Elicit candidate principles from the completion backend."""
    prompt = ELICITATION_PROMPT.format(
        count=count, context="\n\n".join(quandary.context), question=quandary.question
    )
    response = client.complete(CompletionRequest(prompt=prompt, max_tokens=256, temperature=0.7, seed=seed))
    principles = []
    for line in response.text.replace("<p>", "\n").replace("</p>", "\n").splitlines():
        text = line.strip().lstrip("-*0123456789. ").strip()
        if not text:
            continue
        pid = "gen-" + hashlib.sha1(text.encode("utf-8")).hexdigest()[:10]
        principles.append(Principle(id=pid, text=text, provenance="generated"))
        if len(principles) >= count:
            break
    return principles


def build_candidate_pool(
    quandary: Quandary,
    index: InvertedIndex | None = None,
    client: CompletionClient | None = None,
    handcrafted: Iterable[Principle] = (),
    top_k: int = 10,
    generated_count: int = 3,
    seed: int | None = None,
) -> list[Principle]:
    """Merge the three candidate sources, provenance preserved, retrieval order first."""
    pool: list[Principle] = []
    seen: set[str] = set()

    def _add(p: Principle) -> None:
        if p.id not in seen:
            seen.add(p.id)
            pool.append(p)

    if index is not None:
        for scored in retrieve_top_k(index, quandary, k=top_k):
            _add(scored.principle)
    if client is not None:
        for p in generate_principles(quandary, client, count=generated_count, seed=seed):
            _add(p)
    for p in handcrafted:
        _add(p)
    return pool


def score_pool(
    quandary: Quandary,
    pool: Sequence[Principle],
    config: ScorerConfig,
    transport=None,
) -> tuple[list[ScoredPrinciple], list[DroppedCandidate]]:
    """Score every pooled candidate.

    Non-conforming remote responses drop the candidate with a recorded reason;
    an unreachable scorer propagates (retries already happened inside
    score_remote) so callers can fall back to the lexical scorer.
    """
    scored: list[ScoredPrinciple] = []
    dropped: list[DroppedCandidate] = []
    for principle in pool:
        if config.kind == "lexical":
            scored.append(score_lexical(quandary, principle))
        else:
            try:
                scored.append(score_remote(config, quandary, principle, transport=transport))
            except ScorerResponseError as exc:
                dropped.append(DroppedCandidate(principle=principle, reason=str(exc)))
    return scored, dropped


def select_principles(
    quandary: Quandary,
    pool: Sequence[ScoredPrinciple],
    config: ScorerConfig,
    mode: str = "automatic",
) -> PrincipleSelection | PendingSelection:
    """Rank, filter by th, dedup; return the top 1..3 automatically, or a
    PendingSelection for a human to finalize."""
    if mode not in ("automatic", "human"):
        raise ValueError("mode must be 'automatic' or 'human'")
    ranked = rank_candidates(pool)
    survivors = dedup(filter_by_threshold(ranked, config))

    if mode == "human":
        return PendingSelection(quandary, candidates=survivors, trace=ranked, config=config)

    if not survivors:
        raise NoCandidatesError(
            f"no candidates above threshold {config.threshold} for quandary {quandary.id!r}; "
            "relax th or switch to human mode"
        )
    return PrincipleSelection(
        quandary_id=quandary.id,
        principles=tuple(s.principle for s in survivors[:MAX_SELECTED]),
        mode="automatic",
        trace=tuple(ranked),
    )


def confirm_selection(
    pending: PendingSelection, chosen: Sequence[str | dict | Principle], annotator: str
) -> PrincipleSelection:
    """Finalize a human selection: pool ids in chosen order, plus optional
    free-text principles (human provenance). First confirmation wins."""
    if not annotator:
        raise ValueError("annotator id is required")
    if not 1 <= len(chosen) <= MAX_SELECTED:
        raise ValueError(f"choose between 1 and {MAX_SELECTED} principles, got {len(chosen)}")

    by_id = {c.principle.id: c.principle for c in pending.trace}
    principles: list[Principle] = []
    for item in chosen:
        if isinstance(item, Principle):
            principles.append(item)
        elif isinstance(item, dict) and item.get("text"):
            text = str(item["text"]).strip()
            pid = item.get("id") or "human-" + hashlib.sha1(text.encode("utf-8")).hexdigest()[:10]
            principles.append(Principle(id=str(pid), text=text, provenance="human"))
        elif isinstance(item, (str, dict)):
            pid = item if isinstance(item, str) else item.get("id")
            if pid not in by_id:
                raise ValueError(f"unknown principle id {pid!r} (free-text entries must carry text)")
            principles.append(by_id[pid])
        else:
            raise ValueError(f"cannot interpret chosen entry {item!r}")

    with pending._lock:
        if pending._finalized is not None:
            raise AlreadyFinalizedError(f"pending selection {pending.token} was already confirmed")
        selection = PrincipleSelection(
            quandary_id=pending.quandary.id,
            principles=tuple(principles),
            mode="human",
            selected_by=annotator,
            trace=tuple(pending.trace),
        )
        pending._finalized = selection
    return selection


def selection_to_record(selection: PrincipleSelection) -> dict:
    return {
        "quandary_id": selection.quandary_id,
        "mode": selection.mode,
        "selected_by": selection.selected_by,
        "principles": [
            {"id": p.id, "text": p.text, "provenance": p.provenance} for p in selection.principles
        ],
        "trace": [
            {
                "id": s.principle.id,
                "text": s.principle.text,
                "provenance": s.principle.provenance,
                "score": s.score,
                "scorer_id": s.scorer_id,
                "polarity": s.polarity,
            }
            for s in selection.trace
        ],
    }


def selection_from_record(record: dict) -> PrincipleSelection:
    return PrincipleSelection(
        quandary_id=record["quandary_id"],
        principles=tuple(
            Principle(id=p["id"], text=p["text"], provenance=p["provenance"]) for p in record["principles"]
        ),
        mode=record["mode"],
        selected_by=record.get("selected_by"),
        trace=tuple(
            ScoredPrinciple(
                principle=Principle(id=s["id"], text=s["text"], provenance=s["provenance"]),
                score=s["score"],
                scorer_id=s["scorer_id"],
                polarity=s["polarity"],
            )
            for s in record.get("trace", [])
        ),
    )
