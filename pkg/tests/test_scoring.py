from __future__ import annotations

import json
import math
import random

import pytest

from quandary.corpus import Principle
from quandary.llm import BackendConfig, CompletionClient
from quandary.retrieval import ScoredPrinciple, build_index, normalize
from quandary.scoring import (
    AlreadyFinalizedError,
    NoCandidatesError,
    PendingSelection,
    PrincipleSelection,
    RELEVANCE_TEMPLATE,
    ScorerConfig,
    ScorerResponseError,
    ScorerUnreachableError,
    build_candidate_pool,
    confirm_selection,
    dedup,
    default_scorer_config,
    filter_by_threshold,
    rank_candidates,
    score_lexical,
    score_pool,
    score_remote,
    select_principles,
    selection_from_record,
    selection_to_record,
)

from conftest import make_principle, make_quandary


def scored(pid: str, score: float, polarity: str = "higher_better", scorer_id: str = "lexical", text=None):
    return ScoredPrinciple(
        principle=make_principle(pid, text or f"principle text {pid}"),
        score=score,
        scorer_id=scorer_id,
        polarity=polarity,
    )


def remote_config(**overrides) -> ScorerConfig:
    defaults = dict(
        scorer_id="remote_relevance",
        kind="remote_relevance",
        polarity="lower_better",
        threshold=1.02,
        endpoint="http://scorer.test/relevance",
        backoff_base=0.0,
    )
    defaults.update(overrides)
    return ScorerConfig(**defaults)


class TestLexicalScorer:
    def test_identical_texts_score_one(self):
        q = make_quandary(context=("never lie to friends.",), question="never lie to friends?")
        p = make_principle("p1", "never lie to friends never lie to friends")
        assert score_lexical(q, p).score == pytest.approx(1.0)

    def test_disjoint_vocabulary_scores_zero(self):
        q = make_quandary(context=("alpha beta.",), question="gamma?")
        p = make_principle("p1", "delta epsilon")
        assert score_lexical(q, p).score == 0.0

    def test_hand_computed_cosine(self):
        # Tokens: [never, lie, to, friends] vs [you, should, never, lie]:
        # dot = 2, norms = 2 and 2 -> cosine 0.5.
        q = make_quandary(context=("never lie to friends",), question="x")
        # question adds token "x"; use a context-only comparison instead.
        q = make_quandary(context=("never lie to",), question="friends")
        p = make_principle("p1", "you should never lie")
        assert score_lexical(q, p).score == pytest.approx(0.5)

    def test_polarity_and_scorer_id(self):
        s = score_lexical(make_quandary(), make_principle("p1", "anything"))
        assert s.scorer_id == "lexical" and s.polarity == "higher_better"


class TestRemoteScorer:
    def test_fixed_perplexity_pass_through(self):
        def transport(url, payload, timeout):
            assert payload["template"] == RELEVANCE_TEMPLATE
            return 200, json.dumps({"perplexity": 1.01})

        s = score_remote(remote_config(), make_quandary(), make_principle("p1", "never lie"), transport=transport)
        assert s.score == 1.01
        assert s.polarity == "lower_better"

    def test_overlap_mapped_stub_ranks_like_overlap_reversed(self):
        quandary = make_quandary(context=("never lie to friends.",), question="should i lie?")

        def transport(url, payload, timeout):
            # Stub: perplexity falls as token overlap grows.
            overlap = len(set(normalize(payload["context"])) & set(normalize(payload["principle"])))
            return 200, json.dumps({"perplexity": 10.0 - overlap})

        principles = [
            make_principle("p1", "never lie to friends"),
            make_principle("p2", "completely unrelated words"),
            make_principle("p3", "you should never lie"),
        ]
        results = [score_remote(remote_config(), quandary, p, transport=transport) for p in principles]
        ranked = rank_candidates(results)
        overlap_order = sorted(
            principles,
            key=lambda p: (-len(set(normalize(quandary.full_text())) & set(normalize(p.text))), p.id),
        )
        assert [r.principle.id for r in ranked] == [p.id for p in overlap_order]

    def test_unreachable_endpoint_raises_after_retries(self):
        calls = []

        def transport(url, payload, timeout):
            calls.append(1)
            raise ConnectionError("down")

        with pytest.raises(ScorerUnreachableError):
            score_remote(remote_config(max_retries=2), make_quandary(), make_principle("p1", "x"), transport=transport)
        assert len(calls) == 3

    def test_non_conforming_response_raises(self):
        with pytest.raises(ScorerResponseError):
            score_remote(
                remote_config(),
                make_quandary(),
                make_principle("p1", "x"),
                transport=lambda *a: (200, '{"wrong": true}'),
            )

    def test_non_finite_perplexity_rejected(self):
        with pytest.raises(ScorerResponseError):
            score_remote(
                remote_config(),
                make_quandary(),
                make_principle("p1", "x"),
                transport=lambda *a: (200, '{"perplexity": "NaN"}'),
            )

    def test_score_pool_drops_failures_with_reason(self):
        def transport(url, payload, timeout):
            if "bad" in payload["principle"]:
                return 200, '{"oops": 1}'
            return 200, json.dumps({"perplexity": 1.0})

        pool = [make_principle("p1", "good text"), make_principle("p2", "bad text")]
        scored_list, dropped = score_pool(make_quandary(), pool, remote_config(), transport=transport)
        assert [s.principle.id for s in scored_list] == ["p1"]
        assert len(dropped) == 1 and dropped[0].principle.id == "p2"
        assert "perplexity" in dropped[0].reason


class TestThresholdFilter:
    def test_higher_better_keeps_at_or_above(self):
        config = ScorerConfig(scorer_id="lexical", kind="lexical", polarity="higher_better", threshold=1.02)
        candidates = [scored("p1", 1.5), scored("p2", 1.02), scored("p3", 0.9)]
        kept = filter_by_threshold(candidates, config)
        assert [c.principle.id for c in kept] == ["p1", "p2"]

    def test_lower_better_keeps_at_or_below(self):
        config = remote_config()
        candidates = [
            scored("p1", 1.01, "lower_better", "remote_relevance"),
            scored("p2", 1.5, "lower_better", "remote_relevance"),
        ]
        kept = filter_by_threshold(candidates, config)
        assert [c.principle.id for c in kept] == ["p1"]

    def test_empty_input_gives_empty_output(self):
        config = default_scorer_config("lexical")
        assert filter_by_threshold([], config) == []

    def test_mixed_scorer_ids_rejected(self):
        config = default_scorer_config("lexical")
        with pytest.raises(ValueError):
            filter_by_threshold([scored("p1", 0.5, scorer_id="other")], config)

    def test_threshold_monotone_in_surviving_set(self):
        rng = random.Random(23)
        candidates = [scored(f"p{i}", rng.uniform(0, 2)) for i in range(40)]
        previous = None
        for step in range(20):
            th = step * 0.1
            config = ScorerConfig(scorer_id="lexical", kind="lexical", polarity="higher_better", threshold=th)
            surviving = {c.principle.id for c in filter_by_threshold(candidates, config)}
            if previous is not None:
                assert surviving <= previous
            previous = surviving


class TestDedup:
    def test_byte_identical_texts_collapse(self):
        a = scored("p1", 0.9, text="never lie")
        b = scored("p2", 0.5, text="never lie")
        survivors = dedup([a, b])
        assert [s.principle.id for s in survivors] == ["p1"]

    def test_half_jaccard_pair_kept(self):
        # Token sets {never, lie} vs {you, must, never, lie}: Jaccard 2/4 = 0.5.
        a = scored("p1", 0.9, text="never lie")
        b = scored("p2", 0.5, text="you must never lie")
        assert len(dedup([a, b])) == 2

    def test_empty_list(self):
        assert dedup([]) == []

    def test_better_scored_member_survives_regardless_of_order(self):
        weak = scored("p1", 0.2, text="keep your promises always")
        strong = scored("p2", 0.8, text="keep your promises always")
        assert [s.principle.id for s in dedup([weak, strong])] == ["p2"]
        assert [s.principle.id for s in dedup([strong, weak])] == ["p2"]

    def test_lower_better_polarity_respected(self):
        weak = scored("p1", 2.0, "lower_better", "remote_relevance", text="keep promises always now")
        strong = scored("p2", 1.0, "lower_better", "remote_relevance", text="keep promises always now")
        assert [s.principle.id for s in dedup([weak, strong])] == ["p2"]

    def test_idempotence_on_random_pools(self):
        rng = random.Random(41)
        vocab = ["lie", "truth", "friend", "harm", "promise", "duty"]
        for _ in range(50):
            pool = [
                scored(
                    f"p{i}",
                    rng.random(),
                    text=" ".join(rng.choice(vocab) for _ in range(rng.randint(1, 5))),
                )
                for i in range(rng.randint(0, 12))
            ]
            once = dedup(pool)
            assert dedup(once) == once

    def test_result_is_pairwise_non_duplicate(self):
        from quandary.scoring import are_duplicates

        rng = random.Random(43)
        vocab = ["lie", "truth", "friend"]
        for _ in range(50):
            pool = [
                scored(
                    f"p{i}",
                    rng.random(),
                    text=" ".join(rng.choice(vocab) for _ in range(rng.randint(1, 4))),
                )
                for i in range(rng.randint(0, 10))
            ]
            survivors = dedup(pool)
            for i, a in enumerate(survivors):
                for b in survivors[i + 1 :]:
                    assert not are_duplicates(a.principle, b.principle)


class TestSelection:
    def _pool(self, n: int) -> list[ScoredPrinciple]:
        texts = [
            "never lie to your friends",
            "keep every promise you make",
            "protect the vulnerable from harm",
            "respect the autonomy of others",
            "repay kindness with gratitude",
        ]
        return [scored(f"p{i}", 1.0 - 0.1 * i, text=texts[i % len(texts)] + f" variant {i}") for i in range(n)]

    def _config(self, threshold=0.0):
        return ScorerConfig(scorer_id="lexical", kind="lexical", polarity="higher_better", threshold=threshold)

    def test_five_survivors_automatic_takes_top_three(self):
        selection = select_principles(make_quandary(), self._pool(5), self._config(), mode="automatic")
        assert isinstance(selection, PrincipleSelection)
        assert [p.id for p in selection.principles] == ["p0", "p1", "p2"]
        assert selection.mode == "automatic"

    def test_single_survivor_gives_selection_of_one(self):
        selection = select_principles(make_quandary(), self._pool(1), self._config(), mode="automatic")
        assert len(selection.principles) == 1

    def test_automatic_empty_pool_raises(self):
        with pytest.raises(NoCandidatesError):
            select_principles(make_quandary(), self._pool(3), self._config(threshold=10.0), mode="automatic")

    def test_automatic_is_deterministic(self):
        a = select_principles(make_quandary(), self._pool(5), self._config(), mode="automatic")
        b = select_principles(make_quandary(), self._pool(5), self._config(), mode="automatic")
        assert a == b

    def test_human_mode_returns_pending(self):
        pending = select_principles(make_quandary(), self._pool(4), self._config(), mode="human")
        assert isinstance(pending, PendingSelection)
        assert len(pending.candidates) == 4
        assert pending.finalized is None

    def test_human_mode_allows_empty_pool(self):
        pending = select_principles(make_quandary(), self._pool(2), self._config(threshold=10.0), mode="human")
        assert pending.candidates == []

    def test_pending_token_is_deterministic(self):
        a = select_principles(make_quandary(), self._pool(4), self._config(), mode="human")
        b = select_principles(make_quandary(), self._pool(4), self._config(), mode="human")
        assert a.token == b.token


class TestConfirmSelection:
    def _pending(self, n=5) -> PendingSelection:
        pool = TestSelection()._pool(n)
        return select_principles(make_quandary(), pool, TestSelection()._config(), mode="human")

    def test_choose_two_pool_ids(self):
        pending = self._pending()
        selection = confirm_selection(pending, ["p2", "p0"], annotator="reviewer-1")
        assert [p.id for p in selection.principles] == ["p2", "p0"]
        assert selection.mode == "human"
        assert selection.selected_by == "reviewer-1"
        assert {p.provenance for p in selection.principles} == {"retrieved"}

    def test_choose_zero_rejected(self):
        with pytest.raises(ValueError):
            confirm_selection(self._pending(), [], annotator="r")

    def test_choose_four_rejected(self):
        with pytest.raises(ValueError):
            confirm_selection(self._pending(), ["p0", "p1", "p2", "p3"], annotator="r")

    def test_unknown_id_without_text_rejected(self):
        with pytest.raises(ValueError):
            confirm_selection(self._pending(), ["ghost"], annotator="r")

    def test_free_text_plus_pool_id(self):
        selection = confirm_selection(
            self._pending(),
            [{"text": "Always disclose conflicts of interest."}, "p1"],
            annotator="r",
        )
        assert len(selection.principles) == 2
        assert {p.provenance for p in selection.principles} == {"human", "retrieved"}

    def test_second_confirmation_fails(self):
        pending = self._pending()
        confirm_selection(pending, ["p0"], annotator="r")
        with pytest.raises(AlreadyFinalizedError):
            confirm_selection(pending, ["p1"], annotator="r")

    def test_trace_preserved_on_selection(self):
        pending = self._pending(4)
        selection = confirm_selection(pending, ["p0"], annotator="r")
        assert len(selection.trace) == 4


class TestSelectionType:
    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            PrincipleSelection(quandary_id="q", principles=(), mode="automatic")
        four = tuple(make_principle(f"p{i}", f"text number {i} entirely distinct {i}") for i in range(4))
        with pytest.raises(ValueError):
            PrincipleSelection(quandary_id="q", principles=four, mode="automatic")

    def test_duplicate_members_rejected(self):
        dup = (make_principle("a", "never lie"), make_principle("b", "never lie"))
        with pytest.raises(ValueError):
            PrincipleSelection(quandary_id="q", principles=dup, mode="automatic")

    def test_human_requires_selected_by(self):
        with pytest.raises(ValueError):
            PrincipleSelection(quandary_id="q", principles=(make_principle("a", "x y z"),), mode="human")

    def test_record_round_trip(self):
        selection = PrincipleSelection(
            quandary_id="q",
            principles=(make_principle("a", "never lie ever"),),
            mode="human",
            selected_by="r",
            trace=(scored("a", 0.5, text="never lie ever"),),
        )
        assert selection_from_record(selection_to_record(selection)) == selection


class TestPoolBuilding:
    def test_merges_three_sources_with_provenance(self):
        index = build_index(
            [
                make_principle("r1", "never lie to colleagues at work"),
                make_principle("r2", "report wrongdoing you witness"),
            ]
        )
        handcrafted = [Principle(id="hc1", text="Keep promises.", provenance="handcrafted")]
        client = CompletionClient(BackendConfig(kind="mock"))
        quandary = make_quandary(context=("I saw a colleague lie at work.",), question="Should I report it?")
        pool = build_candidate_pool(
            quandary, index=index, client=client, handcrafted=handcrafted, top_k=2, seed=0
        )
        provenances = {p.provenance for p in pool}
        assert {"retrieved", "generated", "handcrafted"} <= provenances
        assert [p.id for p in pool if p.provenance == "retrieved"] == ["r1", "r2"] or [
            p.id for p in pool if p.provenance == "retrieved"
        ] == ["r2", "r1"]

    def test_rank_candidates_breaks_ties_by_id(self):
        ranked = rank_candidates([scored("pb", 0.5), scored("pa", 0.5), scored("pc", 0.9)])
        assert [r.principle.id for r in ranked] == ["pc", "pa", "pb"]
