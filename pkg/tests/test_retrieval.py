from __future__ import annotations

import math
import random

import pytest

from quandary.corpus import Principle, Quandary
from quandary.retrieval import (
    BM25_B,
    BM25_K1,
    EmptyIndexError,
    build_index,
    load_index,
    normalize,
    retrieve_top_k,
    save_index,
)

from conftest import make_principle, make_quandary

VOCAB = [
    "lie", "truth", "friend", "harm", "duty", "promise", "money", "family",
    "work", "trust", "secret", "report", "share", "risk", "help", "refuse",
]


def random_principles(n: int, seed: int, vocab=VOCAB) -> list[Principle]:
    rng = random.Random(seed)
    out = []
    for i in range(n):
        words = [rng.choice(vocab) for _ in range(rng.randint(2, 12))]
        out.append(make_principle(f"p{i:03d}", " ".join(words)))
    return out


def oracle_bm25_ranking(principles: list[Principle], query_text: str) -> list[tuple[str, float]]:
    """Independent BM25 written straight from the formula over raw token lists."""
    docs = {p.id: normalize(p.text) for p in principles}
    n_docs = len(docs)
    avgdl = sum(len(t) for t in docs.values()) / n_docs
    df: dict[str, int] = {}
    for tokens in docs.values():
        for term in set(tokens):
            df[term] = df.get(term, 0) + 1

    query = normalize(query_text)
    scores = {}
    for pid, tokens in docs.items():
        s = 0.0
        for term in query:
            tf = tokens.count(term)
            if tf == 0 or term not in df:
                continue
            idf = max(0.0, math.log((n_docs - df[term] + 0.5) / (df[term] + 0.5)))
            s += idf * tf * (BM25_K1 + 1) / (tf + BM25_K1 * (1 - BM25_B + BM25_B * len(tokens) / avgdl))
        scores[pid] = s
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


class TestNormalize:
    def test_empty(self):
        assert normalize("") == []

    def test_apostrophe_and_punctuation(self):
        assert normalize("It's wrong to lie.") == ["it", "s", "wrong", "to", "lie"]

    def test_digits_split_from_words(self):
        assert normalize("Covid-19") == ["covid", "19"]


class TestBuildIndex:
    def test_single_document_statistics(self):
        index = build_index([make_principle("p1", "never lie")])
        assert index.document_frequency("never") == 1
        assert index.avg_doc_length == 2

    def test_duplicate_texts_count_twice(self):
        index = build_index([make_principle("p1", "never lie"), make_principle("p2", "never lie")])
        assert index.document_frequency("never") == 2
        assert index.document_frequency("lie") == 2

    def test_fifty_doc_df_table_matches_brute_force(self):
        principles = random_principles(50, seed=3)
        index = build_index(principles)
        # Oracle: count documents containing each term directly from the texts.
        all_terms = {t for p in principles for t in normalize(p.text)}
        for term in all_terms:
            expected = sum(1 for p in principles if term in normalize(p.text))
            assert index.document_frequency(term) == expected
        assert index.avg_doc_length == pytest.approx(
            sum(len(normalize(p.text)) for p in principles) / 50
        )

    def test_empty_list_raises(self):
        with pytest.raises(EmptyIndexError):
            build_index([])

    def test_duplicate_ids_raise(self):
        from quandary.retrieval import RetrievalError

        with pytest.raises(RetrievalError):
            build_index([make_principle("p1", "a"), make_principle("p1", "b")])


class TestRetrieve:
    def test_k_exceeding_corpus_returns_corpus(self):
        index = build_index(random_principles(3, seed=1))
        results = retrieve_top_k(index, make_quandary(), k=10)
        assert len(results) == 3

    def test_verbatim_principle_ranks_first(self):
        question = "should i tell my friend the truth about the broken promise"
        principles = [
            make_principle("p1", "unrelated statement about gardening tulips"),
            make_principle("p2", question),
            make_principle("p3", "completely different words entirely"),
        ]
        index = build_index(principles)
        results = retrieve_top_k(index, make_quandary(context=("Context here.",), question=question), k=3)
        assert results[0].principle.id == "p2"

    def test_hundred_doc_top_k_equals_exhaustive_oracle(self):
        principles = random_principles(100, seed=11)
        index = build_index(principles)
        rng = random.Random(5)
        for _ in range(20):
            q_words = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 8)))
            quandary = make_quandary(context=(q_words + ".",), question=rng.choice(VOCAB) + "?")
            expected = oracle_bm25_ranking(principles, quandary.full_text())
            got = retrieve_top_k(index, quandary, k=10)
            assert [r.principle.id for r in got] == [pid for pid, _ in expected[:10]]
            for r, (_, score) in zip(got, expected):
                assert r.score == pytest.approx(score, abs=1e-12)

    def test_result_is_prefix_of_full_ranking(self):
        principles = random_principles(30, seed=9)
        index = build_index(principles)
        quandary = make_quandary(context=("trust and duty matter.",), question="should i report the harm?")
        full = [r.principle.id for r in retrieve_top_k(index, quandary, k=30)]
        for k in range(1, 31):
            assert [r.principle.id for r in retrieve_top_k(index, quandary, k=k)] == full[:k]

    def test_scores_non_negative_and_finite(self):
        index = build_index(random_principles(40, seed=21))
        quandary = make_quandary(context=("lie truth friend.",), question="harm?")
        for r in retrieve_top_k(index, quandary, k=40):
            assert r.score >= 0.0 and math.isfinite(r.score)
            assert r.polarity == "higher_better"

    def test_adding_document_preserves_equal_df_pair_order(self):
        # p1 and p2 contain the same query terms (equal df pattern); adding an
        # unrelated document rescales IDF uniformly and must not swap them.
        p1 = make_principle("p1", "lie lie truth")
        p2 = make_principle("p2", "lie truth truth truth")
        others = [make_principle(f"o{i}", "promise duty work") for i in range(3)]
        quandary = make_quandary(context=("about a lie.",), question="tell the truth?")

        before = retrieve_top_k(build_index([p1, p2, *others]), quandary, k=2)
        after = retrieve_top_k(
            build_index([p1, p2, *others, make_principle("new", "gardening entirely unrelated")]),
            quandary,
            k=2,
        )
        assert [r.principle.id for r in before] == [r.principle.id for r in after]

    def test_k_below_one_raises(self):
        index = build_index(random_principles(3, seed=1))
        with pytest.raises(ValueError):
            retrieve_top_k(index, make_quandary(), k=0)


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        principles = random_principles(25, seed=13)
        index = build_index(principles)
        path = tmp_path / "index.jsonl"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.doc_count == index.doc_count
        assert loaded.postings == index.postings
        assert loaded.doc_length == index.doc_length
        assert loaded.avg_doc_length == index.avg_doc_length

    def test_wrong_format_rejected(self, tmp_path):
        from quandary.retrieval import RetrievalError

        path = tmp_path / "bad.jsonl"
        path.write_text('{"format": "something-else", "version": 1}\n')
        with pytest.raises(RetrievalError):
            load_index(path)
