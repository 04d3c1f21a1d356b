"""Principle-guided answering of ethical quandary questions.

The pipeline has two stages: a principle provider (lexical retrieval plus
pluggable relevance scoring, with optional human review) and a multi-step
principle-guided generator over any text-completion backend, including a
deterministic mock. Around it sit the evaluation tools: n-gram and embedding
metrics, blinded A/B annotation bookkeeping, and stratified analysis.
"""

from .corpus import (
    CorpusStats,
    DatasetSplit,
    Principle,
    Quandary,
    ReferenceAnswer,
    compute_stats,
    ingest,
    load_principles,
    make_splits,
)
from .generation import (
    DISCLAIMER,
    FewShotExemplar,
    GeneratedAnswer,
    generate_answer,
    load_exemplars,
    load_templates,
    strip_paragraph_tags,
    wrap_disclaimer,
)
from .llm import BackendConfig, CompletionClient, CompletionRequest, CompletionResponse, mock_complete
from .metrics import (
    MetricReport,
    OneHotProvider,
    PairScore,
    bertscore,
    corpus_bleu,
    evaluate_corpus,
    rouge_l,
    rouge_n,
)
from .retrieval import InvertedIndex, ScoredPrinciple, build_index, normalize, retrieve_top_k
from .scoring import (
    PendingSelection,
    PrincipleSelection,
    ScorerConfig,
    confirm_selection,
    dedup,
    filter_by_threshold,
    score_lexical,
    score_remote,
    select_principles,
)
from .analysis import (
    AnnotationRecord,
    BlindedPair,
    CriterionReport,
    assign_blinding,
    conditional_rate,
    criterion_rate_by_stratum,
    stratify,
    success_rate,
    two_proportion_test,
)

__version__ = "0.1.0"
