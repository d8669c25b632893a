"""Lexical retrieval with graph-boosted reranking.

BM25 first stage over a product catalog, a product-product similarity
graph accumulated from co-relevance judgments, tail-replacement reranking
seeded from the top of each run, recall evaluation with paired
significance tests, and task-oriented query generation.
"""

__version__ = "0.1.0"

from .bm25 import Bm25Params, InvertedIndex, bm25_search, build_index, load_index, save_index, tokenize
from .evaluation import (
    EvalReport,
    TTestResult,
    evaluate,
    paired_t_test,
    recall_at_k,
    sweep,
)
from .graph import SimilarityGraph, WeightMatrix, build_graph, graph_stats, load_graph, save_graph
from .grit import GritParams, grit_batch, grit_rerank
from .models import Judgment, JudgmentSet, ProductDoc, Query, RelevanceLabel, RunEntry, RunList
from .querygen import (
    GenerationRecord,
    HttpChatBackend,
    MockBackend,
    PromptTemplates,
    generate_benchmark,
    generate_task_query,
    validate_equivalence,
)

__all__ = [
    "__version__",
    "Bm25Params",
    "InvertedIndex",
    "bm25_search",
    "build_index",
    "load_index",
    "save_index",
    "tokenize",
    "EvalReport",
    "TTestResult",
    "evaluate",
    "paired_t_test",
    "recall_at_k",
    "sweep",
    "SimilarityGraph",
    "WeightMatrix",
    "build_graph",
    "graph_stats",
    "load_graph",
    "save_graph",
    "GritParams",
    "grit_batch",
    "grit_rerank",
    "Judgment",
    "JudgmentSet",
    "ProductDoc",
    "Query",
    "RelevanceLabel",
    "RunEntry",
    "RunList",
    "GenerationRecord",
    "HttpChatBackend",
    "MockBackend",
    "PromptTemplates",
    "generate_benchmark",
    "generate_task_query",
    "validate_equivalence",
]
