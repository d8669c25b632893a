"""Product-product similarity graph built from co-relevance judgments.

Two products are connected when at least one training query judges both as
relevant (label E, S, or C; I never contributes). Each such query adds the
weight-matrix value for the pair's labels to the edge weight, accumulated
across queries. The graph is undirected and weights are positive integers.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import FormatError
from .models import Judgment, JudgmentSet, RelevanceLabel

_CONNECTING = (RelevanceLabel.EXACT, RelevanceLabel.SUBSTITUTE, RelevanceLabel.COMPLEMENT)

# default pair weights: exact/exact strongest, complement ties weakest
_DEFAULT_WEIGHTS = {
    ("E", "E"): 3,
    ("E", "S"): 2,
    ("C", "E"): 1,
    ("S", "S"): 2,
    ("C", "S"): 1,
    ("C", "C"): 1,
}


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric label-pair weights over E/S/C."""

    pairs: tuple[tuple[tuple[str, str], int], ...]

    def __post_init__(self) -> None:
        mapping = dict(self.pairs)
        expected = {_pair_key(a.value, b.value) for a in _CONNECTING for b in _CONNECTING}
        if set(mapping) != expected:
            raise ValueError(f"weight matrix must define exactly the label pairs {sorted(expected)}")
        for key, weight in mapping.items():
            if not isinstance(weight, int) or weight < 1:
                raise ValueError(f"weight for {key} must be a positive integer, got {weight!r}")

    @classmethod
    def default(cls) -> "WeightMatrix":
        return cls(tuple(sorted(_DEFAULT_WEIGHTS.items())))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, int]) -> "WeightMatrix":
        """Accept keys like "EE", "ES", "SC" (order-insensitive)."""
        pairs = {}
        for key, weight in mapping.items():
            letters = [ch for ch in key.upper() if ch.isalpha()]
            if len(letters) != 2:
                raise ValueError(f"weight key must name two labels, got {key!r}")
            pairs[_pair_key(letters[0], letters[1])] = int(weight)
        return cls(tuple(sorted(pairs.items())))

    def to_mapping(self) -> dict[str, int]:
        return {f"{a}{b}": w for (a, b), w in self.pairs}

    def weight(self, a: RelevanceLabel, b: RelevanceLabel) -> int:
        return dict(self.pairs)[_pair_key(a.value, b.value)]


class SimilarityGraph:
    """Undirected weighted product graph, immutable once constructed."""

    def __init__(self, edges: Iterable[tuple[str, str, int]]):
        adj: dict[str, dict[str, int]] = defaultdict(dict)
        count = 0
        for p, q, w in edges:
            if p == q:
                raise ValueError(f"self edge on {p}")
            if w < 1:
                raise ValueError(f"edge {p}-{q} has non-positive weight {w}")
            if q in adj[p]:
                raise ValueError(f"edge {p}-{q} listed twice")
            adj[p][q] = w
            adj[q][p] = w
            count += 1
        self._adj = dict(adj)
        # neighbor lists are served sorted by weight desc, then id asc
        self._sorted = {
            p: sorted(nbrs.items(), key=lambda item: (-item[1], item[0])) for p, nbrs in self._adj.items()
        }
        self._edge_count = count

    @property
    def node_count(self) -> int:
        return len(self._adj)

    @property
    def edge_count(self) -> int:
        return self._edge_count

    def __contains__(self, product_id: str) -> bool:
        return product_id in self._adj

    def neighbors(self, product_id: str, limit: int | None = None) -> list[tuple[str, int]]:
        """Neighbors of a product, heaviest first; [] for unknown products."""
        result = self._sorted.get(product_id, [])
        return result[:limit] if limit is not None else list(result)

    def weight(self, p: str, q: str) -> int:
        """Edge weight, 0 when the pair is not connected."""
        return self._adj.get(p, {}).get(q, 0)

    def edges(self) -> Iterator[tuple[str, str, int]]:
        """All undirected edges as (p, q, w) with p < q, sorted by (p, q)."""
        for p in sorted(self._adj):
            for q, w in sorted(self._adj[p].items()):
                if p < q:
                    yield p, q, w


def build_graph(
    train: JudgmentSet | Iterable[Judgment],
    weights: WeightMatrix | None = None,
    min_weight: int | None = None,
) -> SimilarityGraph:
    """Accumulate pair weights over all train queries.

    Per query, every unordered pair of E/S/C-judged products contributes
    once; contributions add up across queries. min_weight, when given,
    drops finished edges lighter than the threshold.
    """
    wm = weights or WeightMatrix.default()
    judgments = train.judgments if isinstance(train, JudgmentSet) else list(train)
    by_query: dict[str, list[tuple[str, RelevanceLabel]]] = defaultdict(list)
    for j in judgments:
        if j.split != "train":
            raise ValueError(f"graph is built from the train split only, got a {j.split} judgment for query {j.query_id}")
        if j.label in _CONNECTING:
            by_query[j.query_id].append((j.product_id, j.label))
    acc: dict[tuple[str, str], int] = defaultdict(int)
    for products in by_query.values():
        for (p, lp), (q, lq) in combinations(products, 2):
            acc[_pair_key(p, q)] += wm.weight(lp, lq)
    if min_weight is not None:
        acc = {k: w for k, w in acc.items() if w >= min_weight}
    return SimilarityGraph((p, q, w) for (p, q), w in acc.items())


def save_graph(graph: SimilarityGraph, path: str | Path) -> None:
    """One tab-separated "p q w" line per edge, p < q, sorted by (p, q)."""
    with open(path, "w", encoding="utf-8") as fh:
        for p, q, w in graph.edges():
            fh.write(f"{p}\t{q}\t{w}\n")


def load_graph(path: str | Path) -> SimilarityGraph:
    source = str(path)
    edges = []
    for lineno, line in enumerate(open(path, "r", encoding="utf-8"), start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 3:
            raise FormatError(f"expected 3 tab-separated fields, got {len(fields)}", source=source, line=lineno)
        p, q, w_s = fields
        try:
            w = int(w_s)
        except ValueError:
            raise FormatError(f"bad edge weight {w_s!r}", source=source, line=lineno) from None
        edges.append((p, q, w))
    try:
        return SimilarityGraph(edges)
    except ValueError as exc:
        raise FormatError(str(exc), source=source) from None


def graph_stats(graph: SimilarityGraph) -> dict:
    """Node/edge counts, max degree, and the edge-weight histogram."""
    histogram: dict[int, int] = defaultdict(int)
    for _p, _q, w in graph.edges():
        histogram[w] += 1
    max_degree = max((len(graph.neighbors(p)) for p in graph._adj), default=0)
    return {
        "node_count": graph.node_count,
        "edge_count": graph.edge_count,
        "max_degree": max_degree,
        "weight_histogram": dict(sorted(histogram.items())),
    }
