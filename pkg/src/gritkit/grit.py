"""Graph-boosted reranking: seed from the top, replace the tail.

Given a first-stage run of depth n, the top ceil(t * n) results act as
seeds. Graph neighbors of the seeds that are not already anywhere in the
run become candidates, scored by their summed edge weights. The bottom
floor(b * n) positions are handed over to the best candidates; everything
above keeps its rank and score untouched, and the output depth stays n.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping

from .graph import SimilarityGraph
from .models import RunEntry, RunList

SUM_OVER_MODES = ("seeds", "full")

# rank gap between synthetic tail scores; matches the 6-decimal run format
EPSILON = 1e-6


@dataclass(frozen=True)
class GritParams:
    t: float = 0.0  # fraction of top results used as seeds
    b: float = 0.0  # fraction of bottom results eligible for replacement

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must be in [0, 1], got {self.t}")
        if not 0.0 <= self.b < 1.0:
            raise ValueError(f"b must be in [0, 1), got {self.b}")


def _snap(x: float) -> float:
    # ceil/floor guard: 0.07 * 100 is 7.000000000000001 in binary floats
    return round(x, 9)


def seed_count(t: float, n: int) -> int:
    if t == 0.0:
        return 0
    return min(n, math.ceil(_snap(t * n)))


def replace_count(b: float, n: int) -> int:
    return math.floor(_snap(b * n))


def candidate_scores(
    initial: RunList,
    graph: SimilarityGraph,
    seeds: list[str],
    sum_over: str = "seeds",
) -> dict[str, int]:
    """Score graph candidates for one run.

    Candidates are neighbors of the seeds that do not appear anywhere in
    the initial run. With sum_over="seeds" a candidate's score sums its
    edges to the seeds; with "full" it sums edges to every product in the
    initial run.
    """
    if sum_over not in SUM_OVER_MODES:
        raise ValueError(f"sum_over must be one of {SUM_OVER_MODES}, got {sum_over!r}")
    in_run = set(initial.product_ids())
    scores: dict[str, int] = defaultdict(int)
    for pid in seeds:
        for q, w in graph.neighbors(pid):
            if q not in in_run:
                scores[q] += w
    if sum_over == "full":
        for q in list(scores):
            scores[q] = sum(w for nbr, w in graph.neighbors(q) if nbr in in_run)
    return dict(scores)


def grit_rerank(
    initial: RunList,
    graph: SimilarityGraph,
    params: GritParams,
    sum_over: str = "seeds",
) -> RunList:
    """Replace the run's tail with the best graph candidates.

    t = 0 or b = 0 leaves the run untouched. Candidates fill ranks
    n-k+1..n (k capped by how many candidates exist) ordered by summed
    edge weight, ties by ascending product id. Their synthetic scores
    step down from the last retained score by multiples of EPSILON.
    """
    n = len(initial)
    if n == 0:
        return initial
    seeds = [e.product_id for e in initial.entries[: seed_count(params.t, n)]]
    if not seeds:
        return initial
    scores = candidate_scores(initial, graph, seeds, sum_over)
    k = min(replace_count(params.b, n), len(scores))
    if k == 0:
        return initial
    best = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
    kept = initial.entries[: n - k]
    base = kept[-1].score if kept else 0.0
    tail = tuple(RunEntry(n - k + i, pid, base - i * EPSILON) for i, (pid, _w) in enumerate(best, start=1))
    return RunList(initial.query_id, kept + tail)


def grit_batch(
    runs: Mapping[str, RunList],
    graph: SimilarityGraph,
    params: GritParams,
    sum_over: str = "seeds",
) -> dict[str, RunList]:
    """Apply grit_rerank per query; queries absent from runs stay absent."""
    return {qid: grit_rerank(run, graph, params, sum_over) for qid, run in runs.items()}
