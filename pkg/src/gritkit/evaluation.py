"""Recall evaluation, paired significance testing, and parameter sweeps."""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import MismatchedQuerySets, TooFewSamples
from .graph import SimilarityGraph
from .grit import GritParams, grit_batch
from .models import JudgmentSet, RelevanceLabel, RunList
from .stats import t_two_sided_p

DEFAULT_RELEVANT = frozenset({RelevanceLabel.EXACT})
SIGNIFICANCE_LEVEL = 0.05
ZERO_RELEVANT_MODES = ("exclude", "one")


def make_relevant_set(labels: Iterable[RelevanceLabel | str]) -> frozenset[RelevanceLabel]:
    """Validate a relevant-label set: non-empty, subset of {E, S, C}."""
    parsed = frozenset(l if isinstance(l, RelevanceLabel) else RelevanceLabel.parse(l) for l in labels)
    if not parsed:
        raise ValueError("relevant set must not be empty")
    if RelevanceLabel.IRRELEVANT in parsed:
        raise ValueError("label I cannot be part of the relevant set")
    return parsed


def parse_relevant_labels(spec: str) -> frozenset[RelevanceLabel]:
    """Parse "E", "E,S", "ESC" and the like into a relevant-label set."""
    tokens = [ch for ch in spec.upper() if ch.isalpha()]
    return make_relevant_set(tokens)


def recall_at_k(
    run: RunList,
    qrels: Mapping[str, RelevanceLabel],
    k: int,
    relevant: frozenset[RelevanceLabel] = DEFAULT_RELEVANT,
) -> float | None:
    """Fraction of the query's relevant products inside the top k.

    Returns None when the query has no relevant product at all (recall is
    undefined there, not zero).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    relevant_ids = {pid for pid, label in qrels.items() if label in relevant}
    if not relevant_ids:
        return None
    top = {e.product_id for e in run.entries[:k]}
    return len(relevant_ids & top) / len(relevant_ids)


@dataclass(frozen=True)
class EvalReport:
    k: int
    relevant: frozenset[RelevanceLabel]
    per_query: dict[str, float]
    mean: float | None  # None flags an empty evaluation
    excluded: int

    @property
    def evaluated(self) -> int:
        return len(self.per_query)


def evaluate(
    runs: Mapping[str, RunList],
    judgments: JudgmentSet,
    k: int,
    relevant: frozenset[RelevanceLabel] = DEFAULT_RELEVANT,
    zero_relevant: str = "exclude",
) -> EvalReport:
    """Mean recall at k over the judged queries.

    Judged queries missing from runs score 0. Queries without any relevant
    product are excluded from the mean by default (the excluded count is
    surfaced); zero_relevant="one" scores them 1.0 instead. Pass a
    judgment set already restricted to the evaluation split.
    """
    if zero_relevant not in ZERO_RELEVANT_MODES:
        raise ValueError(f"zero_relevant must be one of {ZERO_RELEVANT_MODES}, got {zero_relevant!r}")
    per_query: dict[str, float] = {}
    excluded = 0
    labels = judgments.labels_by_query()
    empty = RunList("placeholder")
    for qid in sorted(labels):
        run = runs.get(qid)
        score = recall_at_k(run if run is not None else empty, labels[qid], k, relevant)
        if score is None:
            if zero_relevant == "one":
                per_query[qid] = 1.0
            else:
                excluded += 1
            continue
        per_query[qid] = score
    mean = statistics.fmean(per_query.values()) if per_query else None
    return EvalReport(k, relevant, per_query, mean, excluded)


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    df: int
    p_value: float


def paired_t_test(a: Mapping[str, float], b: Mapping[str, float]) -> TTestResult:
    """Two-sided paired t-test on per-query metric maps, pairing by query.

    Differences are b minus a, so a positive statistic means b improved
    over a. Conventions for degenerate inputs: all differences zero gives
    p = 1.0; a constant non-zero difference gives p = 0.0.
    """
    if set(a) != set(b):
        only_a = sorted(set(a) - set(b))[:3]
        only_b = sorted(set(b) - set(a))[:3]
        raise MismatchedQuerySets(f"query sets differ (a-only {only_a}, b-only {only_b})")
    qids = sorted(a)
    if len(qids) < 2:
        raise TooFewSamples(f"paired t-test needs at least 2 queries, got {len(qids)}")
    diffs = [b[q] - a[q] for q in qids]
    m = len(diffs)
    mean = statistics.fmean(diffs)
    sd = statistics.stdev(diffs)
    df = m - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, df, 1.0)
        return TTestResult(math.copysign(math.inf, mean), df, 0.0)
    t = mean * math.sqrt(m) / sd
    return TTestResult(t, df, t_two_sided_p(t, df))


@dataclass(frozen=True)
class SweepCell:
    method: str
    t: float
    b: float
    k: int
    recall: float | None
    improvement_pct: float
    p_value: float
    significant: bool


@dataclass(frozen=True)
class SweepTable:
    method: str
    t_values: tuple[float, ...]
    b_values: tuple[float, ...]
    k_values: tuple[int, ...]
    baselines: dict[int, EvalReport]
    cells: tuple[SweepCell, ...]


def _improvement_pct(base: float, value: float) -> float:
    if base == 0.0:
        return math.inf if value > 0.0 else 0.0
    return (value - base) / base * 100.0


def sweep(
    runs: Mapping[str, RunList],
    graph: SimilarityGraph,
    judgments: JudgmentSet,
    t_values: Iterable[float],
    b_values: Iterable[float],
    k_values: Iterable[int],
    relevant: frozenset[RelevanceLabel] = DEFAULT_RELEVANT,
    per_depth: bool = True,
    sum_over: str = "seeds",
    method: str = "run",
    zero_relevant: str = "exclude",
) -> SweepTable:
    """Evaluate the rerank over a (t, b, k) grid against the unmodified run.

    With per_depth on, R@k is measured on a run reranked at depth n = k
    (the input runs truncated to k first); otherwise the full-depth run is
    reranked once per (t, b) and only the evaluation depth varies. Each
    cell carries mean recall, percent improvement over the unmodified
    baseline, and the paired-t p-value against it, which needs at least
    two evaluable queries.
    """
    ts = tuple(sorted(set(t_values)))
    bs = tuple(sorted(set(b_values)))
    ks = tuple(sorted(set(k_values)))
    if not ts or not bs or not ks:
        raise ValueError("t_values, b_values, and k_values must all be non-empty")

    truncated = {k: {qid: run.truncated(k) for qid, run in runs.items()} for k in ks} if per_depth else {}
    baselines = {
        k: evaluate(truncated[k] if per_depth else runs, judgments, k, relevant, zero_relevant) for k in ks
    }

    cells: list[SweepCell] = []
    for t in ts:
        for b in bs:
            params = GritParams(t, b)
            reranked_full = None if per_depth else grit_batch(runs, graph, params, sum_over)
            for k in ks:
                base = baselines[k]
                source = grit_batch(truncated[k], graph, params, sum_over) if per_depth else reranked_full
                report = evaluate(source, judgments, k, relevant, zero_relevant)
                if base.mean is None:
                    cells.append(SweepCell(method, t, b, k, None, math.nan, math.nan, False))
                    continue
                result = paired_t_test(base.per_query, report.per_query)
                cells.append(
                    SweepCell(
                        method,
                        t,
                        b,
                        k,
                        report.mean,
                        _improvement_pct(base.mean, report.mean),
                        result.p_value,
                        result.p_value < SIGNIFICANCE_LEVEL,
                    )
                )
    return SweepTable(method, ts, bs, ks, baselines, tuple(cells))


def _fmt_float(value: float, spec: str) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, spec)


def emit_report(table: SweepTable, fmt: str, path: str | Path) -> None:
    if fmt == "csv":
        _emit_csv(table, path)
    elif fmt == "markdown":
        _emit_markdown(table, path)
    else:
        raise ValueError(f"unknown report format {fmt!r}, expected csv or markdown")


def _emit_csv(table: SweepTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "t", "b", "k", "recall", "improvement_pct", "p_value", "significant"])
        for c in table.cells:
            writer.writerow(
                [
                    c.method,
                    format(c.t, "g"),
                    format(c.b, "g"),
                    c.k,
                    "" if c.recall is None else format(c.recall, ".6f"),
                    _fmt_float(c.improvement_pct, ".4f"),
                    _fmt_float(c.p_value, ".6g"),
                    "true" if c.significant else "false",
                ]
            )


def _markdown_cell(recall: float | None, significant: bool, best: bool) -> str:
    if recall is None:
        return "-"
    text = format(recall, ".4f")
    if significant:
        text += "†"
    return f"**{text}**" if best else text


def _emit_markdown(table: SweepTable, path: str | Path) -> None:
    """One table per t value, mirroring rows=b, columns=recall depth."""
    by_tb: dict[tuple[float, float], dict[int, SweepCell]] = {}
    for c in table.cells:
        by_tb.setdefault((c.t, c.b), {})[c.k] = c
    lines: list[str] = []
    for t in table.t_values:
        lines.append(f"### t = {t:g}")
        lines.append("")
        header = ["method", "b"] + [f"R@{k}" for k in table.k_values]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "|".join([" --- "] * len(header)) + "|")
        # column best over the baseline row and every b row of this table
        best: dict[int, float] = {}
        for k in table.k_values:
            values = [table.baselines[k].mean] + [by_tb[(t, b)][k].recall for b in table.b_values]
            present = [v for v in values if v is not None]
            if present:
                best[k] = max(present)
        base_cells = [
            _markdown_cell(table.baselines[k].mean, False, table.baselines[k].mean == best.get(k))
            for k in table.k_values
        ]
        lines.append("| " + " | ".join([table.method, "-"] + base_cells) + " |")
        for b in table.b_values:
            row = [f"{table.method}+grit", format(b, "g")]
            for k in table.k_values:
                cell = by_tb[(t, b)][k]
                row.append(_markdown_cell(cell.recall, cell.significant, cell.recall == best.get(k)))
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def write_per_query_recall(report: EvalReport, path: str | Path) -> None:
    """TSV dump: query_id and recall, one row per evaluated query."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("query_id\trecall\n")
        for qid in sorted(report.per_query):
            fh.write(f"{qid}\t{report.per_query[qid]:.6f}\n")
