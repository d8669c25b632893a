"""Command-line pipeline: ingest, index, build-graph, search, grit, eval, sweep, gen-queries.

Exit codes: 0 success, 1 data error (malformed or inconsistent input
files), 2 usage or configuration error. Progress and summaries go to
stderr; every command leaves an effective-config sidecar next to its
primary output.
"""

from __future__ import annotations

import csv
import functools
import sys
from pathlib import Path

import click
import yaml

from . import __version__
from .bm25 import Bm25Params, build_index, load_index, save_index, search_all
from .config import apply_overrides, load_config, write_sidecar
from .errors import BackendError, ConfigError, DataError
from .evaluation import (
    SIGNIFICANCE_LEVEL,
    evaluate,
    emit_report,
    paired_t_test,
    parse_relevant_labels,
    sweep,
    write_per_query_recall,
)
from .graph import WeightMatrix, build_graph, graph_stats, load_graph, save_graph
from .grit import SUM_OVER_MODES, GritParams, grit_batch
from .ingest import (
    parse_judgments,
    parse_products,
    parse_queries,
    read_run_file,
    sniff_run_tag,
    write_catalog_tsv,
    write_judgments_tsv,
    write_run_file,
)
from .models import SPLITS
from .querygen import HttpChatBackend, MockBackend, PromptTemplates, generate_benchmark


def guarded(fn):
    """Map library exceptions onto the exit-code contract."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (DataError, BackendError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except (ConfigError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise click.UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise click.UsageError(f"expected comma-separated integers, got {text!r}") from None


_config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
    help="YAML config file; flags override file values.",
)
_split_choice = click.Choice(SPLITS)


@click.group()
@click.version_option(__version__, prog_name="gritkit")
def main() -> None:
    """Lexical retrieval with graph-boosted reranking, end to end."""


@main.command()
@click.option("--catalog", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--judgments", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--catalog-format", type=click.Choice(["tsv", "jsonl"]), default=None,
              help="Default: by file extension.")
@click.option("--locale", default=None, help="Keep only judgments with this product locale.")
@click.option("--split", type=_split_choice, default=None, help="Keep only this judgment split.")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@_config_option
@guarded
def ingest(catalog, judgments, catalog_format, locale, split, out_dir, config_path) -> None:
    """Validate inputs and write the canonical catalog/judgments TSVs."""
    if catalog is None and judgments is None:
        raise click.UsageError("provide --catalog and/or --judgments")
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if catalog is not None:
        docs = parse_products(catalog, catalog_format)
        write_catalog_tsv(docs, out / "catalog.tsv")
        click.echo(f"catalog: {len(docs)} products -> {out / 'catalog.tsv'}", err=True)
    if judgments is not None:
        jset = parse_judgments(judgments, split_filter=split, locale_filter=locale)
        write_judgments_tsv(jset, out / "judgments.tsv")
        click.echo(
            f"judgments: {len(jset)} rows over {len(jset.queries)} queries -> {out / 'judgments.tsv'}",
            err=True,
        )
    write_sidecar(cfg, out / "ingest", "ingest")


@main.command()
@click.option("--catalog", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--catalog-format", type=click.Choice(["tsv", "jsonl"]), default=None)
@click.option("--fields", default=None, help="Comma-separated catalog fields to index.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_config_option
@guarded
def index(catalog, catalog_format, fields, out, config_path) -> None:
    """Build the inverted index and persist it."""
    cfg = load_config(config_path)
    cfg = apply_overrides(cfg, "bm25", fields=fields.split(",") if fields else None)
    docs = parse_products(catalog, catalog_format)
    idx = build_index(docs, cfg["bm25"]["fields"])
    save_index(idx, out)
    write_sidecar(cfg, out, "index")
    click.echo(f"index: {idx.doc_count} docs, {idx.term_count} terms -> {out}", err=True)


@main.command("build-graph")
@click.option("--judgments", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--split", type=_split_choice, default=None, help="Judgment split to use (default train).")
@click.option("--weights", "weights_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML mapping of label pairs to weights, e.g. {EE: 3, ES: 2, ...}.")
@click.option("--min-weight", type=int, default=None, help="Drop edges lighter than this.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_config_option
@guarded
def build_graph_cmd(judgments, split, weights_path, min_weight, out, config_path) -> None:
    """Build the product similarity graph from train judgments."""
    cfg = load_config(config_path)
    if weights_path is not None:
        with open(weights_path, "r", encoding="utf-8") as fh:
            weights_mapping = yaml.safe_load(fh)
        if not isinstance(weights_mapping, dict):
            raise ConfigError(f"{weights_path}: weights file must be a mapping")
        cfg = apply_overrides(cfg, "graph", weights=weights_mapping)
    cfg = apply_overrides(cfg, "graph", split=split, min_weight=min_weight)
    try:
        matrix = WeightMatrix.from_mapping(cfg["graph"]["weights"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    jset = parse_judgments(judgments, split_filter=cfg["graph"]["split"])
    graph = build_graph(jset, matrix, cfg["graph"]["min_weight"])
    save_graph(graph, out)
    write_sidecar(cfg, out, "build-graph")
    stats = graph_stats(graph)
    click.echo(
        f"graph: {stats['node_count']} nodes, {stats['edge_count']} edges, "
        f"max degree {stats['max_degree']} -> {out}",
        err=True,
    )


@main.command()
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--catalog", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--catalog-format", type=click.Choice(["tsv", "jsonl"]), default=None)
@click.option("--queries", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--query-column", default="query", show_default=True)
@click.option("-n", "--depth", "n", type=int, default=None, help="Results per query (default 500).")
@click.option("--k1", type=float, default=None)
@click.option("--b", type=float, default=None)
@click.option("--tag", default=None, help="Run tag (default bm25).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_config_option
@guarded
def search(index_path, catalog, catalog_format, queries, query_column, n, k1, b, tag, out, config_path) -> None:
    """Run BM25 retrieval and write a run file."""
    if (index_path is None) == (catalog is None):
        raise click.UsageError("provide exactly one of --index or --catalog")
    cfg = load_config(config_path)
    cfg = apply_overrides(cfg, "bm25", k1=k1, b=b)
    cfg = apply_overrides(cfg, "search", n=n, tag=tag)
    idx = load_index(index_path) if index_path else build_index(parse_products(catalog, catalog_format),
                                                                cfg["bm25"]["fields"])
    try:
        params = Bm25Params(cfg["bm25"]["k1"], cfg["bm25"]["b"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    qlist = parse_queries(queries, query_column)
    runs = search_all(idx, qlist, cfg["search"]["n"], params)
    write_run_file(runs, cfg["search"]["tag"], out)
    write_sidecar(cfg, out, "search")
    empty = sum(1 for r in runs.values() if len(r) == 0)
    click.echo(f"search: {len(runs)} queries, {empty} with no matches -> {out}", err=True)


@main.command()
@click.option("--run", "run_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--t", type=float, default=None, help="Seed fraction (default 0.02).")
@click.option("--b", type=float, default=None, help="Replacement fraction (default 0.3).")
@click.option("--sum-over", type=click.Choice(SUM_OVER_MODES), default=None,
              help="Candidate scores sum edges to the seeds only, or to the whole run.")
@click.option("--tag", default=None, help="Run tag for the output (default: input file's tag).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_config_option
@guarded
def grit(run_path, graph_path, t, b, sum_over, tag, out, config_path) -> None:
    """Rerank a run with the similarity graph."""
    cfg = load_config(config_path)
    cfg = apply_overrides(cfg, "grit", t=t, b=b, sum_over=sum_over)
    try:
        params = GritParams(cfg["grit"]["t"], cfg["grit"]["b"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    runs = read_run_file(run_path)
    graph = load_graph(graph_path)
    boosted = grit_batch(runs, graph, params, cfg["grit"]["sum_over"])
    out_tag = tag or sniff_run_tag(run_path) or "grit"
    write_run_file(boosted, out_tag, out)
    write_sidecar(cfg, out, "grit")
    changed = sum(1 for qid in runs if boosted[qid] != runs[qid])
    click.echo(f"grit: t={params.t:g} b={params.b:g}, {changed}/{len(runs)} runs changed -> {out}", err=True)


def _eval_rows(run_path, compare_path, judgments_path, split, k_values, relevant, zero_relevant):
    runs = read_run_file(run_path)
    jset = parse_judgments(judgments_path, split_filter=split)
    baseline_runs = read_run_file(compare_path) if compare_path else None
    rows = []
    per_query = {}
    for k in k_values:
        report = evaluate(runs, jset, k, relevant, zero_relevant)
        per_query[k] = report
        row = {
            "k": k,
            "recall": report.mean,
            "evaluated": report.evaluated,
            "excluded": report.excluded,
            "baseline": None,
            "improvement_pct": None,
            "t_stat": None,
            "p_value": None,
            "significant": None,
        }
        if baseline_runs is not None:
            base = evaluate(baseline_runs, jset, k, relevant, zero_relevant)
            result = paired_t_test(base.per_query, report.per_query)
            row["baseline"] = base.mean
            if base.mean not in (None, 0.0) and report.mean is not None:
                row["improvement_pct"] = (report.mean - base.mean) / base.mean * 100.0
            row["t_stat"] = result.t_stat
            row["p_value"] = result.p_value
            row["significant"] = result.p_value < SIGNIFICANCE_LEVEL
        rows.append(row)
    return rows, per_query


def _write_eval_report(rows, method, fmt, out) -> None:
    columns = ["method", "k", "recall", "evaluated", "excluded",
               "baseline", "improvement_pct", "t_stat", "p_value", "significant"]

    def cell(row, name):
        value = row.get(name)
        if value is None:
            return ""
        if name in ("recall", "baseline"):
            return format(value, ".6f")
        if name in ("improvement_pct", "t_stat"):
            return format(value, ".4f")
        if name == "p_value":
            return format(value, ".6g")
        if name == "significant":
            return "true" if value else "false"
        return str(value)

    if fmt == "csv":
        with open(out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([method] + [cell(row, name) for name in columns[1:]])
    else:
        lines = ["| " + " | ".join(columns) + " |", "|" + "|".join([" --- "] * len(columns)) + "|"]
        for row in rows:
            rec = cell(row, "recall")
            if row.get("significant"):
                rec += "†"
            cells = [method, str(row["k"]), rec] + [cell(row, name) for name in columns[3:]]
            lines.append("| " + " | ".join(cells) + " |")
        Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")


@main.command("eval")
@click.option("--run", "run_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--judgments", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--split", type=_split_choice, default=None, help="Judgment split (default test).")
@click.option("--k", "k_values", default=None, help="Comma-separated cutoffs (default 500,1000,1500,2000).")
@click.option("--relevant", default=None, help="Labels counted relevant, e.g. E or E,S (default E).")
@click.option("--zero-relevant", type=click.Choice(["exclude", "one"]), default=None)
@click.option("--compare", "compare_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Baseline run file; adds improvement and paired-t columns.")
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="csv", show_default=True)
@click.option("--per-query-out", type=click.Path(dir_okay=False), default=None,
              help="Dump per-query recall at the first cutoff to this TSV.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_config_option
@guarded
def eval_cmd(run_path, judgments, split, k_values, relevant, zero_relevant, compare_path,
             fmt, per_query_out, out, config_path) -> None:
    """Score a run file against judgments."""
    cfg = load_config(config_path)
    cfg = apply_overrides(
        cfg, "eval",
        split=split,
        relevant=relevant,
        zero_relevant=zero_relevant,
        k_values=_ints(k_values) if k_values else None,
    )
    section = cfg["eval"]
    labels = parse_relevant_labels(section["relevant"])
    rows, reports = _eval_rows(run_path, compare_path, judgments, section["split"],
                               section["k_values"], labels, section["zero_relevant"])
    method = sniff_run_tag(run_path) or Path(run_path).stem
    _write_eval_report(rows, method, fmt, out)
    if per_query_out:
        write_per_query_recall(reports[section["k_values"][0]], per_query_out)
    write_sidecar(cfg, out, "eval")
    for row in rows:
        mean = "undefined" if row["recall"] is None else format(row["recall"], ".6f")
        click.echo(f"eval: R@{row['k']} = {mean} over {row['evaluated']} queries "
                   f"({row['excluded']} excluded)", err=True)


@main.command("sweep")
@click.option("--run", "run_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--judgments", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--split", type=_split_choice, default=None, help="Judgment split (default test).")
@click.option("--t-values", default=None, help="Comma-separated (default 0.000..0.040 step 0.005).")
@click.option("--b-values", default=None, help="Comma-separated (default 0.1,0.2,0.3).")
@click.option("--k-values", default=None, help="Comma-separated (default 500,1000,1500,2000).")
@click.option("--relevant", default=None)
@click.option("--zero-relevant", type=click.Choice(["exclude", "one"]), default=None)
@click.option("--per-depth/--no-per-depth", "per_depth", default=None,
              help="Rerank at depth n=k per cutoff (default on) or once at full depth.")
@click.option("--sum-over", type=click.Choice(SUM_OVER_MODES), default=None)
@click.option("--method", default=None, help="Row label (default: run file's tag).")
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_config_option
@guarded
def sweep_cmd(run_path, graph_path, judgments, split, t_values, b_values, k_values, relevant,
              zero_relevant, per_depth, sum_over, method, fmt, out, config_path) -> None:
    """Grid-evaluate the rerank over t, b, and cutoff values."""
    cfg = load_config(config_path)
    cfg = apply_overrides(
        cfg, "sweep",
        t_values=_floats(t_values) if t_values else None,
        b_values=_floats(b_values) if b_values else None,
        k_values=_ints(k_values) if k_values else None,
        per_depth=per_depth,
    )
    cfg = apply_overrides(cfg, "eval", split=split, relevant=relevant, zero_relevant=zero_relevant)
    cfg = apply_overrides(cfg, "grit", sum_over=sum_over)
    runs = read_run_file(run_path)
    graph = load_graph(graph_path)
    jset = parse_judgments(judgments, split_filter=cfg["eval"]["split"])
    table = sweep(
        runs,
        graph,
        jset,
        cfg["sweep"]["t_values"],
        cfg["sweep"]["b_values"],
        cfg["sweep"]["k_values"],
        parse_relevant_labels(cfg["eval"]["relevant"]),
        per_depth=cfg["sweep"]["per_depth"],
        sum_over=cfg["grit"]["sum_over"],
        method=method or sniff_run_tag(run_path) or Path(run_path).stem,
        zero_relevant=cfg["eval"]["zero_relevant"],
    )
    emit_report(table, fmt, out)
    write_sidecar(cfg, out, "sweep")
    click.echo(f"sweep: {len(table.cells)} cells "
               f"({len(table.t_values)} t x {len(table.b_values)} b x {len(table.k_values)} k) -> {out}",
               err=True)


@main.command("gen-queries")
@click.option("--queries", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--query-column", default="query", show_default=True)
@click.option("--backend", type=click.Choice(["mock", "http"]), default=None, help="Default mock.")
@click.option("--max-retries", type=int, default=None)
@click.option("--resume", is_flag=True, default=False,
              help="Skip query ids already present in the output file.")
@click.option("--endpoint", default=None, help="HTTP backend URL.")
@click.option("--model", default=None, help="HTTP backend model name.")
@click.option("--auth-env", default=None, help="Env var holding the bearer token.")
@click.option("--mock-verdict", default=None, help="Mock validation reply (default yes).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_config_option
@guarded
def gen_queries(queries, query_column, backend, max_retries, resume, endpoint, model,
                auth_env, mock_verdict, out, config_path) -> None:
    """Rewrite keyword queries into task-oriented ones, with validation."""
    cfg = load_config(config_path)
    cfg = apply_overrides(cfg, "querygen", backend=backend, max_retries=max_retries,
                          mock_verdict=mock_verdict)
    cfg = apply_overrides(cfg, "querygen",
                          http={k: v for k, v in
                                {"endpoint": endpoint, "model": model, "auth_env": auth_env}.items()
                                if v is not None} or None)
    section = cfg["querygen"]
    if section["max_retries"] < 1:
        raise ConfigError(f"max_retries must be >= 1, got {section['max_retries']}")
    if section["backend"] == "mock":
        engine = MockBackend(section["mock_template"], section["mock_verdict"])
    else:
        http = section["http"]
        engine = HttpChatBackend(
            endpoint=http["endpoint"],
            model=http["model"],
            auth_env=http["auth_env"],
            timeout=http["timeout"],
            max_in_flight=http["max_in_flight"],
            max_attempts=http["max_attempts"],
            backoff_base=http["backoff_base"],
        )
    prompts = PromptTemplates(section["prompts"]["generation"], section["prompts"]["validation"])
    qlist = parse_queries(queries, query_column)
    records = generate_benchmark(qlist, engine, out, section["max_retries"], prompts, resume=resume)
    write_sidecar(cfg, out, "gen-queries")
    failed = sum(1 for r in records if not r.validated)
    click.echo(f"gen-queries: {len(records)} queries, {failed} failed validation -> {out}", err=True)


if __name__ == "__main__":
    main()
