"""Readers and writers for catalogs, judgments, query lists, and run files.

File formats:
  catalog TSV    header: product_id, product_title, then optional
                 product_description / product_brand / product_color /
                 product_locale; unknown extra columns are ignored
  catalog JSONL  one object per line with the same keys
  judgments TSV  header: query_id, query, product_id, esci_label, split,
                 product_locale; extra columns ignored
  queries TSV    header: query_id plus a text column (default "query")
  run file       "<query_id> Q0 <product_id> <rank> <score> <tag>", one entry
                 per line, scores serialized at 6 decimal places
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    ConflictingDuplicate,
    DuplicateDoc,
    DuplicateId,
    FormatError,
    RankGap,
    UnknownLabel,
)
from .models import Judgment, JudgmentSet, ProductDoc, Query, RelevanceLabel, RunEntry, RunList, SPLITS

CATALOG_COLUMNS = (
    "product_id",
    "product_title",
    "product_description",
    "product_brand",
    "product_color",
    "product_locale",
)
JUDGMENT_COLUMNS = ("query_id", "query", "product_id", "esci_label", "split", "product_locale")

_WS_RUN = re.compile(r"[\t\r\n]+")


def _clean(value: str) -> str:
    # text fields must stay single-line and tab-free in TSV output
    return _WS_RUN.sub(" ", value).strip()


def _split_header(line: str, required: Iterable[str], source: str) -> dict[str, int]:
    columns = line.rstrip("\n").split("\t")
    positions = {name: i for i, name in enumerate(columns)}
    missing = [name for name in required if name not in positions]
    if missing:
        raise FormatError(f"header missing column(s) {', '.join(missing)}", source=source, line=1)
    return positions


def _read_lines(path: str | Path) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.readlines()


def _row_fields(line: str, width: int, source: str, lineno: int) -> list[str]:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != width:
        raise FormatError(f"expected {width} tab-separated fields, got {len(fields)}", source=source, line=lineno)
    return fields


def _detect_format(path: str | Path) -> str:
    return "jsonl" if str(path).endswith((".jsonl", ".json")) else "tsv"


def parse_products(path: str | Path, fmt: str | None = None) -> dict[str, ProductDoc]:
    """Load a product catalog keyed by product id, in file order."""
    fmt = fmt or _detect_format(path)
    if fmt == "tsv":
        return _parse_products_tsv(path)
    if fmt == "jsonl":
        return _parse_products_jsonl(path)
    raise ValueError(f"unknown catalog format {fmt!r}, expected tsv or jsonl")


def _make_product(raw: Mapping[str, str], source: str, lineno: int) -> ProductDoc:
    title = _clean(raw.get("product_title", ""))
    if not title:
        raise FormatError("missing or empty product_title", source=source, line=lineno)
    pid = raw.get("product_id", "").strip()
    if not pid or any(ch.isspace() for ch in pid):
        raise FormatError(f"bad product_id {raw.get('product_id', '')!r}", source=source, line=lineno)
    optional = {}
    for key in ("product_description", "product_brand", "product_color"):
        value = _clean(raw.get(key) or "")
        optional[key.removeprefix("product_")] = value or None
    locale = (raw.get("product_locale") or "us").strip().lower() or "us"
    return ProductDoc(pid, title, locale=locale, **optional)


def _parse_products_tsv(path: str | Path) -> dict[str, ProductDoc]:
    source = str(path)
    lines = _read_lines(path)
    if not lines:
        raise FormatError("missing header", source=source, line=1)
    positions = _split_header(lines[0], ("product_id", "product_title"), source)
    width = len(lines[0].rstrip("\n").split("\t"))
    catalog: dict[str, ProductDoc] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = _row_fields(line, width, source, lineno)
        raw = {name: fields[i] for name, i in positions.items() if name in CATALOG_COLUMNS}
        doc = _make_product(raw, source, lineno)
        if doc.product_id in catalog:
            raise DuplicateId(f"{source}:{lineno}: duplicate product id {doc.product_id}")
        catalog[doc.product_id] = doc
    return catalog


def _parse_products_jsonl(path: str | Path) -> dict[str, ProductDoc]:
    source = str(path)
    catalog: dict[str, ProductDoc] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", source=source, line=lineno) from None
        if not isinstance(raw, dict):
            raise FormatError("expected a JSON object", source=source, line=lineno)
        cleaned = {k: str(v) for k, v in raw.items() if k in CATALOG_COLUMNS and v is not None}
        doc = _make_product(cleaned, source, lineno)
        if doc.product_id in catalog:
            raise DuplicateId(f"{source}:{lineno}: duplicate product id {doc.product_id}")
        catalog[doc.product_id] = doc
    return catalog


def write_catalog_tsv(catalog: Mapping[str, ProductDoc], path: str | Path) -> None:
    """Write the canonical catalog TSV: full header, rows sorted by product id."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(CATALOG_COLUMNS) + "\n")
        for pid in sorted(catalog):
            doc = catalog[pid]
            row = (
                doc.product_id,
                _clean(doc.title),
                _clean(doc.description or ""),
                _clean(doc.brand or ""),
                _clean(doc.color or ""),
                doc.locale,
            )
            fh.write("\t".join(row) + "\n")


def parse_judgments(
    path: str | Path,
    split_filter: str | None = None,
    locale_filter: str | None = None,
) -> JudgmentSet:
    """Load relevance judgments, optionally keeping one split and/or locale.

    At most one judgment per (query, product, split) triple: exact duplicate
    rows are collapsed, conflicting labels raise ConflictingDuplicate.
    """
    source = str(path)
    if split_filter is not None and split_filter not in SPLITS:
        raise ValueError(f"split filter must be one of {SPLITS}, got {split_filter!r}")
    lines = _read_lines(path)
    if not lines:
        raise FormatError("missing header", source=source, line=1)
    positions = _split_header(lines[0], JUDGMENT_COLUMNS, source)
    width = len(lines[0].rstrip("\n").split("\t"))
    seen: dict[tuple[str, str, str], RelevanceLabel] = {}
    judgments: list[Judgment] = []
    queries: dict[str, Query] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = _row_fields(line, width, source, lineno)
        qid = fields[positions["query_id"]].strip()
        text = _clean(fields[positions["query"]])
        pid = fields[positions["product_id"]].strip()
        split = fields[positions["split"]].strip().lower()
        locale = fields[positions["product_locale"]].strip().lower()
        if locale_filter is not None and locale != locale_filter.lower():
            continue
        if split_filter is not None and split != split_filter:
            continue
        try:
            label = RelevanceLabel.parse(fields[positions["esci_label"]])
        except UnknownLabel as exc:
            raise UnknownLabel(f"{source}:{lineno}: {exc}") from None
        if split not in SPLITS:
            raise FormatError(f"bad split {split!r}, expected train or test", source=source, line=lineno)
        try:
            judgment = Judgment(qid, pid, label, split)
        except ValueError as exc:
            raise FormatError(str(exc), source=source, line=lineno) from None
        key = (qid, pid, split)
        if key in seen:
            if seen[key] != label:
                raise ConflictingDuplicate(
                    f"{source}:{lineno}: query {qid} judges product {pid} as both "
                    f"{seen[key].value} and {label.value} in split {split}"
                )
            continue
        seen[key] = label
        judgments.append(judgment)
        if qid not in queries:
            try:
                queries[qid] = Query(qid, text, locale=locale or "us")
            except ValueError as exc:
                raise FormatError(str(exc), source=source, line=lineno) from None
    return JudgmentSet(judgments, queries)


def write_judgments_tsv(jset: JudgmentSet, path: str | Path) -> None:
    """Write the canonical judgments TSV, sorted by (query, product, split)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(JUDGMENT_COLUMNS) + "\n")
        for j in sorted(jset.judgments, key=lambda j: (j.query_id, j.product_id, j.split)):
            query = jset.queries.get(j.query_id)
            text = _clean(query.text) if query else ""
            locale = query.locale if query else "us"
            fh.write("\t".join((j.query_id, text, j.product_id, j.label.value, j.split, locale)) + "\n")


def parse_queries(path: str | Path, column: str = "query") -> list[Query]:
    """Load queries from a TSV with a query_id column and a text column."""
    source = str(path)
    lines = _read_lines(path)
    if not lines:
        raise FormatError("missing header", source=source, line=1)
    positions = _split_header(lines[0], ("query_id", column), source)
    width = len(lines[0].rstrip("\n").split("\t"))
    has_locale = "locale" in positions
    queries: list[Query] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = _row_fields(line, width, source, lineno)
        qid = fields[positions["query_id"]].strip()
        if qid in seen:
            raise FormatError(f"duplicate query id {qid}", source=source, line=lineno)
        seen.add(qid)
        locale = fields[positions["locale"]].strip().lower() if has_locale else "us"
        try:
            queries.append(Query(qid, _clean(fields[positions[column]]), locale=locale or "us"))
        except ValueError as exc:
            raise FormatError(str(exc), source=source, line=lineno) from None
    return queries


def read_run_file(path: str | Path) -> dict[str, RunList]:
    """Load a run file into per-query RunLists.

    Lines may appear in any order; per query the ranks must form 1..n
    (RankGap otherwise) and no product may repeat (DuplicateDoc).
    """
    source = str(path)
    grouped: dict[str, list[tuple[int, str, float]]] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 6:
            raise FormatError(f"expected 6 whitespace-separated fields, got {len(fields)}", source=source, line=lineno)
        qid, _q0, pid, rank_s, score_s, _tag = fields
        try:
            rank = int(rank_s)
            score = float(score_s)
        except ValueError:
            raise FormatError(f"bad rank or score in {line.strip()!r}", source=source, line=lineno) from None
        grouped.setdefault(qid, []).append((rank, pid, score))
    runs: dict[str, RunList] = {}
    for qid, rows in grouped.items():
        rows.sort(key=lambda r: r[0])
        pids = set()
        for i, (rank, pid, _score) in enumerate(rows, start=1):
            if rank != i:
                raise RankGap(f"{source}: query {qid}: ranks are not exactly 1..{len(rows)} (saw {rank} at position {i})")
            if pid in pids:
                raise DuplicateDoc(f"{source}: query {qid}: product {pid} listed twice")
            pids.add(pid)
        try:
            runs[qid] = RunList(qid, tuple(RunEntry(rank, pid, score) for rank, pid, score in rows))
        except ValueError as exc:
            raise FormatError(str(exc), source=source) from None
    return runs


def write_run_file(runs: Mapping[str, RunList], tag: str, path: str | Path) -> None:
    """Write runs in the six-column format, queries in ascending id order.

    Queries with empty runs produce no lines (the format cannot express an
    empty result set), so a round trip drops them.
    """
    if not tag or any(ch.isspace() for ch in tag):
        raise ValueError(f"run tag must be non-empty and free of whitespace, got {tag!r}")
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(runs):
            for entry in runs[qid]:
                fh.write(f"{qid} Q0 {entry.product_id} {entry.rank} {entry.score:.6f} {tag}\n")


def sniff_run_tag(path: str | Path) -> str | None:
    """Tag of the first entry in a run file, or None for an empty file."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            fields = line.split()
            if len(fields) == 6:
                return fields[5]
    return None
