"""Lexical first-stage retrieval: tokenizer, inverted index, BM25 scoring.

Scoring follows the Lucene-style formulation:

    score(q, d) = sum over unique query terms t of
                  idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d) / avg_len))
    idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))

with defaults k1 = 1.2 and b = 0.75. Scoring is exhaustive over the postings
of the query terms; ties are broken by ascending product id.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import EmptyCatalog, FormatError
from .models import ProductDoc, Query, RunEntry, RunList

# Unicode letters and digits only; underscore and everything else separates.
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_FIELDS = ("title", "description", "brand", "color")

INDEX_MAGIC = "gritkit-index-v1"


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character."""
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class InvertedIndex:
    """Immutable after build; do not mutate postings in place.

    postings map each term to (doc ordinal, term frequency) pairs in
    ascending ordinal order; ordinals index doc_ids and doc_lengths.
    """

    doc_ids: list[str] = field(default_factory=list)
    doc_lengths: list[int] = field(default_factory=list)
    postings: dict[str, list[tuple[int, int]]] = field(default_factory=dict)

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    @property
    def avg_doc_length(self) -> float:
        if not self.doc_lengths:
            return 0.0
        return sum(self.doc_lengths) / len(self.doc_lengths)

    @property
    def term_count(self) -> int:
        return len(self.postings)


def doc_text(doc: ProductDoc, fields: Iterable[str] = DEFAULT_FIELDS) -> str:
    """Concatenate the selected catalog fields with single spaces."""
    parts = []
    for name in fields:
        if name not in DEFAULT_FIELDS:
            raise ValueError(f"unknown index field {name!r}, expected one of {DEFAULT_FIELDS}")
        value = getattr(doc, name)
        if value:
            parts.append(value)
    return " ".join(parts)


def build_index(catalog: Mapping[str, ProductDoc], fields: Iterable[str] = DEFAULT_FIELDS) -> InvertedIndex:
    """Index a catalog; document ordinals follow ascending product id."""
    fields = tuple(fields)
    if not catalog:
        raise EmptyCatalog("cannot index an empty catalog")
    index = InvertedIndex()
    for ordinal, pid in enumerate(sorted(catalog)):
        terms = tokenize(doc_text(catalog[pid], fields))
        index.doc_ids.append(pid)
        index.doc_lengths.append(len(terms))
        for term, tf in sorted(Counter(terms).items()):
            index.postings.setdefault(term, []).append((ordinal, tf))
    return index


def idf(index: InvertedIndex, term: str) -> float:
    df = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def bm25_search(index: InvertedIndex, query: Query, n: int, params: Bm25Params = Bm25Params()) -> RunList:
    """Top-n matches for a query; empty run when no term matches."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    avg_len = index.avg_doc_length
    scores: dict[int, float] = {}
    for term in sorted(set(tokenize(query.text))):
        plist = index.postings.get(term)
        if not plist:
            continue
        term_idf = idf(index, term)
        for ordinal, tf in plist:
            norm = params.k1 * (1.0 - params.b + params.b * index.doc_lengths[ordinal] / avg_len)
            scores[ordinal] = scores.get(ordinal, 0.0) + term_idf * tf * (params.k1 + 1.0) / (tf + norm)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], index.doc_ids[item[0]]))[:n]
    entries = tuple(RunEntry(i, index.doc_ids[o], s) for i, (o, s) in enumerate(ranked, start=1))
    return RunList(query.query_id, entries)


def search_all(
    index: InvertedIndex,
    queries: Iterable[Query],
    n: int,
    params: Bm25Params = Bm25Params(),
) -> dict[str, RunList]:
    return {q.query_id: bm25_search(index, q, n, params) for q in queries}


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Persist the index as versioned plain text (byte-stable across runs)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{INDEX_MAGIC}\n")
        fh.write(f"{index.doc_count}\n")
        for pid, length in zip(index.doc_ids, index.doc_lengths):
            fh.write(f"{pid}\t{length}\n")
        for term in sorted(index.postings):
            cells = " ".join(f"{o}:{tf}" for o, tf in index.postings[term])
            fh.write(f"{term}\t{cells}\n")


def load_index(path: str | Path) -> InvertedIndex:
    source = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != INDEX_MAGIC:
        raise FormatError(f"not a {INDEX_MAGIC} file", source=source, line=1)
    try:
        doc_count = int(lines[1])
    except (IndexError, ValueError):
        raise FormatError("missing document count", source=source, line=2) from None
    index = InvertedIndex()
    if len(lines) < 2 + doc_count:
        raise FormatError(f"expected {doc_count} document rows", source=source)
    for lineno, line in enumerate(lines[2 : 2 + doc_count], start=3):
        try:
            pid, length_s = line.split("\t")
            index.doc_ids.append(pid)
            index.doc_lengths.append(int(length_s))
        except ValueError:
            raise FormatError(f"bad document row {line!r}", source=source, line=lineno) from None
    for lineno, line in enumerate(lines[2 + doc_count :], start=3 + doc_count):
        if not line:
            continue
        try:
            term, cells = line.split("\t")
            plist = []
            prev = -1
            for cell in cells.split(" "):
                o_s, tf_s = cell.split(":")
                ordinal, tf = int(o_s), int(tf_s)
                if not 0 <= ordinal < doc_count or tf < 1 or ordinal <= prev:
                    raise ValueError(cell)
                plist.append((ordinal, tf))
                prev = ordinal
        except ValueError:
            raise FormatError(f"bad postings row {line!r}", source=source, line=lineno) from None
        index.postings[term] = plist
    return index
