"""Core domain types: products, queries, relevance judgments, ranked runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

from .errors import UnknownLabel

SPLITS = ("train", "test")


def check_id(token: str, what: str = "id") -> str:
    """Ids are opaque non-empty strings without whitespace."""
    if not token or any(ch.isspace() for ch in token):
        raise ValueError(f"{what} must be non-empty and free of whitespace, got {token!r}")
    return token


class RelevanceLabel(str, Enum):
    EXACT = "E"
    SUBSTITUTE = "S"
    COMPLEMENT = "C"
    IRRELEVANT = "I"

    @classmethod
    def parse(cls, token: str) -> "RelevanceLabel":
        # case-insensitive on input, canonical uppercase internally
        try:
            return cls(token.strip().upper())
        except ValueError:
            raise UnknownLabel(f"unknown relevance label {token!r}, expected one of E/S/C/I") from None


@dataclass(frozen=True)
class ProductDoc:
    product_id: str
    title: str
    description: str | None = None
    brand: str | None = None
    color: str | None = None
    locale: str = "us"

    def __post_init__(self) -> None:
        check_id(self.product_id, "product id")
        if not self.title.strip():
            raise ValueError(f"product {self.product_id}: title must be non-empty")


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str
    locale: str = "us"

    def __post_init__(self) -> None:
        check_id(self.query_id, "query id")
        if not self.text.strip():
            raise ValueError(f"query {self.query_id}: text must be non-empty")


@dataclass(frozen=True)
class Judgment:
    query_id: str
    product_id: str
    label: RelevanceLabel
    split: str

    def __post_init__(self) -> None:
        check_id(self.query_id, "query id")
        check_id(self.product_id, "product id")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class RunEntry:
    rank: int
    product_id: str
    score: float


@dataclass(frozen=True)
class RunList:
    """One query's ranked results.

    Invariants: ranks are exactly 1..n in order, product ids are unique, and
    scores never increase with rank (equal scores allowed, rank order is then
    authoritative).
    """

    query_id: str
    entries: tuple[RunEntry, ...] = ()

    def __post_init__(self) -> None:
        check_id(self.query_id, "query id")
        object.__setattr__(self, "entries", tuple(self.entries))
        seen: set[str] = set()
        prev_score: float | None = None
        for i, entry in enumerate(self.entries, start=1):
            if entry.rank != i:
                raise ValueError(f"query {self.query_id}: rank {entry.rank} at position {i}, ranks must be 1..n")
            if entry.product_id in seen:
                raise ValueError(f"query {self.query_id}: product {entry.product_id} listed twice")
            seen.add(entry.product_id)
            if prev_score is not None and entry.score > prev_score:
                raise ValueError(f"query {self.query_id}: score increases at rank {i}")
            prev_score = entry.score

    @classmethod
    def from_scores(cls, query_id: str, scored: Iterable[tuple[str, float]]) -> "RunList":
        """Build a run from (product_id, score) pairs.

        Ties in score are resolved by ascending product id before ranks are
        assigned, so identical inputs always yield an identical run.
        """
        ordered = sorted(scored, key=lambda item: (-item[1], item[0]))
        entries = tuple(RunEntry(i, pid, s) for i, (pid, s) in enumerate(ordered, start=1))
        return cls(query_id, entries)

    def truncated(self, k: int) -> "RunList":
        if k < 0:
            raise ValueError("k must be >= 0")
        if k >= len(self.entries):
            return self
        return RunList(self.query_id, self.entries[:k])

    def product_ids(self) -> tuple[str, ...]:
        return tuple(e.product_id for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[RunEntry]:
        return iter(self.entries)


@dataclass
class JudgmentSet:
    """Parsed judgments plus the distinct queries they mention."""

    judgments: list[Judgment] = field(default_factory=list)
    queries: dict[str, Query] = field(default_factory=dict)

    def filter(self, split: str | None = None) -> "JudgmentSet":
        if split is None:
            return self
        if split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
        kept = [j for j in self.judgments if j.split == split]
        qids = {j.query_id for j in kept}
        return JudgmentSet(kept, {q: self.queries[q] for q in self.queries if q in qids})

    def labels_by_query(self) -> dict[str, dict[str, RelevanceLabel]]:
        """Map query id to {product id: label}.

        Call on a split-filtered set; with both splits present the same
        product may be judged twice and the later row wins.
        """
        out: dict[str, dict[str, RelevanceLabel]] = {}
        for j in self.judgments:
            out.setdefault(j.query_id, {})[j.product_id] = j.label
        return out

    def __len__(self) -> int:
        return len(self.judgments)
