"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..models import RunEntry, RunList


class HealthResponse(BaseModel):
    status: str
    version: str


class BuildIndexRequest(BaseModel):
    catalog_path: str
    catalog_format: str | None = None
    fields: list[str] | None = None


class LoadRequest(BaseModel):
    path: str


class IndexStats(BaseModel):
    doc_count: int
    term_count: int
    avg_doc_length: float


class BuildGraphRequest(BaseModel):
    judgments_path: str
    split: str = "train"
    min_weight: int | None = None
    weights: dict[str, int] | None = None


class GraphStatsResponse(BaseModel):
    node_count: int
    edge_count: int
    max_degree: int
    weight_histogram: dict[int, int]


class Neighbor(BaseModel):
    product_id: str
    weight: int


class NeighborsResponse(BaseModel):
    product_id: str
    neighbors: list[Neighbor]


class RunEntryModel(BaseModel):
    rank: int
    product_id: str
    score: float


class RunModel(BaseModel):
    query_id: str
    entries: list[RunEntryModel]

    @classmethod
    def from_run(cls, run: RunList) -> "RunModel":
        return cls(
            query_id=run.query_id,
            entries=[RunEntryModel(rank=e.rank, product_id=e.product_id, score=e.score) for e in run],
        )

    def to_run(self) -> RunList:
        return RunList(self.query_id, tuple(RunEntry(e.rank, e.product_id, e.score) for e in self.entries))


class SearchRequest(BaseModel):
    query: str
    query_id: str = "q0"
    n: int = Field(default=10, ge=1)
    k1: float | None = None
    b: float | None = None


class RerankRequest(BaseModel):
    run: RunModel
    t: float
    b: float
    sum_over: str = "seeds"


class EvaluateRequest(BaseModel):
    runs_path: str
    judgments_path: str
    split: str = "test"
    k_values: list[int] = Field(default_factory=lambda: [500, 1000, 1500, 2000])
    relevant: str = "E"
    zero_relevant: str = "exclude"


class EvaluateRow(BaseModel):
    k: int
    recall: float | None
    evaluated: int
    excluded: int


class EvaluateResponse(BaseModel):
    rows: list[EvaluateRow]


class GenerateRequest(BaseModel):
    queries: list[dict[str, str]]  # [{"query_id": ..., "query": ...}]
    max_retries: int = Field(default=5, ge=1)
    mock_template: str = "Find {query} for purchase"
    mock_verdict: str = "yes"


class GenerationRecordModel(BaseModel):
    query_id: str
    original: str
    generated: str
    attempts: int
    validated: bool


class GenerateResponse(BaseModel):
    records: list[GenerationRecordModel]
