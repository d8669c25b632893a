"""HTTP service wrapping the core toolkit.

The server holds one index and one graph in memory (immutable once
built, safe for concurrent reads) and serves search, rerank, neighbor,
and evaluation requests against them. Artifact paths in requests are
resolved on the server's filesystem.

Run with:  uvicorn gritkit.service.app:app
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..bm25 import Bm25Params, InvertedIndex, bm25_search, build_index, load_index
from ..errors import ConfigError, DataError
from ..evaluation import evaluate, parse_relevant_labels
from ..graph import SimilarityGraph, WeightMatrix, build_graph, graph_stats, load_graph
from ..grit import GritParams, grit_rerank
from ..ingest import parse_judgments, parse_products, read_run_file
from ..models import Query
from ..querygen import MockBackend, generate_task_query
from . import schemas


class Workspace:
    """Mutable slots for the loaded artifacts; builds are serialized."""

    def __init__(self) -> None:
        self.index: InvertedIndex | None = None
        self.graph: SimilarityGraph | None = None
        self.lock = threading.Lock()

    def require_index(self) -> InvertedIndex:
        if self.index is None:
            raise HTTPException(status_code=409, detail="no index loaded, POST /index/build or /index/load first")
        return self.index

    def require_graph(self) -> SimilarityGraph:
        if self.graph is None:
            raise HTTPException(status_code=409, detail="no graph loaded, POST /graph/build or /graph/load first")
        return self.graph


def create_app() -> FastAPI:
    app = FastAPI(title="gritkit", version=__version__)
    ws = Workspace()

    @app.exception_handler(DataError)
    async def data_error(_request: Request, exc: DataError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ConfigError)
    async def config_error(_request: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def missing_file(_request: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def bad_value(_request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    def _index_stats(index: InvertedIndex) -> schemas.IndexStats:
        return schemas.IndexStats(
            doc_count=index.doc_count,
            term_count=index.term_count,
            avg_doc_length=index.avg_doc_length,
        )

    @app.post("/index/build", response_model=schemas.IndexStats)
    def index_build(req: schemas.BuildIndexRequest) -> schemas.IndexStats:
        catalog = parse_products(req.catalog_path, req.catalog_format)
        with ws.lock:
            ws.index = build_index(catalog, req.fields or ("title", "description", "brand", "color"))
        return _index_stats(ws.index)

    @app.post("/index/load", response_model=schemas.IndexStats)
    def index_load(req: schemas.LoadRequest) -> schemas.IndexStats:
        with ws.lock:
            ws.index = load_index(req.path)
        return _index_stats(ws.index)

    def _graph_stats(graph: SimilarityGraph) -> schemas.GraphStatsResponse:
        return schemas.GraphStatsResponse(**graph_stats(graph))

    @app.post("/graph/build", response_model=schemas.GraphStatsResponse)
    def graph_build(req: schemas.BuildGraphRequest) -> schemas.GraphStatsResponse:
        jset = parse_judgments(req.judgments_path, split_filter=req.split)
        matrix = WeightMatrix.from_mapping(req.weights) if req.weights else None
        with ws.lock:
            ws.graph = build_graph(jset, matrix, req.min_weight)
        return _graph_stats(ws.graph)

    @app.post("/graph/load", response_model=schemas.GraphStatsResponse)
    def graph_load(req: schemas.LoadRequest) -> schemas.GraphStatsResponse:
        with ws.lock:
            ws.graph = load_graph(req.path)
        return _graph_stats(ws.graph)

    @app.get("/graph/neighbors/{product_id}", response_model=schemas.NeighborsResponse)
    def neighbors(product_id: str, limit: int | None = None) -> schemas.NeighborsResponse:
        graph = ws.require_graph()
        pairs = graph.neighbors(product_id, limit)
        return schemas.NeighborsResponse(
            product_id=product_id,
            neighbors=[schemas.Neighbor(product_id=q, weight=w) for q, w in pairs],
        )

    @app.post("/search", response_model=schemas.RunModel)
    def search(req: schemas.SearchRequest) -> schemas.RunModel:
        index = ws.require_index()
        params = Bm25Params(
            req.k1 if req.k1 is not None else 1.2,
            req.b if req.b is not None else 0.75,
        )
        run = bm25_search(index, Query(req.query_id, req.query), req.n, params)
        return schemas.RunModel.from_run(run)

    @app.post("/rerank", response_model=schemas.RunModel)
    def rerank(req: schemas.RerankRequest) -> schemas.RunModel:
        graph = ws.require_graph()
        boosted = grit_rerank(req.run.to_run(), graph, GritParams(req.t, req.b), req.sum_over)
        return schemas.RunModel.from_run(boosted)

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate_runs(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
        runs = read_run_file(req.runs_path)
        jset = parse_judgments(req.judgments_path, split_filter=req.split)
        labels = parse_relevant_labels(req.relevant)
        rows = []
        for k in req.k_values:
            report = evaluate(runs, jset, k, labels, req.zero_relevant)
            rows.append(
                schemas.EvaluateRow(
                    k=k, recall=report.mean, evaluated=report.evaluated, excluded=report.excluded
                )
            )
        return schemas.EvaluateResponse(rows=rows)

    @app.post("/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest) -> schemas.GenerateResponse:
        backend = MockBackend(req.mock_template, req.mock_verdict)
        records = []
        for item in req.queries:
            query = Query(item["query_id"], item["query"])
            rec = generate_task_query(query, backend, req.max_retries)
            records.append(
                schemas.GenerationRecordModel(
                    query_id=rec.query_id,
                    original=rec.original,
                    generated=rec.generated,
                    attempts=rec.attempts,
                    validated=rec.validated,
                )
            )
        return schemas.GenerateResponse(records=records)

    return app


app = create_app()
