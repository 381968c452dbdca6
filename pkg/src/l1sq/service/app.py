"""FastAPI application wrapping the search engine.

State is in-memory per process: databases and indexes live in registries
keyed by short ids and vanish on restart.  The CLI can drive a running
instance with its --server flag; the endpoints mirror the library calls
one-to-one so both paths exercise exactly the same engine code.
"""

from __future__ import annotations

import threading
from importlib import metadata

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..engine import QueryConfig, build_index, distance_gap, exhaustive_search, query
from ..errors import NumericalBreakdown
from ..linalg import Subspace
from .schemas import (
    BuildIndexRequest,
    CandidateScore,
    DatabaseInfo,
    ExhaustiveRequest,
    ExhaustiveResponse,
    GapInfo,
    GenerateDatabaseRequest,
    HealthResponse,
    IndexInfo,
    QueryRequest,
    QueryResponse,
    UploadDatabaseRequest,
)


def _version() -> str:
    try:
        return metadata.version("l1sq")
    except metadata.PackageNotFoundError:
        return "unknown"


class _Registry:
    """Thread-safe id -> object store with sequential ids."""

    def __init__(self, prefix: str):
        self._prefix = prefix
        self._items: dict[str, object] = {}
        self._lock = threading.Lock()
        self._next = 1

    def add(self, item) -> str:
        with self._lock:
            key = f"{self._prefix}-{self._next}"
            self._next += 1
            self._items[key] = item
        return key

    def get(self, key: str):
        with self._lock:
            if key not in self._items:
                raise KeyError(key)
            return self._items[key]


def create_app() -> FastAPI:
    app = FastAPI(title="l1sq", version=_version())
    databases = _Registry("db")  # id -> (subspaces, labels)
    indexes = _Registry("ix")  # id -> (SearchIndex, db_id)

    @app.exception_handler(ValueError)
    async def _bad_request(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(KeyError)
    async def _not_found(request: Request, exc: KeyError):
        return JSONResponse(
            status_code=404, content={"detail": f"no such resource: {exc.args[0]}"}
        )

    @app.exception_handler(NumericalBreakdown)
    async def _breakdown(request: Request, exc: NumericalBreakdown):
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    def _db_info(db_id: str, subspaces, labels) -> DatabaseInfo:
        return DatabaseInfo(
            db_id=db_id,
            n=len(subspaces),
            D=subspaces[0].ambient_dim,
            r=subspaces[0].rank,
            labels=list(labels),
        )

    @app.get("/health", response_model=HealthResponse)
    async def health():
        return HealthResponse(status="ok", version=_version())

    @app.post("/databases/generate", response_model=DatabaseInfo)
    async def generate_database(req: GenerateDatabaseRequest):
        from ..lab import make_database

        subspaces, labels = make_database(req.n, req.D, req.r, req.seed)
        db_id = databases.add((subspaces, labels))
        return _db_info(db_id, subspaces, labels)

    @app.post("/databases/upload", response_model=DatabaseInfo)
    async def upload_database(req: UploadDatabaseRequest):
        subspaces = [Subspace(basis=p.to_array()) for p in req.bases]
        db_id = databases.add((subspaces, req.labels))
        return _db_info(db_id, subspaces, req.labels)

    @app.get("/databases/{db_id}", response_model=DatabaseInfo)
    async def get_database(db_id: str):
        subspaces, labels = databases.get(db_id)
        return _db_info(db_id, subspaces, labels)

    @app.post("/indexes", response_model=IndexInfo)
    async def build(req: BuildIndexRequest):
        subspaces, labels = databases.get(req.db_id)
        index = build_index(
            subspaces, labels, k=req.k, d=req.d, master_seed=req.master_seed
        )
        index_id = indexes.add((index, req.db_id))
        return IndexInfo(
            index_id=index_id,
            db_id=req.db_id,
            k=req.k,
            d=req.d,
            n=index.n,
            D=index.ambient_dim,
            r=index.rank,
        )

    @app.post("/query", response_model=QueryResponse)
    async def run_query(req: QueryRequest):
        index, _ = indexes.get(req.index_id)
        cfg = QueryConfig(n_rep=req.n_rep, n_back=req.n_back, rng_seed=req.rng_seed)
        result = query(index, np.asarray(req.query, dtype=np.float64), cfg)
        return QueryResponse(
            winner=result.winner,
            ranked_candidates=[
                CandidateScore(label=lab, votes=v, projected_distance=dist)
                for lab, v, dist in result.ranked_candidates
            ],
            refined_distances=result.refined_distances,
            stage1_solves=result.stage1_solves,
            stage2_solves=result.stage2_solves,
        )

    @app.post("/exhaustive", response_model=ExhaustiveResponse)
    async def run_exhaustive(req: ExhaustiveRequest):
        subspaces, labels = databases.get(req.db_id)
        result = exhaustive_search(
            subspaces, labels, np.asarray(req.query, dtype=np.float64)
        )
        gap = None
        if len(result.distances) >= 2:
            g = distance_gap(result.distances)
            gap = GapInfo(
                eta=None if g.eta == float("inf") else g.eta,
                nearest=g.nearest,
                second=g.second,
                nearest_distance=g.nearest_distance,
                second_distance=g.second_distance,
            )
        return ExhaustiveResponse(
            winner=result.winner, distances=result.distances, gap=gap
        )

    return app


def main() -> None:  # pragma: no cover - thin uvicorn launcher
    import uvicorn

    uvicorn.run(create_app(), host="127.0.0.1", port=8000)
