"""Request/response models for the HTTP service.

JSON cannot carry IEEE infinities, so GapInfo.eta uses None for an infinite
gap (query exactly on a subspace); everything else is finite by
construction.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, Field, model_validator


class MatrixPayload(BaseModel):
    """Dense row-major float64 matrix."""

    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    data: list[float]

    @model_validator(mode="after")
    def _sized(self):
        if len(self.data) != self.rows * self.cols:
            raise ValueError(
                f"matrix says {self.rows}x{self.cols} but data has "
                f"{len(self.data)} entries"
            )
        return self

    def to_array(self) -> np.ndarray:
        return np.asarray(self.data, dtype=np.float64).reshape(self.rows, self.cols)

    @classmethod
    def from_array(cls, a) -> "MatrixPayload":
        a = np.asarray(a, dtype=np.float64)
        return cls(rows=a.shape[0], cols=a.shape[1], data=a.ravel().tolist())


class GenerateDatabaseRequest(BaseModel):
    n: int = Field(ge=1, le=10_000)
    D: int = Field(ge=1, le=1_000_000)
    r: int = Field(ge=1, le=1_000)
    seed: int = Field(default=0, ge=0, lt=2**64)


class UploadDatabaseRequest(BaseModel):
    labels: list[str]
    bases: list[MatrixPayload]

    @model_validator(mode="after")
    def _paired(self):
        if len(self.labels) != len(self.bases):
            raise ValueError(
                f"{len(self.labels)} labels but {len(self.bases)} bases"
            )
        if not self.labels:
            raise ValueError("database must contain at least one subspace")
        return self


class DatabaseInfo(BaseModel):
    db_id: str
    n: int
    D: int
    r: int
    labels: list[str]


class BuildIndexRequest(BaseModel):
    db_id: str
    k: int = Field(ge=1)
    d: int = Field(ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2**64)


class IndexInfo(BaseModel):
    index_id: str
    db_id: str
    k: int
    d: int
    n: int
    D: int
    r: int


class QueryRequest(BaseModel):
    index_id: str
    query: list[float]
    n_rep: int = Field(default=5, ge=1)
    n_back: int = Field(default=5, ge=1)
    rng_seed: int = Field(default=0, ge=0, lt=2**64)


class CandidateScore(BaseModel):
    label: str
    votes: int
    projected_distance: float


class QueryResponse(BaseModel):
    winner: str
    ranked_candidates: list[CandidateScore]
    refined_distances: dict[str, float]
    stage1_solves: int
    stage2_solves: int


class GapInfo(BaseModel):
    eta: float | None
    nearest: str
    second: str
    nearest_distance: float
    second_distance: float


class ExhaustiveRequest(BaseModel):
    db_id: str
    query: list[float]


class ExhaustiveResponse(BaseModel):
    winner: str
    distances: dict[str, float]
    gap: GapInfo | None


class HealthResponse(BaseModel):
    status: str
    version: str
