"""HTTP query service over one immutable descriptor database.

The database is loaded once at startup and never mutated, so concurrent
requests need no locking. Engine errors surface as 400 responses with a
stable machine-readable code and the offending field; requests arriving
before a database is loaded get 503.
"""

from __future__ import annotations

import os
import time
from typing import List, Literal, Optional, Tuple

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .clinical import decode, encode
from .errors import RankfuseError, ValidationError
from .ingest import load_database
from .retrieval import (
    MODE_CBIDR,
    MODE_CBIR,
    DescriptorDatabase,
    Query,
    cbidr_query,
    cbir_query,
)

DB_PATH_ENV = "RANKFUSE_DB"

# Best-effort field attribution for engine error codes.
_CODE_FIELDS = {
    "k-out-of-range": "k",
    "invalid-weights": "weights",
    "dimension-mismatch": "embedding",
    "clinical-required": "clinical",
    "schema-mismatch": "clinical",
    "missing-field": "clinical",
    "undeclared-value": "clinical",
    "value-out-of-range": "clinical",
}


class QueryRequest(BaseModel):
    embedding: Optional[List[float]] = None
    item_id: Optional[int] = None
    clinical: Optional[dict] = None
    weights: Tuple[float, float] = (0.5, 0.5)
    k: int = Field(default=5)
    mode: Literal["cbir", "cbidr"]


class ResponseEntry(BaseModel):
    id: int
    label: str
    score: float
    d_image: float
    d_clinical: Optional[int]
    clinical: dict


class QueryResponse(BaseModel):
    entries: List[ResponseEntry]
    mode: str
    weights: Tuple[float, float]
    timing_ms: float


def _error_body(code: str, message: str, field_path: Optional[str]) -> dict:
    return {"error": {"code": code, "message": message, "field": field_path}}


def _resolve_query_inputs(db: DescriptorDatabase, request: QueryRequest):
    """Pick the embedding (and, for stored items, clinical bits) to search.

    A request names its query either by pasting an embedding or by the id
    of a stored item; a stored item is excluded from its own results.
    """
    if (request.embedding is None) == (request.item_id is None):
        raise ValidationError(
            "exactly one of 'embedding' and 'item_id' must be provided"
        )
    if request.embedding is not None:
        vector = np.asarray(request.embedding, dtype=np.float32)
        bits = None
        if request.clinical is not None:
            bits = encode(request.clinical, db.schema)
        return vector, bits, None

    position = None
    try:
        position = db.index.position_of(int(request.item_id))
    except RankfuseError:
        pass
    if position is None:
        raise ValidationError(f"no item with id {request.item_id}")
    vector = db.index.vectors[position]
    if request.clinical is not None:
        bits = encode(request.clinical, db.schema)
    else:
        bits = db.clinical[position]
    return vector, bits, int(request.item_id)


def create_app(db: Optional[DescriptorDatabase] = None,
               db_path: Optional[str] = None) -> FastAPI:
    """Build the service; loads db_path when no database object is given."""
    app = FastAPI(title="rankfuse query service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    if db is None and db_path is None:
        db_path = os.environ.get(DB_PATH_ENV)
    if db is None and db_path:
        db = load_database(db_path)
    app.state.db = db

    @app.exception_handler(RankfuseError)
    async def engine_error(request: Request, exc: RankfuseError):
        field_path = _CODE_FIELDS.get(exc.code)
        return JSONResponse(
            status_code=400,
            content=_error_body(exc.code, str(exc), field_path),
        )

    @app.exception_handler(RequestValidationError)
    async def body_error(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        field_path = None
        message = "invalid request body"
        if errors:
            loc = [str(part) for part in errors[0].get("loc", ())
                   if part != "body"]
            field_path = ".".join(loc) or None
            message = errors[0].get("msg", message)
        return JSONResponse(
            status_code=400,
            content=_error_body("validation-error", message, field_path),
        )

    def require_db() -> DescriptorDatabase:
        if app.state.db is None:
            raise _NoDatabase()
        return app.state.db

    class _NoDatabase(Exception):
        pass

    @app.exception_handler(_NoDatabase)
    async def no_database(request: Request, exc: _NoDatabase):
        return JSONResponse(
            status_code=503,
            content=_error_body("database-not-loaded",
                                "no database is loaded", None),
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "database_loaded": app.state.db is not None}

    @app.get("/metadata")
    async def metadata():
        database = require_db()
        fields = []
        for spec in database.schema.fields:
            entry = spec.to_dict()
            entry["slots"] = spec.slot_labels()
            fields.append(entry)
        return {
            "schema": {"fields": fields},
            "class_labels": list(database.class_labels),
            "size": database.size,
            "dim": database.index.dim,
            "bit_width": database.schema.total_bits,
            "ids": [int(i) for i in database.index.ids],
        }

    @app.get("/items/{item_id}")
    async def item(item_id: int):
        database = require_db()
        try:
            position = database.index.position_of(item_id)
        except RankfuseError:
            return JSONResponse(
                status_code=404,
                content=_error_body("not-found",
                                    f"no item with id {item_id}", "item_id"),
            )
        norm = float(np.linalg.norm(
            database.index.vectors[position].astype(np.float64)
        ))
        return {
            "id": item_id,
            "label": database.index.labels[position],
            "clinical": decode(database.clinical[position], database.schema),
            "embedding_norm": norm,
        }

    @app.post("/query", response_model=QueryResponse)
    async def query(request: QueryRequest):
        database = require_db()
        started = time.perf_counter()
        vector, bits, exclude_id = _resolve_query_inputs(database, request)

        if request.mode == MODE_CBIR:
            result = cbir_query(database, vector, request.k,
                                exclude_id=exclude_id)
        else:
            fused = Query(vector=vector, clinical=bits,
                          weights=tuple(request.weights), k=request.k)
            result = cbidr_query(database, fused, exclude_id=exclude_id)

        entries = []
        for entry in result.entries:
            position = database.index.position_of(entry.id)
            summary = {}
            if request.mode == MODE_CBIDR:
                summary = decode(database.clinical[position], database.schema)
            entries.append(ResponseEntry(
                id=entry.id,
                label=entry.label,
                score=entry.score,
                d_image=entry.d_image,
                d_clinical=entry.d_clinical,
                clinical=summary,
            ))
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return QueryResponse(
            entries=entries,
            mode=result.mode,
            weights=tuple(request.weights),
            timing_ms=elapsed_ms,
        )

    return app
