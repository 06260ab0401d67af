"""Exact L2 vector index.

Stores embedding vectors in single precision, precomputes their squared
norms, and answers k-nearest-neighbor and full-distance queries through the
expansion  |x - y|^2 = |x|^2 + |y|^2 - 2<x, y>  with all accumulation done
in double precision. The index is immutable after construction, so
concurrent read-only queries are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    EmptyDatabaseError,
    KOutOfRangeError,
    ValidationError,
)


def as_vector(values) -> np.ndarray:
    """Coerce an embedding to a read-only 1-D float32 array.

    Raises ValidationError for empty input or non-finite values.
    """
    vec = np.asarray(values, dtype=np.float32)
    if vec.ndim != 1:
        raise ValidationError(f"embedding must be 1-D, got shape {vec.shape}")
    if vec.size == 0:
        raise ValidationError("embedding must have at least one dimension")
    if not np.all(np.isfinite(vec)):
        raise ValidationError("embedding contains non-finite values")
    vec = vec.copy()
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True)
class EmbeddingRecord:
    """One database item: id, class label, and feature vector."""

    id: int
    label: str
    vector: np.ndarray

    def __post_init__(self):
        if self.id < 0:
            raise ValidationError(f"record id must be nonnegative, got {self.id}")
        object.__setattr__(self, "vector", as_vector(self.vector))


@dataclass(frozen=True)
class VectorIndex:
    """Immutable, id-ordered store of embeddings with precomputed norms."""

    ids: np.ndarray            # (m,) int64, strictly ascending
    labels: tuple              # (m,) class labels, id-aligned
    vectors: np.ndarray        # (m, dim) float32
    squared_norms: np.ndarray  # (m,) float64
    _vectors64: np.ndarray = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return int(self.ids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def record(self, position: int) -> EmbeddingRecord:
        """Return the record stored at a positional (id-order) index."""
        return EmbeddingRecord(
            id=int(self.ids[position]),
            label=self.labels[position],
            vector=self.vectors[position],
        )

    def position_of(self, record_id: int) -> int:
        """Positional index of an id, or raise ValidationError."""
        pos = int(np.searchsorted(self.ids, record_id))
        if pos >= self.size or int(self.ids[pos]) != record_id:
            raise ValidationError(f"unknown record id {record_id}")
        return pos


def l2_distance(a, b) -> float:
    """Euclidean distance between two vectors of equal dimension.

    The sum of squared differences is accumulated in double precision.
    """
    va = as_vector(a)
    vb = as_vector(b)
    if va.shape[0] != vb.shape[0]:
        raise DimensionMismatchError(
            f"vector dimensions differ: {va.shape[0]} vs {vb.shape[0]}"
        )
    diff = va.astype(np.float64) - vb.astype(np.float64)
    return float(np.sqrt(np.dot(diff, diff)))


def build_index(records: Sequence[EmbeddingRecord]) -> VectorIndex:
    """Build an immutable index from records, sorted by ascending id."""
    if len(records) == 0:
        raise EmptyDatabaseError("cannot build an index from zero records")

    ordered = sorted(records, key=lambda r: r.id)
    ids = np.array([r.id for r in ordered], dtype=np.int64)
    if np.any(ids[1:] == ids[:-1]):
        dupes = sorted({int(i) for i in ids[1:][ids[1:] == ids[:-1]]})
        raise DuplicateIdError(f"duplicate record ids: {dupes}")

    dim = ordered[0].vector.shape[0]
    for r in ordered:
        if r.vector.shape[0] != dim:
            raise DimensionMismatchError(
                f"record {r.id} has dim {r.vector.shape[0]}, expected {dim}"
            )

    vectors = np.stack([r.vector for r in ordered]).astype(np.float32)
    vectors.setflags(write=False)
    vectors64 = vectors.astype(np.float64)
    vectors64.setflags(write=False)
    squared_norms = np.einsum("ij,ij->i", vectors64, vectors64)
    squared_norms.setflags(write=False)

    return VectorIndex(
        ids=ids,
        labels=tuple(r.label for r in ordered),
        vectors=vectors,
        squared_norms=squared_norms,
        _vectors64=vectors64,
    )


def _check_query(index: VectorIndex, query) -> np.ndarray:
    q = as_vector(query)
    if q.shape[0] != index.dim:
        raise DimensionMismatchError(
            f"query dim {q.shape[0]} does not match index dim {index.dim}"
        )
    return q.astype(np.float64)


def all_distances(index: VectorIndex, query) -> np.ndarray:
    """Distances from the query to every record, in ascending-id order.

    Shares the precomputed-norm expansion with knn_search so the two
    operations order items identically. Negative squared distances from
    floating-point cancellation are clamped to zero.
    """
    q = _check_query(index, query)
    dots = index._vectors64 @ q
    sq = index.squared_norms + np.dot(q, q) - 2.0 * dots
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq)


def knn_search(index: VectorIndex, query, k: int) -> list:
    """The k nearest records as (id, distance) pairs.

    Sorted by ascending distance, ties broken by ascending id.
    """
    if not 1 <= k <= index.size:
        raise KOutOfRangeError(
            f"k={k} out of range for an index of {index.size} records"
        )
    dists = all_distances(index, query)
    order = np.lexsort((index.ids, dists))[:k]
    return [(int(index.ids[i]), float(dists[i])) for i in order]
