"""Query pipelines over a descriptor database.

Two modes are exposed. cbir ranks items by embedding distance alone.
cbidr computes the full embedding-distance and clinical-distance vectors,
stacks them into an m x 2 decision matrix (both cost criteria), and ranks
by relative closeness; truncation to k happens only after ranking, because
pre-filtering would change the ideal solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import topsis
from .clinical import ClinicalBits, ClinicalSchema, all_hamming, validate_bits
from .core_index import VectorIndex, all_distances, as_vector, build_index, knn_search
from .errors import (
    ClinicalRequiredError,
    KOutOfRangeError,
    SchemaMismatchError,
    ValidationError,
)

MODE_CBIR = "cbir"
MODE_CBIDR = "cbidr"


@dataclass(frozen=True)
class DescriptorDatabase:
    """Immutable, id-aligned store of embeddings, clinical bits, and labels."""

    index: VectorIndex
    clinical: tuple
    schema: ClinicalSchema

    def __post_init__(self):
        if len(self.clinical) != self.index.size:
            raise ValidationError(
                f"{self.index.size} embeddings but {len(self.clinical)} "
                "clinical vectors"
            )
        for bits in self.clinical:
            validate_bits(bits, self.schema)
        object.__setattr__(self, "clinical", tuple(self.clinical))

    @property
    def labels(self) -> tuple:
        return self.index.labels

    @property
    def size(self) -> int:
        return self.index.size

    @property
    def class_labels(self) -> tuple:
        """Distinct class labels in sorted order."""
        return tuple(sorted(set(self.index.labels)))


def build_database(
    records,
    clinical_pairs: Sequence[Tuple[int, ClinicalBits]],
    schema: ClinicalSchema,
) -> DescriptorDatabase:
    """Assemble a database from records and (id, bits) pairs.

    The id sets of the two sources must match exactly.
    """
    index = build_index(records)
    by_id = dict(clinical_pairs)
    if len(by_id) != len(clinical_pairs):
        raise ValidationError("duplicate ids among clinical records")
    missing = [int(i) for i in index.ids if int(i) not in by_id]
    extra = sorted(set(by_id) - {int(i) for i in index.ids})
    if missing or extra:
        raise ValidationError(
            f"embedding and clinical ids do not match "
            f"(missing clinical: {missing[:5]}, extra clinical: {extra[:5]})"
        )
    aligned = tuple(by_id[int(i)] for i in index.ids)
    return DescriptorDatabase(index=index, clinical=aligned, schema=schema)


@dataclass(frozen=True)
class Query:
    """A fused query: embedding, clinical bits, criterion weights, and k."""

    vector: np.ndarray
    clinical: Optional[ClinicalBits]
    weights: Tuple[float, float] = (0.5, 0.5)
    k: int = 5

    def __post_init__(self):
        object.__setattr__(self, "vector", as_vector(self.vector))
        if self.k < 1:
            raise KOutOfRangeError(f"k must be at least 1, got {self.k}")


@dataclass(frozen=True)
class RankedEntry:
    id: int
    label: str
    score: float                   # distance for cbir, closeness for cbidr
    d_image: float
    d_clinical: Optional[int]


@dataclass(frozen=True)
class RankedResult:
    entries: tuple
    mode: str

    def ids(self) -> list:
        return [e.id for e in self.entries]

    def labels(self) -> list:
        return [e.label for e in self.entries]


def _effective_size(db: DescriptorDatabase, exclude_id: Optional[int]) -> int:
    size = db.size
    if exclude_id is not None and int(exclude_id) in map(int, db.index.ids):
        size -= 1
    return size


def cbir_query(
    db: DescriptorDatabase,
    query_vector,
    k: int,
    exclude_id: Optional[int] = None,
) -> RankedResult:
    """Rank by embedding distance alone: the k nearest items, ascending.

    exclude_id drops one record from consideration (a live query against a
    database that contains the query item itself).
    """
    size = _effective_size(db, exclude_id)
    if not 1 <= k <= size:
        raise KOutOfRangeError(
            f"k={k} out of range for {size} searchable records"
        )
    if exclude_id is None:
        pairs = knn_search(db.index, query_vector, k)
    else:
        dists = all_distances(db.index, query_vector)
        order = np.lexsort((db.index.ids, dists))
        pairs = [
            (int(db.index.ids[i]), float(dists[i]))
            for i in order
            if int(db.index.ids[i]) != int(exclude_id)
        ][:k]
    entries = tuple(
        RankedEntry(
            id=rid,
            label=db.index.labels[db.index.position_of(rid)],
            score=dist,
            d_image=dist,
            d_clinical=None,
        )
        for rid, dist in pairs
    )
    return RankedResult(entries=entries, mode=MODE_CBIR)


def cbidr_query(
    db: DescriptorDatabase,
    query: Query,
    exclude_id: Optional[int] = None,
) -> RankedResult:
    """Fused ranking over the m x 2 cost matrix of both distance vectors."""
    if query.clinical is None:
        raise ClinicalRequiredError("cbidr queries require clinical bits")
    if query.clinical.schema_id != db.schema.schema_id:
        raise SchemaMismatchError(
            f"query clinical schema {query.clinical.schema_id} does not "
            f"match database schema {db.schema.schema_id}"
        )
    size = _effective_size(db, exclude_id)
    if not 1 <= query.k <= size:
        raise KOutOfRangeError(
            f"k={query.k} out of range for {size} searchable records"
        )

    d_image = all_distances(db.index, query.vector)
    d_clinical = all_hamming(db.clinical, query.clinical)

    keep = np.ones(db.size, dtype=bool)
    if exclude_id is not None:
        keep &= db.index.ids != int(exclude_id)
    ids = db.index.ids[keep]
    labels = [lab for lab, keep_it in zip(db.index.labels, keep) if keep_it]
    x1 = d_image[keep]
    x2 = d_clinical[keep].astype(np.float64)

    matrix = topsis.DecisionMatrix(np.column_stack([x1, x2]))
    config = topsis.TopsisConfig(
        weights=np.asarray(query.weights, dtype=np.float64),
        directions=(topsis.COST, topsis.COST),
    )
    result = topsis.rank(matrix, config)

    entries = tuple(
        RankedEntry(
            id=int(ids[i]),
            label=labels[i],
            score=float(result.closeness[i]),
            d_image=float(x1[i]),
            d_clinical=int(x2[i]),
        )
        for i in result.ranking[:query.k]
    )
    return RankedResult(entries=entries, mode=MODE_CBIDR)
