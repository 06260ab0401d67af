"""Multimodal retrieval: L2 embedding search fused with binary clinical
matching through ideal-solution ranking."""

from .clinical import (
    ClinicalBits,
    ClinicalSchema,
    FieldSpec,
    all_hamming,
    decode,
    encode,
    hamming,
)
from .core_index import (
    EmbeddingRecord,
    VectorIndex,
    all_distances,
    build_index,
    knn_search,
    l2_distance,
)
from .errors import RankfuseError, ValidationError
from .evaluation import (
    EvalReport,
    QueryCase,
    confusion,
    evaluate,
    split,
    split_bundle,
    topk_accuracy,
    weight_sweep,
)
from .ingest import (
    DatasetBundle,
    gen_synthetic,
    load_bundle,
    load_database,
    load_embeddings,
    save_bundle,
    save_database,
    save_embeddings,
)
from .retrieval import (
    MODE_CBIDR,
    MODE_CBIR,
    DescriptorDatabase,
    Query,
    RankedEntry,
    RankedResult,
    build_database,
    cbidr_query,
    cbir_query,
)
from .topsis import DecisionMatrix, TopsisConfig, TopsisResult, rank

__version__ = "0.1.0"

__all__ = [
    "ClinicalBits",
    "ClinicalSchema",
    "DatasetBundle",
    "DecisionMatrix",
    "DescriptorDatabase",
    "EmbeddingRecord",
    "EvalReport",
    "FieldSpec",
    "MODE_CBIDR",
    "MODE_CBIR",
    "Query",
    "QueryCase",
    "RankedEntry",
    "RankedResult",
    "RankfuseError",
    "TopsisConfig",
    "TopsisResult",
    "ValidationError",
    "VectorIndex",
    "all_distances",
    "all_hamming",
    "build_database",
    "build_index",
    "cbidr_query",
    "cbir_query",
    "confusion",
    "decode",
    "encode",
    "evaluate",
    "gen_synthetic",
    "hamming",
    "knn_search",
    "l2_distance",
    "load_bundle",
    "load_database",
    "load_embeddings",
    "rank",
    "save_bundle",
    "save_database",
    "save_embeddings",
    "split",
    "split_bundle",
    "topk_accuracy",
    "weight_sweep",
]
