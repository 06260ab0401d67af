"""Retrieval benchmark harness: splits, Top-k accuracy, confusion
matrices, and the image-weight sweep.

A bundle is split per class into a searchable partition and a held-out
query partition; every query runs against the database built from the
searchable side only, so self-matches cannot occur. Aggregation uses
counts, never streaming averages, which keeps concurrent evaluation
byte-identical to the serial run.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .clinical import ClinicalBits
from .errors import ValidationError
from .ingest import DatasetBundle
from .retrieval import (
    MODE_CBIDR,
    MODE_CBIR,
    DescriptorDatabase,
    Query,
    RankedResult,
    build_database,
    cbidr_query,
    cbir_query,
)

DEFAULT_SPLIT_FRACTION = 5.0 / 6.0
DEFAULT_SWEEP_WEIGHTS = (
    (0.5, 0.5),
    (0.6, 0.4),
    (0.7, 0.3),
    (0.8, 0.2),
    (0.9, 0.1),
)


@dataclass(frozen=True)
class QueryCase:
    """One held-out query: embedding, truth label, optional clinical bits."""

    id: int
    label: str
    vector: np.ndarray
    clinical: Optional[ClinicalBits] = None


@dataclass(frozen=True)
class EvalReport:
    top1: float
    top5: float
    per_query: tuple            # (query id, true label, top-k labels)
    confusion: np.ndarray       # rows true class, columns Top-1 prediction
    class_labels: tuple
    weights_used: Optional[Tuple[float, float]]
    mode: str
    k: int

    def __post_init__(self):
        if self.top1 > self.top5 + 1e-12:
            raise ValidationError("Top-1 accuracy cannot exceed Top-5")
        if int(self.confusion.sum()) != len(self.per_query):
            raise ValidationError(
                "confusion entries must sum to the query count"
            )


@dataclass(frozen=True)
class SweepRow:
    weights: Tuple[float, float]
    top1: float
    top5: float


def split(records, fraction: float, seed: int):
    """Stratified partition into (searchable, held-out), seeded.

    Each class is shuffled independently and cut at round(fraction * n),
    clamped so both sides keep at least one member. Classes with fewer
    than two members cannot be split.
    """
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    by_label = {}
    for rec in records:
        by_label.setdefault(rec.label, []).append(rec)

    rng = np.random.default_rng(seed)
    db_part, query_part = [], []
    for label in sorted(by_label):
        members = by_label[label]
        if len(members) < 2:
            raise ValidationError(
                f"class {label!r} has {len(members)} member(s); "
                "need at least 2 to split"
            )
        order = rng.permutation(len(members))
        n_db = int(fraction * len(members) + 0.5)
        n_db = min(max(n_db, 1), len(members) - 1)
        db_part.extend(members[i] for i in order[:n_db])
        query_part.extend(members[i] for i in order[n_db:])
    db_part.sort(key=lambda r: r.id)
    query_part.sort(key=lambda r: r.id)
    return db_part, query_part


def _labels_of(ranked) -> list:
    if isinstance(ranked, RankedResult):
        return ranked.labels()
    return list(ranked)


def topk_accuracy(ranked_lists, truths: Sequence[str], k: int) -> float:
    """Fraction of queries whose truth appears in the first k labels."""
    if len(ranked_lists) != len(truths):
        raise ValidationError(
            f"{len(ranked_lists)} ranked lists but {len(truths)} truths"
        )
    if not truths:
        raise ValidationError("cannot score an empty query set")
    hits = 0
    for ranked, truth in zip(ranked_lists, truths):
        labels = _labels_of(ranked)
        if k > len(labels):
            raise ValidationError(
                f"k={k} exceeds ranked list length {len(labels)}"
            )
        if truth in labels[:k]:
            hits += 1
    return hits / len(truths)


def confusion(top1_predictions: Sequence[str], truths: Sequence[str],
              class_labels: Sequence[str]) -> np.ndarray:
    """Count matrix: entry (r, c) is truths==r retrieved as c at rank 1."""
    if len(top1_predictions) != len(truths):
        raise ValidationError(
            f"{len(top1_predictions)} predictions but {len(truths)} truths"
        )
    position = {label: i for i, label in enumerate(class_labels)}
    matrix = np.zeros((len(class_labels), len(class_labels)), dtype=np.int64)
    for truth, pred in zip(truths, top1_predictions):
        if truth not in position:
            raise ValidationError(f"unknown true label {truth!r}")
        if pred not in position:
            raise ValidationError(f"unknown predicted label {pred!r}")
        matrix[position[truth], position[pred]] += 1
    return matrix


def _run_case(db: DescriptorDatabase, case: QueryCase, mode: str,
              weights, k: int) -> list:
    if mode == MODE_CBIR:
        result = cbir_query(db, case.vector, k)
    elif mode == MODE_CBIDR:
        query = Query(vector=case.vector, clinical=case.clinical,
                      weights=tuple(weights), k=k)
        result = cbidr_query(db, query)
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return result.labels()


def evaluate(db: DescriptorDatabase, cases: Sequence[QueryCase], mode: str,
             weights=(0.5, 0.5), k: int = 5,
             workers: Optional[int] = None) -> EvalReport:
    """Run every case against the database and aggregate accuracies.

    workers > 1 evaluates queries on a thread pool; results are gathered
    in case order, so the report does not depend on scheduling.
    """
    if not cases:
        raise ValidationError("cannot evaluate an empty query set")
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            label_lists = list(pool.map(
                lambda case: _run_case(db, case, mode, weights, k), cases
            ))
    else:
        label_lists = [_run_case(db, case, mode, weights, k) for case in cases]

    truths = [case.label for case in cases]
    class_labels = tuple(sorted(set(truths) | set(db.labels)))
    top1 = topk_accuracy(label_lists, truths, 1)
    top5 = topk_accuracy(label_lists, truths, min(5, k))
    matrix = confusion([labels[0] for labels in label_lists], truths,
                       class_labels)
    per_query = tuple(
        (case.id, case.label, tuple(labels))
        for case, labels in zip(cases, label_lists)
    )
    return EvalReport(
        top1=top1, top5=top5, per_query=per_query, confusion=matrix,
        class_labels=class_labels,
        weights_used=tuple(weights) if mode == MODE_CBIDR else None,
        mode=mode, k=k,
    )


def weight_sweep(db: DescriptorDatabase, cases: Sequence[QueryCase],
                 weight_list=None, k: int = 5,
                 workers: Optional[int] = None) -> list:
    """One fused evaluation per weight pair over the identical query set."""
    if weight_list is None:
        weight_list = DEFAULT_SWEEP_WEIGHTS
    rows = []
    for weights in weight_list:
        report = evaluate(db, cases, MODE_CBIDR, weights=weights, k=k,
                          workers=workers)
        rows.append(SweepRow(weights=tuple(weights), top1=report.top1,
                             top5=report.top5))
    return rows


def split_bundle(bundle: DatasetBundle, fraction: float = DEFAULT_SPLIT_FRACTION,
                 seed: int = 0):
    """Split a bundle into a searchable database and held-out query cases."""
    db_records, query_records = split(bundle.records, fraction, seed)
    bits_by_id = dict(bundle.encoded_clinical())
    db = build_database(
        db_records,
        [(rec.id, bits_by_id[rec.id]) for rec in db_records],
        bundle.schema,
    )
    cases = [
        QueryCase(id=rec.id, label=rec.label, vector=rec.vector,
                  clinical=bits_by_id[rec.id])
        for rec in query_records
    ]
    return db, cases


# ---------------------------------------------------------------------------
# report rendering


def _percent(x: float) -> str:
    return f"{100.0 * x:.2f}"


def format_report(report: EvalReport) -> str:
    lines = [
        f"mode: {report.mode}",
        f"queries: {len(report.per_query)}",
        f"k: {report.k}",
    ]
    if report.weights_used is not None:
        w = report.weights_used
        lines.append(f"weights: [{w[0]:g}, {w[1]:g}]")
    lines.append(f"top-1 accuracy: {_percent(report.top1)}%")
    lines.append(f"top-5 accuracy: {_percent(report.top5)}%")
    lines.append("")
    lines.append("confusion (rows true, columns top-1 retrieved):")
    width = max(len(lab) for lab in report.class_labels)
    width = max(width, 6)
    header = " " * (width + 2) + "  ".join(
        f"{lab:>{width}}" for lab in report.class_labels
    )
    lines.append(header)
    for i, lab in enumerate(report.class_labels):
        counts = "  ".join(
            f"{int(report.confusion[i, j]):>{width}}"
            for j in range(len(report.class_labels))
        )
        lines.append(f"{lab:>{width}}  {counts}")
    return "\n".join(lines) + "\n"


def confusion_csv(report: EvalReport) -> str:
    lines = ["true\\predicted," + ",".join(report.class_labels)]
    for i, lab in enumerate(report.class_labels):
        row = ",".join(str(int(v)) for v in report.confusion[i])
        lines.append(f"{lab},{row}")
    return "\n".join(lines) + "\n"


def format_sweep_table(rows: Sequence[SweepRow]) -> str:
    lines = [
        f"{'w_image':>8}  {'w_clinical':>10}  {'top-1 %':>8}  {'top-5 %':>8}"
    ]
    for row in rows:
        lines.append(
            f"{row.weights[0]:>8.2f}  {row.weights[1]:>10.2f}  "
            f"{_percent(row.top1):>8}  {_percent(row.top5):>8}"
        )
    return "\n".join(lines) + "\n"


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    lines = ["w_image,w_clinical,top1_percent,top5_percent"]
    for row in rows:
        lines.append(
            f"{row.weights[0]:g},{row.weights[1]:g},"
            f"{_percent(row.top1)},{_percent(row.top5)}"
        )
    return "\n".join(lines) + "\n"
