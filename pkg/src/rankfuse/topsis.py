"""Ranking by similarity to ideal solutions.

Alternatives (rows of a decision matrix) are scored against criteria
(columns) in five steps: column-wise Euclidean normalization, weighting,
ideal/anti-ideal extraction per criterion direction, separation measures,
and relative closeness. Higher closeness is better; all arithmetic is
double precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ValidationError, WeightError

COST = "cost"
BENEFIT = "benefit"

WEIGHT_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DecisionMatrix:
    """m alternatives evaluated on n criteria; all entries finite."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(
                f"decision matrix must be 2-D, got shape {arr.shape}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(
                f"decision matrix needs at least one row and column, "
                f"got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("decision matrix contains non-finite entries")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def m(self) -> int:
        return int(self.values.shape[0])

    @property
    def n(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class TopsisConfig:
    """Criterion weights (nonnegative, summing to 1) and directions."""

    weights: np.ndarray
    directions: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise WeightError(f"weights must be 1-D, got shape {w.shape}")
        dirs = tuple(self.directions)
        if len(dirs) != w.shape[0]:
            raise ValidationError(
                f"{w.shape[0]} weights but {len(dirs)} directions"
            )
        if any(d not in (COST, BENEFIT) for d in dirs):
            raise ValidationError(
                f"directions must be {COST!r} or {BENEFIT!r}, got {dirs}"
            )
        if np.any(w < 0.0):
            raise WeightError(f"weights must be nonnegative, got {w.tolist()}")
        total = float(np.sum(w))
        if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise WeightError(
                f"weights must sum to 1 (got {total!r}); "
                "inputs are validated, not renormalized"
            )
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "directions", dirs)

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])


@dataclass(frozen=True)
class TopsisResult:
    closeness: np.ndarray    # (m,) relative closeness, each in [0, 1]
    ranking: np.ndarray      # permutation of row indices, best first
    separations: Tuple[np.ndarray, np.ndarray]  # (d_plus, d_minus)


def normalize(matrix: DecisionMatrix) -> np.ndarray:
    """Scale each column to unit Euclidean norm.

    An all-zero column carries no information and maps to an all-zero
    column instead of dividing by zero.
    """
    x = matrix.values
    norms = np.sqrt(np.sum(x * x, axis=0))
    safe = np.where(norms == 0.0, 1.0, norms)
    return x / safe


def apply_weights(normalized: np.ndarray, config: TopsisConfig) -> np.ndarray:
    """Multiply each normalized column by its criterion weight."""
    r = np.asarray(normalized, dtype=np.float64)
    if r.ndim != 2 or r.shape[1] != config.n:
        raise ValidationError(
            f"normalized matrix has {r.shape[1] if r.ndim == 2 else '?'} "
            f"columns, config expects {config.n}"
        )
    return r * config.weights


def ideal_solutions(
    weighted: np.ndarray, directions: Sequence[str]
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-criterion best and worst values.

    For a benefit criterion the ideal is the column max and the anti-ideal
    the min; for a cost criterion the operators swap.
    """
    p = np.asarray(weighted, dtype=np.float64)
    col_max = p.max(axis=0)
    col_min = p.min(axis=0)
    is_benefit = np.array([d == BENEFIT for d in directions])
    a_pos = np.where(is_benefit, col_max, col_min)
    a_neg = np.where(is_benefit, col_min, col_max)
    return a_pos, a_neg


def separations(
    weighted: np.ndarray, a_pos: np.ndarray, a_neg: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Euclidean distance of each row to the ideal and anti-ideal vectors."""
    p = np.asarray(weighted, dtype=np.float64)
    d_pos = np.sqrt(np.sum((p - a_pos) ** 2, axis=1))
    d_neg = np.sqrt(np.sum((p - a_neg) ** 2, axis=1))
    return d_pos, d_neg


def closeness(d_pos: np.ndarray, d_neg: np.ndarray) -> np.ndarray:
    """Relative closeness d-/(d+ + d-), in [0, 1].

    When an alternative coincides with both ideals (d+ = d- = 0) the value
    is 0.5 by convention: equidistant from both.
    """
    dp = np.asarray(d_pos, dtype=np.float64)
    dn = np.asarray(d_neg, dtype=np.float64)
    if np.any(dp < 0.0) or np.any(dn < 0.0):
        raise ValidationError("separation measures must be nonnegative")
    denom = dp + dn
    out = np.full_like(denom, 0.5)
    nz = denom > 0.0
    out[nz] = dn[nz] / denom[nz]
    return out


def rank(matrix: DecisionMatrix, config: TopsisConfig) -> TopsisResult:
    """Full pipeline: normalize, weight, ideals, separations, closeness.

    The ranking sorts row indices by descending closeness, ties broken by
    ascending index.
    """
    if matrix.n != config.n:
        raise ValidationError(
            f"matrix has {matrix.n} criteria, config has {config.n}"
        )
    weighted = apply_weights(normalize(matrix), config)
    a_pos, a_neg = ideal_solutions(weighted, config.directions)
    d_pos, d_neg = separations(weighted, a_pos, a_neg)
    xi = closeness(d_pos, d_neg)
    ranking = np.lexsort((np.arange(matrix.m), -xi))
    return TopsisResult(closeness=xi, ranking=ranking, separations=(d_pos, d_neg))
