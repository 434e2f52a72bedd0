"""Correlation coefficients and the system/summary correlation levels.

Undefined correlations (a constant argument) are reported as NaN.  The
``*_batch`` kernels operate along the last axis and broadcast over any
leading axes; the resampling code runs thousands of resamples through them
at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .scores import as_values


class Level(str, enum.Enum):
    SYSTEM = "sys"
    SUMMARY = "sum"


class Coefficient(str, enum.Enum):
    PEARSON = "pearson"
    SPEARMAN = "spearman"
    KENDALL = "kendall"


@dataclass(frozen=True)
class CorrelationSpec:
    level: Level = Level.SYSTEM
    coefficient: Coefficient = Coefficient.PEARSON

    def __post_init__(self):
        object.__setattr__(self, "level", Level(self.level))
        object.__setattr__(self, "coefficient", Coefficient(self.coefficient))

    def __str__(self):
        return f"{self.level.value}/{self.coefficient.value}"


@dataclass(frozen=True)
class CorrelationResult:
    value: float
    level: Level
    coefficient: Coefficient
    skipped_inputs: int = 0

    @property
    def defined(self) -> bool:
        return not math.isnan(self.value)


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("correlation arguments must be 1-D vectors")
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least 2 observations")
    return x, y


# --- batched kernels -------------------------------------------------------

def _constant(x: np.ndarray) -> np.ndarray:
    return np.ptp(x, axis=-1) == 0


def pearson_batch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x, y = np.broadcast_arrays(x, y)
    xc = x - x.mean(axis=-1, keepdims=True)
    yc = y - y.mean(axis=-1, keepdims=True)
    num = np.sum(xc * yc, axis=-1)
    den = np.sqrt(np.sum(xc * xc, axis=-1) * np.sum(yc * yc, axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.clip(num / den, -1.0, 1.0)
    bad = _constant(x) | _constant(y) | ~(den > 0)
    return np.where(bad, np.nan, r)


def rank_batch(x: np.ndarray) -> np.ndarray:
    return stats.rankdata(x, method="average", axis=-1)


def spearman_batch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x, y = np.broadcast_arrays(x, y)
    return pearson_batch(rank_batch(x), rank_batch(y))


def kendall_batch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Tau-b by direct pair enumeration."""
    x, y = np.broadcast_arrays(x, y)
    n = x.shape[-1]
    i, j = np.triu_indices(n, k=1)
    sx = np.sign(x[..., j] - x[..., i])
    sy = np.sign(y[..., j] - y[..., i])
    num = np.sum(sx * sy, axis=-1)
    den = np.sqrt(np.sum(np.abs(sx), axis=-1) * np.sum(np.abs(sy), axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.clip(num / den, -1.0, 1.0)
    return np.where(den > 0, r, np.nan)


_BATCH = {
    Coefficient.PEARSON: pearson_batch,
    Coefficient.SPEARMAN: spearman_batch,
    Coefficient.KENDALL: kendall_batch,
}


def coefficient_batch(coefficient) -> callable:
    return _BATCH[Coefficient(coefficient)]


def level_batch(X: np.ndarray, Z: np.ndarray, spec: CorrelationSpec,
                undefined: str = "skip") -> tuple[np.ndarray, np.ndarray]:
    """Correlation level of stacked matrices ``(..., N, M)``.

    Returns ``(values, skipped_inputs)``; skipped counts are zero at system level.
    """
    corr = _BATCH[spec.coefficient]
    X, Z = np.broadcast_arrays(X, Z)
    if spec.level is Level.SYSTEM:
        r = corr(X.mean(axis=-1), Z.mean(axis=-1))
        return r, np.zeros(r.shape, dtype=np.int64)
    per_input = corr(np.swapaxes(X, -1, -2), np.swapaxes(Z, -1, -2))
    nan = np.isnan(per_input)
    skipped = nan.sum(axis=-1)
    if undefined == "propagate":
        return per_input.mean(axis=-1), skipped
    if undefined != "skip":
        raise ValueError(f"unknown undefined-correlation policy {undefined!r}")
    used = per_input.shape[-1] - skipped
    total = np.where(nan, 0.0, per_input).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(used > 0, total / np.maximum(used, 1), np.nan)
    return mean, skipped


# --- scalar API --------------------------------------------------------------

def pearson(x, y) -> float:
    x, y = _check_pair(x, y)
    return float(pearson_batch(x, y))


def rank_with_ties(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank block."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("rank_with_ties needs a non-empty vector")
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    x, y = _check_pair(x, y)
    return float(pearson_batch(rank_with_ties(x), rank_with_ties(y)))


def kendall(x, y) -> float:
    x, y = _check_pair(x, y)
    return float(kendall_batch(x, y))


def correlate(x, y, coefficient) -> float:
    return {"pearson": pearson, "spearman": spearman, "kendall": kendall}[Coefficient(coefficient).value](x, y)


def _aligned(X, Z):
    X, Z = as_values(X), as_values(Z)
    if X.shape != Z.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Z.shape}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 systems")
    return X, Z


def system_level(X, Z, coefficient=Coefficient.PEARSON) -> CorrelationResult:
    """Correlation of the per-system mean scores."""
    X, Z = _aligned(X, Z)
    spec = CorrelationSpec(Level.SYSTEM, coefficient)
    r, _ = level_batch(X, Z, spec)
    return CorrelationResult(float(r), spec.level, spec.coefficient, 0)


def summary_level(X, Z, coefficient=Coefficient.PEARSON, undefined: str = "skip") -> CorrelationResult:
    """Average over inputs of the across-system correlation for that input.

    Inputs whose correlation is undefined are left out of the average and
    counted in ``skipped_inputs``; with ``undefined="propagate"`` any such input
    makes the whole result undefined.
    """
    X, Z = _aligned(X, Z)
    spec = CorrelationSpec(Level.SUMMARY, coefficient)
    r, skipped = level_batch(X, Z, spec, undefined)
    return CorrelationResult(float(r), spec.level, spec.coefficient, int(skipped))


def correlation(X, Z, spec: CorrelationSpec, undefined: str = "skip") -> CorrelationResult:
    if spec.level is Level.SYSTEM:
        return system_level(X, Z, spec.coefficient)
    return summary_level(X, Z, spec.coefficient, undefined)
