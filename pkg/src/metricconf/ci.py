"""Confidence intervals for correlation levels: Fisher transformation and bootstrap."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _exec
from .correl import Coefficient, CorrelationSpec, Level, correlation, level_batch
from .numerics import RngStream, StreamBatch, normal_quantile
from .scores import as_values


class BootMethod(str, enum.Enum):
    SYSTEMS = "boot-systems"
    INPUTS = "boot-inputs"
    BOTH = "boot-both"

    @property
    def resamples_systems(self) -> bool:
        return self is not BootMethod.INPUTS

    @property
    def resamples_inputs(self) -> bool:
        return self is not BootMethod.SYSTEMS


CI_METHODS = ("fisher",) + tuple(m.value for m in BootMethod)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    alpha: float
    point: float
    method: str
    resamples: int = 0
    seed: int | None = None
    degenerate_resamples: int = 0
    level: str | None = None
    coefficient: str | None = None

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def fisher_constants(coefficient, r: float = 0.0) -> tuple[int, float]:
    """``(b, c)`` for the Fisher interval (Bonett & Wright 2000)."""
    coefficient = Coefficient(coefficient)
    if coefficient is Coefficient.PEARSON:
        return 3, 1.0
    if coefficient is Coefficient.SPEARMAN:
        return 3, math.sqrt(1.0 + r * r / 2.0)
    return 4, math.sqrt(0.437)


def fisher_ci(r: float, n: int, coefficient=Coefficient.PEARSON, alpha: float = 0.05,
              method: str = "fisher") -> ConfidenceInterval:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not abs(r) < 1.0:
        raise ValueError(
            f"Fisher interval undefined for r = {r} (arctanh diverges); use a bootstrap interval"
        )
    b, c = fisher_constants(coefficient, r)
    if n <= b:
        raise ValueError(f"Fisher interval needs n > {b} for {Coefficient(coefficient).value}, got n = {n}")
    z = math.atanh(r)
    half = normal_quantile(1.0 - alpha / 2.0) * c / math.sqrt(n - b)
    return ConfidenceInterval(
        lower=math.tanh(z - half), upper=math.tanh(z + half), alpha=alpha, point=r,
        method=method, coefficient=Coefficient(coefficient).value,
    )


def fisher_ci_matrices(X, Z, spec: CorrelationSpec, alpha: float = 0.05) -> ConfidenceInterval:
    """Fisher interval of a correlation level with ``n`` = number of systems.

    At summary level the transformation is applied to the averaged coefficient,
    which is not itself a correlation; such intervals are labelled
    ``fisher-summary``.
    """
    X, Z = as_values(X), as_values(Z)
    r = correlation(X, Z, spec).value
    if math.isnan(r):
        raise ValueError("correlation on the original data is undefined")
    method = "fisher" if spec.level is Level.SYSTEM else "fisher-summary"
    ci = fisher_ci(r, X.shape[0], spec.coefficient, alpha, method=method)
    return _with(ci, level=spec.level.value)


def _with(ci: ConfidenceInterval, **kw) -> ConfidenceInterval:
    return ConfidenceInterval(**{**ci.__dict__, **kw})


# --- bootstrap -------------------------------------------------------------------

def draw_boot_indices(method, n_systems: int, n_inputs: int, seed: int,
                      start: int, count: int) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Row and column samples for iterations ``start .. start+count-1``.

    Each iteration's stream draws the N system indices first, then the M input
    indices.  ``None`` stands for "keep the axis as is".
    """
    method = BootMethod(method)
    batch = StreamBatch(seed, start, count)
    rows = cols = None
    if method.resamples_systems:
        rows = np.stack([batch.uniform_index(n_systems) for _ in range(n_systems)], axis=1)
    if method.resamples_inputs:
        cols = np.stack([batch.uniform_index(n_inputs) for _ in range(n_inputs)], axis=1)
    return rows, cols


def take(mats: tuple[np.ndarray, ...], rows, cols) -> list[np.ndarray]:
    """Apply sampled indices to each matrix, giving stacks of shape (count, N, M)."""
    out = []
    for m in mats:
        m = m[rows] if rows is not None else m[None]
        if cols is not None:
            m = np.broadcast_to(m, (cols.shape[0],) + m.shape[1:])
            idx = np.broadcast_to(cols[:, None, :], (cols.shape[0], m.shape[1], cols.shape[1]))
            m = np.take_along_axis(m, idx, axis=2)
        out.append(m)
    return out


def boot_sample(X, Z, method, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """One bootstrap resample of the pair, drawn from a single stream."""
    X, Z = as_values(X), as_values(Z)
    if X.shape != Z.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Z.shape}")
    method = BootMethod(method)
    n, m = X.shape
    rows = [stream.uniform_index(n) for _ in range(n)] if method.resamples_systems else list(range(n))
    cols = [stream.uniform_index(m) for _ in range(m)] if method.resamples_inputs else list(range(m))
    ix = np.ix_(rows, cols)
    return X[ix], Z[ix]


def _cells(shape, spec: CorrelationSpec) -> int:
    n, m = shape
    per = n * m
    if spec.coefficient is Coefficient.KENDALL:
        per *= max(1, n // 2)
    return per


def bootstrap_samples(X, Z, method, spec: CorrelationSpec, k: int = 1000, seed: int = 0,
                      workers: int = 1, undefined: str = "skip") -> np.ndarray:
    """The k resampled correlations (NaN where a resample is degenerate)."""
    X, Z = as_values(X), as_values(Z)
    if X.shape != Z.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Z.shape}")
    method = BootMethod(method)
    n, m = X.shape

    def run(start, count):
        rows, cols = draw_boot_indices(method, n, m, seed, start, count)
        Xs, Zs = take((X, Z), rows, cols)
        r, _ = level_batch(Xs, Zs, spec, undefined)
        return np.broadcast_to(r, (count,))

    return _exec.run_iterations(run, k, _cells(X.shape, spec), workers)


def percentile_interval(samples: np.ndarray, alpha: float) -> tuple[float, float]:
    """Empirical alpha/2 and 1-alpha/2 percentiles, linear interpolation between order statistics."""
    lo, hi = np.percentile(samples, [100 * alpha / 2, 100 * (1 - alpha / 2)], method="linear")
    return float(lo), float(hi)


def bootstrap_ci(X, Z, method, spec: CorrelationSpec, k: int = 1000, alpha: float = 0.05,
                 seed: int = 0, workers: int = 1, undefined: str = "skip") -> ConfidenceInterval:
    """Percentile bootstrap interval; iteration i resamples with stream (seed, i)."""
    if k < 100:
        raise ValueError(f"need at least 100 resamples, got {k}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    method = BootMethod(method)
    point = correlation(X, Z, spec, undefined).value
    if math.isnan(point):
        raise ValueError("correlation on the original data is undefined")
    samples = bootstrap_samples(X, Z, method, spec, k, seed, workers, undefined)
    valid = samples[~np.isnan(samples)]
    if valid.size == 0:
        raise ValueError(f"all {k} bootstrap resamples were degenerate")
    lo, hi = percentile_interval(valid, alpha)
    return ConfidenceInterval(
        lower=lo, upper=hi, alpha=alpha, point=point, method=method.value, resamples=k,
        seed=seed, degenerate_resamples=int(k - valid.size),
        level=spec.level.value, coefficient=spec.coefficient.value,
    )


def confidence_interval(X, Z, ci_method: str, spec: CorrelationSpec, alpha: float = 0.05,
                        k: int = 1000, seed: int = 0, workers: int = 1) -> ConfidenceInterval:
    if ci_method == "fisher":
        ci = fisher_ci_matrices(X, Z, spec, alpha)
        return _with(ci, coefficient=spec.coefficient.value)
    return bootstrap_ci(X, Z, ci_method, spec, k, alpha, seed, workers)
