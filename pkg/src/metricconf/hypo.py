"""One-tailed tests of H1: rho(X, Z) - rho(Y, Z) > 0.

Williams' test, permutation tests that swap scores between X and Y at system,
input or summary granularity, a paired bootstrap test, and Bonferroni
correction for families of such tests.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _exec
from .ci import BootMethod, draw_boot_indices, take
from .correl import Coefficient, CorrelationSpec, Level, correlation, level_batch
from .numerics import RngStream, StreamBatch, student_t_sf
from .scores import as_values

# statistics closer than this are treated as tied
TIE_TOL = 1e-12
# a Williams determinant this far below zero is accepted as rounding noise
DET_TOL = 1e-10


class PermMethod(str, enum.Enum):
    SYSTEMS = "perm-systems"
    INPUTS = "perm-inputs"
    BOTH = "perm-both"


TEST_METHODS = ("williams",) + tuple(m.value for m in PermMethod) + ("paired-boot",)
TIE_POLICIES = ("strict", "inclusive")


@dataclass(frozen=True)
class TestResult:
    p_value: float
    delta: float
    method: str
    resamples: int | None = None
    seed: int | None = None
    tie_policy: str | None = None
    degenerate_resamples: int = 0
    level: str | None = None
    coefficient: str | None = None
    experimental: bool = False
    boot_method: str | None = None

    __test__ = False  # keep pytest from collecting this class

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def standardize(X) -> np.ndarray:
    """Centre and scale by the mean and population stdev of all N*M entries."""
    X = as_values(X)
    if np.ptp(X) == 0:
        raise ValueError("cannot standardize a constant score matrix")
    return (X - X.mean()) / X.std()


def _aligned3(X, Y, Z):
    X, Y, Z = as_values(X), as_values(Y), as_values(Z)
    if not X.shape == Y.shape == Z.shape:
        raise ValueError(f"shape mismatch: {X.shape}, {Y.shape}, {Z.shape}")
    return X, Y, Z


def draw_perm_coins(method, n_systems: int, n_inputs: int, seed: int,
                    start: int, count: int) -> np.ndarray:
    """Swap flags broadcastable to (count, N, M); coins are drawn in row-major order."""
    method = PermMethod(method)
    batch = StreamBatch(seed, start, count)
    if method is PermMethod.SYSTEMS:
        return np.stack([batch.fair_coin() for _ in range(n_systems)], axis=1)[:, :, None]
    if method is PermMethod.INPUTS:
        return np.stack([batch.fair_coin() for _ in range(n_inputs)], axis=1)[:, None, :]
    flat = np.stack([batch.fair_coin() for _ in range(n_systems * n_inputs)], axis=1)
    return flat.reshape(count, n_systems, n_inputs)


def perm_sample(X, Y, method, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """One permutation resample: swap rows, columns or cells of X and Y on fair coins."""
    X, Y = as_values(X), as_values(Y)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    method = PermMethod(method)
    n, m = X.shape
    if method is PermMethod.SYSTEMS:
        swap = np.array([stream.fair_coin() for _ in range(n)])[:, None]
    elif method is PermMethod.INPUTS:
        swap = np.array([stream.fair_coin() for _ in range(m)])[None, :]
    else:
        swap = np.array([stream.fair_coin() for _ in range(n * m)]).reshape(n, m)
    return np.where(swap, Y, X), np.where(swap, X, Y)


def _delta(Xs, Ys, Z, spec, undefined):
    rx, _ = level_batch(Xs, Z, spec, undefined)
    ry, _ = level_batch(Ys, Z, spec, undefined)
    return rx - ry


def _cells(shape, spec, n_mats: int = 2):
    n, m = shape
    per = n_mats * n * m
    if spec.coefficient is Coefficient.KENDALL:
        per *= max(1, n // 2)
    return per


def permutation_deltas(X, Y, Z, method, spec: CorrelationSpec, k: int, seed: int,
                       workers: int = 1, undefined: str = "skip") -> tuple[float, np.ndarray]:
    """Observed delta and the k permuted deltas (NaN when degenerate) on standardized X, Y."""
    X, Y, Z = _aligned3(X, Y, Z)
    X, Y = standardize(X), standardize(Y)
    method = PermMethod(method)
    n, m = X.shape
    delta = float(_delta(X[None], Y[None], Z, spec, undefined)[0])

    def run(start, count):
        swap = draw_perm_coins(method, n, m, seed, start, count)
        Xs = np.where(swap, Y, X)
        Ys = np.where(swap, X, Y)
        return _delta(Xs, Ys, Z, spec, undefined)

    return delta, _exec.run_iterations(run, k, _cells(X.shape, spec), workers)


def permutation_test(X, Y, Z, method=PermMethod.BOTH, spec: CorrelationSpec = CorrelationSpec(),
                     k: int = 1000, seed: int = 0, tie_policy: str = "strict",
                     workers: int = 1, undefined: str = "skip") -> TestResult:
    """Approximate randomization test of rho(X, Z) > rho(Y, Z).

    ``p = c / k'`` where ``k'`` counts the non-degenerate resamples and ``c``
    those whose delta exceeds the observed one (``strict``) or reaches it
    (``inclusive``).  Under ``strict``, identical X and Y give p = 0.
    """
    if k < 100:
        raise ValueError(f"need at least 100 resamples, got {k}")
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    method = PermMethod(method)
    delta, deltas = permutation_deltas(X, Y, Z, method, spec, k, seed, workers, undefined)
    if math.isnan(delta):
        raise ValueError("observed correlation is undefined")
    valid = deltas[~np.isnan(deltas)]
    if valid.size == 0:
        raise ValueError(f"all {k} permutation resamples were degenerate")
    if tie_policy == "strict":
        c = int(np.count_nonzero(valid > delta + TIE_TOL))
    else:
        c = int(np.count_nonzero(valid >= delta - TIE_TOL))
    return TestResult(
        p_value=c / valid.size, delta=delta, method=method.value, resamples=k, seed=seed,
        tie_policy=tie_policy, degenerate_resamples=int(k - valid.size),
        level=spec.level.value, coefficient=spec.coefficient.value,
    )


def williams_t(r_xz: float, r_yz: float, r_xy: float, n: int) -> float:
    """Williams' t for comparing two dependent correlations sharing Z.

    t = (r_xz - r_yz) * sqrt((n-1)(1+r_xy))
        / sqrt(2K(n-1)/(n-3) + ((r_xz+r_yz)^2/4)(1-r_xy)^3)
    K = 1 - r_xz^2 - r_yz^2 - r_xy^2 + 2 r_xz r_yz r_xy
    """
    if n <= 3:
        raise ValueError(f"Williams' test needs n > 3, got {n}")
    for name, r in (("r_xz", r_xz), ("r_yz", r_yz), ("r_xy", r_xy)):
        if not -1.0 <= r <= 1.0:
            raise ValueError(f"{name} = {r} is not a correlation")
    if r_xz == r_yz:
        return 0.0
    # grouped so that swapping r_xz and r_yz gives exactly -t
    K = 1 - (r_xz * r_xz + r_yz * r_yz) - r_xy * r_xy + 2 * (r_xz * r_yz) * r_xy
    if K < -DET_TOL:
        raise ValueError(f"correlations ({r_xz}, {r_yz}, {r_xy}) are not jointly attainable (K = {K:.3g})")
    K = max(K, 0.0)
    num = (r_xz - r_yz) * math.sqrt((n - 1) * (1 + r_xy))
    den2 = 2 * K * (n - 1) / (n - 3) + ((r_xz + r_yz) ** 2 / 4) * (1 - r_xy) ** 3
    if not den2 > 0:
        raise ValueError(f"degenerate correlation triple ({r_xz}, {r_yz}, {r_xy})")
    return num / math.sqrt(den2)


def williams_test(r_xz: float, r_yz: float, r_xy: float, n: int) -> TestResult:
    t = williams_t(r_xz, r_yz, r_xy, n)
    return TestResult(p_value=student_t_sf(t, n - 3), delta=r_xz - r_yz, method="williams")


def williams_from_matrices(X, Y, Z, spec: CorrelationSpec = CorrelationSpec()) -> TestResult:
    """Williams' test on the pairwise correlation levels, with n = number of systems.

    At summary level the averaged correlations are plugged in as if they were
    ordinary correlations; that use is marked ``experimental``.
    """
    X, Y, Z = _aligned3(X, Y, Z)
    r_xz = correlation(X, Z, spec).value
    r_yz = correlation(Y, Z, spec).value
    r_xy = correlation(X, Y, spec).value
    if any(math.isnan(r) for r in (r_xz, r_yz, r_xy)):
        raise ValueError("a pairwise correlation is undefined")
    res = williams_test(r_xz, r_yz, r_xy, X.shape[0])
    return TestResult(
        p_value=res.p_value, delta=res.delta, method="williams",
        level=spec.level.value, coefficient=spec.coefficient.value,
        experimental=spec.level is Level.SUMMARY,
    )


def paired_bootstrap_deltas(X, Y, Z, method, spec: CorrelationSpec, k: int, seed: int,
                            workers: int = 1, undefined: str = "skip") -> np.ndarray:
    X, Y, Z = _aligned3(X, Y, Z)
    method = BootMethod(method)
    n, m = X.shape

    def run(start, count):
        rows, cols = draw_boot_indices(method, n, m, seed, start, count)
        Xs, Ys, Zs = take((X, Y, Z), rows, cols)
        return np.broadcast_to(_delta(Xs, Ys, Zs, spec, undefined), (count,))

    return _exec.run_iterations(run, k, _cells(X.shape, spec, 3), workers)


def paired_bootstrap_test(X, Y, Z, method=BootMethod.BOTH, spec: CorrelationSpec = CorrelationSpec(),
                          k: int = 1000, seed: int = 0, workers: int = 1,
                          undefined: str = "skip") -> TestResult:
    """p = share of non-degenerate resamples (same indices for X, Y, Z) with delta <= 0."""
    if k < 100:
        raise ValueError(f"need at least 100 resamples, got {k}")
    X, Y, Z = _aligned3(X, Y, Z)
    standardize(X), standardize(Y)  # rejects constant matrices
    method = BootMethod(method)
    delta = correlation(X, Z, spec, undefined).value - correlation(Y, Z, spec, undefined).value
    if math.isnan(delta):
        raise ValueError("observed correlation is undefined")
    deltas = paired_bootstrap_deltas(X, Y, Z, method, spec, k, seed, workers, undefined)
    valid = deltas[~np.isnan(deltas)]
    if valid.size == 0:
        raise ValueError(f"all {k} bootstrap resamples were degenerate")
    c = int(np.count_nonzero(valid <= TIE_TOL))
    return TestResult(
        p_value=c / valid.size, delta=delta, method="paired-boot", resamples=k, seed=seed,
        degenerate_resamples=int(k - valid.size), level=spec.level.value,
        coefficient=spec.coefficient.value, boot_method=method.value,
    )


def run_test(X, Y, Z, test: str, spec: CorrelationSpec, k: int = 1000, seed: int = 0,
             tie_policy: str = "strict", boot_method=BootMethod.BOTH, workers: int = 1) -> TestResult:
    if test == "williams":
        return williams_from_matrices(X, Y, Z, spec)
    if test == "paired-boot":
        return paired_bootstrap_test(X, Y, Z, boot_method, spec, k, seed, workers)
    return permutation_test(X, Y, Z, test, spec, k, seed, tie_policy, workers)


def bonferroni_reject(p_values: Sequence[float], alpha: float = 0.05,
                      groups: Sequence[Sequence[int]] | None = None) -> list[tuple[bool, bool]]:
    """``(raw, corrected)`` significance per test.

    ``groups`` partitions the test indices into families; inside a family of
    size m a test survives correction when p < alpha / m.  Default: one family.
    """
    p = [float(v) for v in p_values]
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"p-value {v} outside [0, 1]")
    if groups is None:
        groups = [list(range(len(p)))] if p else []
    seen: set[int] = set()
    threshold = [None] * len(p)
    for g in groups:
        if len(g) == 0:
            raise ValueError("empty group in Bonferroni partition")
        for i in g:
            if not 0 <= i < len(p):
                raise ValueError(f"group references unknown test index {i}")
            if i in seen:
                raise ValueError(f"test index {i} appears in more than one group")
            seen.add(i)
            threshold[i] = alpha / len(g)
    if len(seen) != len(p):
        missing = sorted(set(range(len(p))) - seen)
        raise ValueError(f"test indices {missing} are not in any group")
    return [(v < alpha, v < t) for v, t in zip(p, threshold)]


def bonferroni_thresholds(groups: Sequence[Sequence[int]], n_tests: int, alpha: float = 0.05) -> list[float]:
    out = [math.nan] * n_tests
    for g in groups:
        for i in g:
            out[i] = alpha / len(g)
    return out
