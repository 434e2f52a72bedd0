"""Simulation harnesses: CI coverage on held-out data and statistical power.

Also holds the difference-of-proportions z-test used to compare coverage
rates, and a synthetic world generator standing in for annotated datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _exec
from .ci import ConfidenceInterval, confidence_interval
from .correl import CorrelationSpec, correlation
from .hypo import run_test
from .numerics import RngStream, derive_seed, normal_sf
from .scores import ScoreMatrix, as_values


@dataclass(frozen=True)
class SplitPlan:
    systems_a: tuple[int, ...]
    systems_b: tuple[int, ...]
    inputs_a: tuple[int, ...]
    inputs_b: tuple[int, ...]


def _shuffled(n: int, stream: RngStream) -> list[int]:
    items = list(range(n))
    for i in range(n - 1, 0, -1):
        j = stream.uniform_index(i + 1)
        items[i], items[j] = items[j], items[i]
    return items


def draw_split(n_systems: int, n_inputs: int, stream: RngStream) -> SplitPlan:
    """Random halves of both axes; with an odd count, A gets the smaller half."""
    rows = _shuffled(n_systems, stream)
    cols = _shuffled(n_inputs, stream)
    hn, hm = n_systems // 2, n_inputs // 2
    return SplitPlan(tuple(sorted(rows[:hn])), tuple(sorted(rows[hn:])),
                     tuple(sorted(cols[:hm])), tuple(sorted(cols[hm:])))


@dataclass(frozen=True)
class SyntheticWorld:
    """z = s_i + d_j + e_ij ;  x = lam * z + (1 - lam) * e'_ij (all Gaussian).

    ``metric_noise_sd`` is the stdev of e'; None means the same as ``noise_sd``.
    """

    n_systems: int = 20
    n_inputs: int = 20
    system_sd: float = 1.0
    input_sd: float = 1.0
    noise_sd: float = 1.0
    lam: float = 0.5
    seed: int = 0
    metric_noise_sd: float | None = None

    def __post_init__(self):
        if self.n_systems < 4 or self.n_inputs < 2:
            raise ValueError("a synthetic world needs at least 4 systems and 2 inputs")
        if min(self.system_sd, self.input_sd, self.noise_sd) < 0:
            raise ValueError("standard deviations must be non-negative")
        if self.metric_noise_sd is not None and self.metric_noise_sd < 0:
            raise ValueError("standard deviations must be non-negative")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")


def _world_arrays(w: SyntheticWorld, n_metrics: int):
    rng = np.random.default_rng(w.seed)
    n, m = w.n_systems, w.n_inputs
    s = rng.normal(0.0, w.system_sd, size=n)
    d = rng.normal(0.0, w.input_sd, size=m)
    eps = rng.normal(0.0, w.noise_sd, size=(n, m))
    z = s[:, None] + d[None, :] + eps
    msd = w.noise_sd if w.metric_noise_sd is None else w.metric_noise_sd
    metrics = [w.lam * z + (1.0 - w.lam) * rng.normal(0.0, msd, size=(n, m)) for _ in range(n_metrics)]
    return z, metrics


def _as_matrix(name, values):
    n, m = values.shape
    return ScoreMatrix(name, tuple(f"s{i:03d}" for i in range(n)), tuple(f"d{j:03d}" for j in range(m)), values)


def generate_world(w: SyntheticWorld) -> tuple[ScoreMatrix, ScoreMatrix]:
    z, (x,) = _world_arrays(w, 1)
    return _as_matrix("metric", x), _as_matrix("truth", z)


def generate_exchangeable_world(w: SyntheticWorld) -> tuple[ScoreMatrix, ScoreMatrix, ScoreMatrix]:
    """X, Y drawn independently given Z with the same mixing weight (so H0 holds).

    X and Z coincide with :func:`generate_world` for the same world.
    """
    z, (x, y) = _world_arrays(w, 2)
    return _as_matrix("metric_x", x), _as_matrix("metric_y", y), _as_matrix("truth", z)


# --- coverage ----------------------------------------------------------------

@dataclass(frozen=True)
class CoverageTrial:
    lower: float
    upper: float
    held_out: float
    contained: bool
    retries: int


@dataclass(frozen=True)
class CoverageReport:
    ci_method: str
    level: str
    coefficient: str
    alpha: float
    resamples: int
    seed: int
    trials: int
    contained: int
    retries: int
    records: list[CoverageTrial] = field(default_factory=list, repr=False)

    @property
    def proportion(self) -> float:
        return self.contained / self.trials


CIFunction = Callable[[np.ndarray, np.ndarray, int], ConfidenceInterval]


def coverage_simulation(X, Z, ci_method: str | CIFunction, spec: CorrelationSpec = CorrelationSpec(),
                        trials: int = 1000, alpha: float = 0.05, k: int = 1000, seed: int = 0,
                        workers: int = 1, max_retries: int = 10) -> CoverageReport:
    """How often a CI computed on half the systems and inputs contains the
    correlation of the other half.

    ``ci_method`` is a CI method name or a callable ``(X_a, Z_a, seed) -> CI``.
    A trial whose split leaves an undefined correlation is redrawn, at most
    ``max_retries`` times.
    """
    X, Z = as_values(X), as_values(Z)
    if X.shape != Z.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Z.shape}")
    n, m = X.shape
    if n < 4 or m < 2:
        raise ValueError("coverage simulation needs at least 4 systems and 2 inputs")
    if trials < 1:
        raise ValueError("need at least one trial")

    if callable(ci_method):
        make_ci, name = ci_method, getattr(ci_method, "__name__", "custom")
    else:
        def make_ci(xa, za, s):
            return confidence_interval(xa, za, ci_method, spec, alpha, k, s)
        name = ci_method

    def trial(t: int) -> CoverageTrial:
        stream = RngStream(seed, t)
        for attempt in range(max_retries + 1):
            plan = draw_split(n, m, stream)
            ci_seed = stream.next_u64()
            a = np.ix_(plan.systems_a, plan.inputs_a)
            b = np.ix_(plan.systems_b, plan.inputs_b)
            held = correlation(X[b], Z[b], spec).value
            if math.isnan(held):
                continue
            try:
                ci = make_ci(X[a], Z[a], ci_seed)
            except ValueError:
                continue
            inside = ci.lower <= held <= ci.upper
            return CoverageTrial(ci.lower, ci.upper, held, inside, attempt)
        raise RuntimeError(f"trial {t}: no usable split after {max_retries} retries")

    records = _exec.map_ordered(trial, range(trials), workers)
    return CoverageReport(
        ci_method=name, level=spec.level.value, coefficient=spec.coefficient.value, alpha=alpha,
        resamples=0 if name == "fisher" else k, seed=seed, trials=trials,
        contained=sum(r.contained for r in records), retries=sum(r.retries for r in records),
        records=records,
    )


def proportions_z_test(c1: int, n1: int, c2: int, n2: int) -> float:
    """One-tailed pooled z-test of H1: c1/n1 > c2/n2; returns the p-value.

    When the pooled proportion is 0 or 1 the variance vanishes: p is 0.5 for
    equal proportions, otherwise 0 or 1 by the sign of the difference.
    """
    for c, n in ((c1, n1), (c2, n2)):
        if n < 1 or not 0 <= c <= n:
            raise ValueError(f"invalid count {c} of {n}")
    p1, p2 = c1 / n1, c2 / n2
    pooled = (c1 + c2) / (n1 + n2)
    var = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)
    if var <= 0.0:
        if p1 == p2:
            return 0.5
        return 0.0 if p1 > p2 else 1.0
    return normal_sf((p1 - p2) / math.sqrt(var))


# --- power -------------------------------------------------------------------

@dataclass(frozen=True)
class PowerCurve:
    test: str
    level: str
    coefficient: str
    alpha: float
    trials: int
    resamples: int
    seed: int
    k_percent: list[float]
    rejections: list[int]

    @property
    def power(self) -> list[float]:
        return [c / self.trials for c in self.rejections]


def degrade(X_base: np.ndarray, k_percent: float, rng: np.random.Generator) -> np.ndarray:
    """Keep k% of the metric and fill the rest with noise matching its mean and spread."""
    f = k_percent / 100.0
    noise = rng.normal(X_base.mean(), X_base.std(), size=X_base.shape)
    return f * X_base + (1.0 - f) * noise


def power_simulation(X_base, Z, levels: Sequence[float], tests: str | Sequence[str],
                     spec: CorrelationSpec = CorrelationSpec(), trials: int = 1000,
                     alpha: float = 0.05, k: int = 1000, seed: int = 0, workers: int = 1,
                     tie_policy: str = "inclusive") -> list[PowerCurve]:
    """Rejection rate of "X_base beats its degraded copy" per degradation level.

    Every test sees the same degraded copies.  ``tie_policy`` defaults to
    ``inclusive`` so that the undegraded level (identical metrics) counts as
    no evidence rather than p = 0.
    """
    X_base, Z = as_values(X_base), as_values(Z)
    if X_base.shape != Z.shape:
        raise ValueError(f"shape mismatch: {X_base.shape} vs {Z.shape}")
    if np.ptp(X_base) == 0:
        raise ValueError("base metric is constant")
    if trials < 1:
        raise ValueError("need at least one trial per level")
    levels = [float(v) for v in levels]
    if not levels:
        raise ValueError("empty degradation schedule")
    for v in levels:
        if not 0.0 <= v <= 100.0:
            raise ValueError(f"degradation level {v} outside [0, 100]")
    tests = [tests] if isinstance(tests, str) else list(tests)

    def trial(job):
        li, t = job
        trial_seed = derive_seed(seed, li * (1 << 32) + t)
        Y = degrade(X_base, levels[li], np.random.default_rng(trial_seed))
        test_seed = derive_seed(trial_seed, 1)
        return [run_test(X_base, Y, Z, name, spec, k, test_seed, tie_policy).p_value < alpha
                for name in tests]

    jobs = [(li, t) for li in range(len(levels)) for t in range(trials)]
    outcomes = _exec.map_ordered(trial, jobs, workers)
    curves = []
    for ti, name in enumerate(tests):
        counts = [sum(outcomes[li * trials + t][ti] for t in range(trials)) for li in range(len(levels))]
        curves.append(PowerCurve(
            test=name, level=spec.level.value, coefficient=spec.coefficient.value, alpha=alpha,
            trials=trials, resamples=0 if name == "williams" else k, seed=seed,
            k_percent=levels, rejections=counts,
        ))
    return curves
