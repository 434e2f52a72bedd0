"""Straightforward pure-Python reimplementations used as test oracles.

Nothing here imports the package; each function follows the textbook
definition as literally as possible.
"""

import itertools
import math


def mean(v):
    return sum(v) / len(v)


def pearson(x, y):
    if len(set(x)) == 1 or len(set(y)) == 1:
        return math.nan
    mx, my = mean(x), mean(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def average_ranks(x):
    # rank = 1 + (#smaller) + (#equal - 1) / 2
    return [1 + sum(b < a for b in x) + (sum(b == a for b in x) - 1) / 2 for a in x]


def spearman(x, y):
    return pearson(average_ranks(x), average_ranks(y))


def kendall_tau_b(x, y):
    conc = disc = tx = ty = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        dx, dy = x[i] - x[j], y[i] - y[j]
        if dx == 0 and dy == 0:
            continue
        if dx == 0:
            tx += 1
        elif dy == 0:
            ty += 1
        elif dx * dy > 0:
            conc += 1
        else:
            disc += 1
    den = math.sqrt((conc + disc + tx) * (conc + disc + ty))
    return math.nan if den == 0 else (conc - disc) / den


COEF = {"pearson": pearson, "spearman": spearman, "kendall": kendall_tau_b}


def system_level(X, Z, coef):
    return COEF[coef]([mean(r) for r in X], [mean(r) for r in Z])


def summary_level(X, Z, coef):
    vals = []
    for j in range(len(X[0])):
        r = COEF[coef]([row[j] for row in X], [row[j] for row in Z])
        if not math.isnan(r):
            vals.append(r)
    return mean(vals) if vals else math.nan


def level(X, Z, lvl, coef):
    return (system_level if lvl == "sys" else summary_level)(X, Z, coef)


def select(X, rows, cols):
    return [[X[i][j] for j in cols] for i in rows]


def boot_distribution(X, Z, method, lvl, coef):
    """Exact bootstrap distribution: every equally likely index sample, enumerated."""
    n, m = len(X), len(X[0])
    row_opts = list(itertools.product(range(n), repeat=n)) if method != "boot-inputs" else [tuple(range(n))]
    col_opts = list(itertools.product(range(m), repeat=m)) if method != "boot-systems" else [tuple(range(m))]
    return [level(select(X, r, c), select(Z, r, c), lvl, coef) for r in row_opts for c in col_opts]


def standardize(X):
    flat = [v for row in X for v in row]
    mu = mean(flat)
    sd = math.sqrt(sum((v - mu) ** 2 for v in flat) / len(flat))
    return [[(v - mu) / sd for v in row] for row in X]


def perm_both_exact_p(X, Y, Z, lvl, coef, strict=True, tol=1e-12):
    """Exact permutation p over all 2**(N*M) cell-swap patterns."""
    X, Y = standardize(X), standardize(Y)
    n, m = len(X), len(X[0])
    delta = level(X, Z, lvl, coef) - level(Y, Z, lvl, coef)
    hits = valid = 0
    for pattern in itertools.product([False, True], repeat=n * m):
        Xs = [[Y[i][j] if pattern[i * m + j] else X[i][j] for j in range(m)] for i in range(n)]
        Ys = [[X[i][j] if pattern[i * m + j] else Y[i][j] for j in range(m)] for i in range(n)]
        d = level(Xs, Z, lvl, coef) - level(Ys, Z, lvl, coef)
        if math.isnan(d):
            continue
        valid += 1
        hits += (d > delta + tol) if strict else (d >= delta - tol)
    return hits / valid


def paired_boot_exact_p(X, Y, Z, method, lvl, coef, tol=1e-12):
    n, m = len(X), len(X[0])
    row_opts = list(itertools.product(range(n), repeat=n)) if method != "boot-inputs" else [tuple(range(n))]
    col_opts = list(itertools.product(range(m), repeat=m)) if method != "boot-systems" else [tuple(range(m))]
    hits = valid = 0
    for r in row_opts:
        for c in col_opts:
            Zs = select(Z, r, c)
            d = level(select(X, r, c), Zs, lvl, coef) - level(select(Y, r, c), Zs, lvl, coef)
            if math.isnan(d):
                continue
            valid += 1
            hits += d <= tol
    return hits / valid
