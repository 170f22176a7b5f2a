"""Statistics for the evaluation battery.

Covers the logistic rank transformation, correlation, inter-annotator
agreement, significance tests, multilabel F1 aggregation, and percentile
bootstrap intervals. The chi-square and F tail probabilities come from
self-contained regularized incomplete gamma/beta implementations (series
plus continued fractions), accurate to well below 1e-10 in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Literal, Sequence, TypeVar

import numpy as np

from .errors import (
    ConstantInputError,
    DegenerateAgreementError,
    DegenerateInputError,
    DegenerateTableError,
    InsufficientDataError,
    LengthMismatchError,
)
from .taxonomy import TypeSet

T = TypeVar("T")

# ---------------------------------------------------------------------------
# Special functions


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


_ITMAX = 600
_EPS = 1e-16
_FPMIN = 1e-300


def _gamma_series(a: float, x: float) -> float:
    # lower regularized gamma by series, valid for x < a + 1
    ap = a
    total = 1.0 / a
    delta = total
    for _ in range(_ITMAX):
        ap += 1.0
        delta *= x / ap
        total += delta
        if abs(delta) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_cf(a: float, x: float) -> float:
    # upper regularized gamma by Lentz continued fraction, for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _ITMAX + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_lower_gamma(a: float, x: float) -> float:
    """P(a, x), the regularized lower incomplete gamma function."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def regularized_upper_gamma(a: float, x: float) -> float:
    """Q(a, x) = 1 - P(a, x), computed on the accurate branch."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def _beta_cf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _ITMAX + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued fraction, symmetrized for convergence."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def chi2_sf(stat: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    return regularized_upper_gamma(df / 2.0, stat / 2.0)


def f_sf(f: float, df1: int, df2: int) -> float:
    """Upper-tail probability of the F distribution."""
    if f <= 0.0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


# ---------------------------------------------------------------------------
# Rank transformation and correlation


@dataclass(frozen=True)
class RankVector:
    """A non-empty list of 1..4 human ranks."""

    ranks: tuple[int, ...]

    def __post_init__(self):
        if not self.ranks:
            raise InsufficientDataError("rank vector is empty")
        if any(not 1 <= r <= 4 for r in self.ranks):
            raise ValueError("ranks must lie in 1..4")

    def transformed(self) -> list[float]:
        return [logistic_rank_transform(r) for r in self.ranks]

    def mean(self) -> float:
        return sum(self.ranks) / len(self.ranks)


def logistic_rank_transform(rank: float) -> float:
    """Map a 1..4 rank onto (0,1): 1/(1 + e^(rank - 2.5)).

    Strictly decreasing, with the annotation midpoint 2.5 mapping to 0.5;
    smooths the rigid valid/invalid boundary so ranks can be correlated
    against continuous metrics.
    """
    return _sigmoid(2.5 - rank)


def _check_paired(xs: Sequence[float], ys: Sequence[float]) -> None:
    if len(xs) != len(ys):
        raise LengthMismatchError(f"lengths differ: {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise InsufficientDataError("need at least 3 paired observations")


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation."""
    _check_paired(xs, ys)
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInputError("correlation undefined for a constant sequence")
    return float(np.sum(dx * dy)) / (sx * sy)


def _fractional_ranks(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        # ties share the average of the positions they occupy (1-based)
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of fractional ranks; ties get the average rank."""
    _check_paired(xs, ys)
    return pearson(_fractional_ranks(xs), _fractional_ranks(ys))


# ---------------------------------------------------------------------------
# Agreement


def cohens_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement between two label lists."""
    if len(a) != len(b):
        raise LengthMismatchError(f"lengths differ: {len(a)} vs {len(b)}")
    if not a:
        raise InsufficientDataError("need at least one paired label")
    n = len(a)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    labels = set(a) | set(b)
    p_e = 0.0
    for label in labels:
        p_e += (sum(1 for x in a if x == label) / n) * (
            sum(1 for y in b if y == label) / n
        )
    if abs(1.0 - p_e) < 1e-15:
        raise DegenerateAgreementError("expected agreement is 1; kappa undefined")
    return (p_o - p_e) / (1.0 - p_e)


def krippendorff_alpha(
    values: Sequence[Sequence[object]],
    level: Literal["nominal", "ordinal"] = "nominal",
) -> float:
    """Krippendorff's alpha over a coders x units matrix (None = missing).

    Uses the coincidence-matrix formulation: alpha = 1 - D_o/D_e. The
    ordinal level squares differences of cumulative marginals, so adjacent
    ranks disagree less than distant ones.
    """
    if not values or not values[0]:
        raise InsufficientDataError("need a non-empty coder x unit matrix")
    n_units = len(values[0])
    if any(len(row) != n_units for row in values):
        raise LengthMismatchError("all coder rows must cover the same units")

    unit_values: list[list] = []
    for u in range(n_units):
        got = [row[u] for row in values if row[u] is not None]
        if len(got) >= 2:
            unit_values.append(got)
    if len(unit_values) < 2:
        raise InsufficientDataError("need at least 2 units with 2+ coded values")

    domain = sorted({v for unit in unit_values for v in unit})
    index = {v: i for i, v in enumerate(domain)}
    k = len(domain)
    coincidence = np.zeros((k, k), dtype=float)
    for unit in unit_values:
        m_u = len(unit)
        for i, v in enumerate(unit):
            for j, w in enumerate(unit):
                if i != j:
                    coincidence[index[v], index[w]] += 1.0 / (m_u - 1)
    marginals = coincidence.sum(axis=1)
    n = marginals.sum()

    if level == "nominal":
        dist2 = np.ones((k, k)) - np.eye(k)
    elif level == "ordinal":
        dist2 = np.zeros((k, k))
        for c in range(k):
            for d in range(k):
                if c == d:
                    continue
                lo, hi = min(c, d), max(c, d)
                span = marginals[lo : hi + 1].sum()
                dist2[c, d] = (span - (marginals[c] + marginals[d]) / 2.0) ** 2
    else:
        raise ValueError(f"unknown level: {level}")

    d_o = float((coincidence * dist2).sum()) / n
    d_e = float((np.outer(marginals, marginals) * dist2).sum()) / (n * (n - 1.0))
    if d_e == 0.0:
        return 1.0
    return 1.0 - d_o / d_e


# ---------------------------------------------------------------------------
# Significance tests


@dataclass(frozen=True)
class ContingencyTable:
    counts: tuple[tuple[int, ...], ...]
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    @classmethod
    def make(cls, counts, row_labels=None, col_labels=None) -> "ContingencyTable":
        rows = tuple(tuple(int(c) for c in row) for row in counts)
        r = len(rows)
        c = len(rows[0]) if rows else 0
        row_labels = tuple(row_labels) if row_labels else tuple(f"r{i}" for i in range(r))
        col_labels = tuple(col_labels) if col_labels else tuple(f"c{j}" for j in range(c))
        return cls(rows, row_labels, col_labels)


def chi_square(table: ContingencyTable) -> tuple[float, int, float]:
    """Pearson chi-square test of independence (no continuity correction)."""
    counts = np.asarray(table.counts, dtype=float)
    if counts.ndim != 2 or counts.shape[0] < 2 or counts.shape[1] < 2:
        raise DegenerateTableError("table must be at least 2x2")
    if (counts < 0).any():
        raise DegenerateTableError("counts must be non-negative")
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    if (row_sums == 0).any() or (col_sums == 0).any():
        raise DegenerateTableError("table has an all-zero row or column")
    total = counts.sum()
    expected = np.outer(row_sums, col_sums) / total
    stat = float(((counts - expected) ** 2 / expected).sum())
    df = (counts.shape[0] - 1) * (counts.shape[1] - 1)
    return stat, df, chi2_sf(stat, df)


def anova_oneway(groups: Sequence[Sequence[float]]) -> tuple[float, int, int, float]:
    """One-way ANOVA: F statistic, (df_between, df_within), upper-tail p."""
    if len(groups) < 2 or any(len(g) < 2 for g in groups):
        raise DegenerateInputError("need at least 2 groups of at least 2 values")
    arrays = [np.asarray(g, dtype=float) for g in groups]
    pooled = np.concatenate(arrays)
    if np.all(pooled == pooled[0]):
        raise DegenerateInputError("all values identical; F undefined")
    grand = pooled.mean()
    ssb = sum(len(a) * (a.mean() - grand) ** 2 for a in arrays)
    ssw = sum(((a - a.mean()) ** 2).sum() for a in arrays)
    df1 = len(arrays) - 1
    df2 = len(pooled) - len(arrays)
    if ssw == 0.0:
        return math.inf, df1, df2, 0.0
    f = (ssb / df1) / (ssw / df2)
    return float(f), df1, df2, f_sf(float(f), df1, df2)


# ---------------------------------------------------------------------------
# Multilabel F1


@dataclass(frozen=True)
class ClassF1:
    label: str
    f1: float
    ci_lower: float
    ci_upper: float
    support: int


@dataclass(frozen=True)
class F1Report:
    per_class: tuple[ClassF1, ...]
    macro_f1: float
    weighted_f1: float

    def to_csv_rows(self) -> list[list[str]]:
        rows = [["Class", "F1", "CI Lower", "CI Upper", "Support"]]
        for entry in self.per_class:
            rows.append(
                [
                    entry.label,
                    f"{entry.f1:.4f}",
                    f"{entry.ci_lower:.4f}",
                    f"{entry.ci_upper:.4f}",
                    str(entry.support),
                ]
            )
        return rows


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def f1_scores(
    predicted: Sequence[TypeSet],
    gold: Sequence[TypeSet],
    classes: TypeSet,
) -> F1Report:
    """Per-class, macro, and support-weighted F1 over multilabel sets.

    A class with an empty denominator scores 0; classes without gold
    positives carry zero weight in the weighted mean. CIs are filled in by
    the bootstrap-aware callers; here they collapse to the point estimate.
    """
    if len(predicted) != len(gold):
        raise LengthMismatchError(f"lengths differ: {len(predicted)} vs {len(gold)}")
    entries = []
    for cls in classes:
        tp = fp = fn = 0
        for pred, ref in zip(predicted, gold):
            p = cls in pred
            g = cls in ref
            tp += p and g
            fp += p and not g
            fn += g and not p
        f1 = _f1_from_counts(tp, fp, fn)
        entries.append(ClassF1(cls.canonical_label, f1, f1, f1, tp + fn))
    macro = sum(e.f1 for e in entries) / len(entries) if entries else 0.0
    total_support = sum(e.support for e in entries)
    weighted = (
        sum(e.f1 * e.support for e in entries) / total_support if total_support else 0.0
    )
    return F1Report(tuple(entries), macro, weighted)


# ---------------------------------------------------------------------------
# Bootstrap


def bootstrap_ci(
    statistic: Callable[[list], float],
    data: Sequence[T],
    n_resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for `statistic` over `data`.

    Each resample draws indices from its own seeded substream, so the result
    is deterministic for a given seed even if resamples run concurrently.
    """
    if len(data) < 2:
        raise InsufficientDataError("need at least 2 data points to resample")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    n = len(data)
    stats = np.empty(n_resamples, dtype=float)
    for i in range(n_resamples):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        idx = rng.integers(0, n, size=n)
        stats[i] = statistic([data[j] for j in idx])
    tail = (1.0 - level) / 2.0
    lower = float(np.quantile(stats, tail))
    upper = float(np.quantile(stats, 1.0 - tail))
    return lower, upper
