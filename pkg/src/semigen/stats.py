"""Evaluation metrics, replicate aggregation and the paired t-test."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

METRICS = ("error_rate", "nll", "rmse")

_FPMIN = 1e-300
_EPS = 1e-16
_MAXIT = 20000


def error_rate(predictions, labels) -> float:
    p = np.asarray(predictions).reshape(-1)
    t = np.asarray(labels).reshape(-1)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("predictions and labels must have equal, non-zero length")
    return float(np.mean(p.astype(int) != t.astype(int)))


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float).reshape(-1)
    t = np.asarray(targets, dtype=float).reshape(-1)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("predictions and targets must have equal, non-zero length")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def semi_generative_nll(params, sample) -> float:
    """Mean of ``-log P(y, x_E | x_C)`` over labelled rows."""
    if sample.y is None or len(sample) == 0:
        raise ValueError("need a non-empty labelled sample")
    xc = sample.xc if sample.xc.shape[1] > 1 else sample.xc[:, 0]
    xe = sample.xe if sample.xe.shape[1] > 1 else sample.xe[:, 0]
    return float(-np.mean(params.log_joint(xc, sample.y, xe)))


# -- Student t ---------------------------------------------------------------


def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
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
            return h
    raise ArithmeticError(f"incomplete beta fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_tail(t: float, dof: float) -> float:
    """``P(T <= -|t|)`` for a Student t variable."""
    if dof <= 0:
        raise ValueError("dof must be positive")
    if math.isinf(t):
        return 0.0
    return 0.5 * betainc(0.5 * dof, 0.5, dof / (dof + t * t))


def t_cdf(t: float, dof: float) -> float:
    tail = t_tail(t, dof)
    return 1.0 - tail if t > 0 else tail


@dataclass(frozen=True)
class PairedTestResult:
    t_stat: float
    dof: int
    p_two_sided: float
    mean_diff: float
    p_value: float
    alternative: str = "two-sided"


def paired_t_test(values_a, values_b, alternative: str = "two-sided") -> PairedTestResult:
    """Paired t-test on ``a - b``.

    ``alternative`` is ``"two-sided"``, ``"greater"`` (mean of ``a - b`` > 0)
    or ``"less"``; ``p_value`` follows it while ``p_two_sided`` is always
    reported. Differences that are all equal give ``p = 1`` when their mean
    is zero and ``p = 0`` otherwise, instead of a 0/0 statistic.
    """
    a = np.asarray(values_a, dtype=float).reshape(-1)
    b = np.asarray(values_b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least two pairs")
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    d = a - b
    mean = float(np.mean(d))
    spread = float(np.max(d) - np.min(d))
    degenerate = spread <= 4 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(d))))
    if degenerate:
        if mean == 0.0:
            t, p2 = 0.0, 1.0
        else:
            t, p2 = math.copysign(math.inf, mean), 0.0
    else:
        sd = float(np.std(d, ddof=1))
        t = mean / (sd / math.sqrt(n))
        p2 = min(1.0, 2.0 * t_tail(t, n - 1))
    if alternative == "two-sided":
        p = p2
    elif t == 0.0:
        p = 1.0 if degenerate else 0.5
    else:
        agrees = (t > 0) == (alternative == "greater")
        p = 0.5 * p2 if agrees else 1.0 - 0.5 * p2
    return PairedTestResult(t, n - 1, p2, mean, p, alternative)


# -- aggregation -------------------------------------------------------------


@dataclass(frozen=True)
class MetricRecord:
    replicate: int
    n_S: int
    n_T: int
    estimator: str
    metric: str
    value: float

    @property
    def sort_key(self):
        return (self.n_S, self.n_T, self.replicate, self.estimator, self.metric)


class RunningStats:
    """Single-pass mean/variance with an associative merge."""

    __slots__ = ("count", "mean", "m2")

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def push_many(self, xs) -> None:
        xs = np.asarray(xs, dtype=float).reshape(-1)
        if xs.size == 0:
            return
        other = RunningStats()
        other.count = xs.size
        other.mean = float(np.mean(xs))
        other.m2 = float(np.sum((xs - other.mean) ** 2))
        self.merge(other)

    def merge(self, other: RunningStats) -> RunningStats:
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / n
        self.m2 += other.m2 + delta * delta * self.count * other.count / n
        self.count = n
        return self

    @property
    def std(self) -> float:
        return math.sqrt(self.m2 / (self.count - 1)) if self.count > 1 else 0.0


@dataclass(frozen=True)
class AggregateRow:
    n_S: int
    n_T: int
    estimator: str
    metric: str
    mean: float
    std: float
    count: int


def aggregate(records) -> list[AggregateRow]:
    """Mean, sample std and count per ``(n_S, n_T, estimator, metric)``.

    NaN values (failed fits) are skipped; a single value has std 0.
    """
    records = list(records)
    if not records:
        raise ValueError("nothing to aggregate")
    groups: dict[tuple, RunningStats] = defaultdict(RunningStats)
    for r in sorted(records, key=lambda r: r.sort_key):
        acc = groups[(r.n_S, r.n_T, r.estimator, r.metric)]
        if math.isfinite(r.value):
            acc.push(r.value)
    return [
        AggregateRow(k[0], k[1], k[2], k[3], s.mean if s.count else math.nan, s.std, s.count)
        for k, s in sorted(groups.items())
    ]
