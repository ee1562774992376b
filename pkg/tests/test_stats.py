import math

import numpy as np
import pytest
from scipy import integrate, special
from scipy import stats as sps

from semigen.data import Sample
from semigen.models import GaussClassParams
from semigen.stats import (
    MetricRecord,
    RunningStats,
    aggregate,
    betainc,
    error_rate,
    paired_t_test,
    rmse,
    semi_generative_nll,
    t_cdf,
    t_tail,
)


def t_two_sided_by_quadrature(t, dof):
    dens = lambda x: math.exp(  # noqa: E731
        math.lgamma((dof + 1) / 2) - math.lgamma(dof / 2) - 0.5 * math.log(dof * math.pi)
        - (dof + 1) / 2 * math.log1p(x * x / dof)
    )
    inner, _ = integrate.quad(dens, -abs(t), abs(t), epsabs=1e-13, epsrel=1e-13)
    return 1.0 - inner


# -- metrics ----------------------------------------------------------------------


def test_error_rate_examples():
    assert error_rate([1, 0, 1], [1, 0, 1]) == 0.0
    assert error_rate([1, 0], [0, 1]) == 1.0
    assert error_rate([1, 0, 1, 1], [1, 1, 1, 0]) == 0.5
    with pytest.raises(ValueError):
        error_rate([], [])
    with pytest.raises(ValueError):
        error_rate([1], [1, 0])


def test_rmse_examples():
    assert rmse([1.5, -2.0], [1.5, -2.0]) == 0.0
    assert rmse([0, 0], [3, 4]) == pytest.approx(3.535534, abs=1e-6)
    a, b = np.array([0.3, 1.2, -4.0]), np.array([1.0, 0.0, 2.0])
    assert rmse(a + 7.5, b + 7.5) == pytest.approx(rmse(a, b), rel=1e-14)
    with pytest.raises(ValueError):
        rmse([1.0], [])


def test_nll_examples():
    p = GaussClassParams(0.0, -1.0, 1.0)
    one = Sample([0.0], [1.0], [1.0])
    assert semi_generative_nll(p, one) == pytest.approx(1.612086, abs=1e-6)
    rng = np.random.default_rng(0)
    s = Sample(rng.normal(size=20), rng.normal(size=20), rng.integers(0, 2, 20))
    expect = -np.mean([p.log_joint(a, y, b) for a, y, b in zip(s.xc[:, 0], s.y, s.xe[:, 0])])
    assert semi_generative_nll(p, s) == pytest.approx(expect, rel=1e-13)
    with pytest.raises(ValueError):
        semi_generative_nll(p, s.unlabelled())


# -- Student t ---------------------------------------------------------------------


def test_betainc_against_reference():
    rng = np.random.default_rng(1)
    for _ in range(300):
        a, b = rng.uniform(0.05, 60, size=2)
        x = rng.uniform()
        assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)
    assert betainc(2.0, 3.0, 0.0) == 0.0
    assert betainc(2.0, 3.0, 1.0) == 1.0


def test_t_cdf_identities():
    for dof in (1, 2.5, 9, 30, 1000):
        assert t_cdf(0.0, dof) == 0.5
        for t in (0.1, 1.0, 2.262, 7.0, 40.0):
            assert t_cdf(t, dof) + t_cdf(-t, dof) == pytest.approx(1.0, abs=1e-12)
            assert t_cdf(t, dof) == pytest.approx(sps.t.cdf(t, dof), abs=1e-10)


def test_t_cdf_approaches_normal():
    for t in (-3.0, -1.0, 0.5, 2.0):
        assert t_cdf(t, 10_000) == pytest.approx(sps.norm.cdf(t), abs=1e-4)


def test_t_critical_value():
    p = 2.0 * t_tail(2.262, 9)
    assert p == pytest.approx(0.050, abs=1e-3)
    assert p == pytest.approx(t_two_sided_by_quadrature(2.262, 9), abs=1e-10)


def test_t_tail_guards():
    assert t_tail(math.inf, 5) == 0.0
    with pytest.raises(ValueError):
        t_tail(1.0, 0)


# -- paired t-test ------------------------------------------------------------------


def test_paired_test_matches_reference():
    rng = np.random.default_rng(2)
    for n in (2, 3, 10, 57):
        a, b = rng.normal(size=n), rng.normal(0.3, 1.2, size=n)
        res = paired_t_test(a, b)
        ref = sps.ttest_rel(a, b)
        assert res.t_stat == pytest.approx(ref.statistic, rel=1e-12)
        assert res.p_two_sided == pytest.approx(ref.pvalue, abs=1e-10)
        assert res.dof == n - 1
        for alt in ("greater", "less"):
            one = paired_t_test(a, b, alt)
            assert one.p_value == pytest.approx(sps.ttest_rel(a, b, alternative=alt).pvalue, abs=1e-10)


def test_paired_test_degenerate_rules():
    x = np.array([0.2, 0.4, 0.1])
    same = paired_t_test(x, x)
    assert same.p_two_sided == 1.0 and same.t_stat == 0.0
    shifted = paired_t_test(np.ones(5) + 1.0, np.ones(5))
    assert shifted.p_two_sided == 0.0 and shifted.t_stat == math.inf
    assert paired_t_test(np.ones(5) + 1.0, np.ones(5), "less").p_value == 1.0


def test_paired_test_antisymmetric():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=30), rng.normal(size=30)
    ab, ba = paired_t_test(a, b), paired_t_test(b, a)
    assert ab.t_stat == -ba.t_stat
    assert ab.p_two_sided == ba.p_two_sided


def test_paired_test_errors():
    with pytest.raises(ValueError):
        paired_t_test([1.0], [2.0])
    with pytest.raises(ValueError):
        paired_t_test([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        paired_t_test([1.0, 2.0], [1.0, 3.0], "sideways")


# -- aggregation ---------------------------------------------------------------------


def _rec(values, est="P", metric="error_rate"):
    return [MetricRecord(i, 8, 4, est, metric, v) for i, v in enumerate(values)]


def test_aggregate_examples():
    (row,) = aggregate(_rec([0.25]))
    assert (row.mean, row.std, row.count) == (0.25, 0.0, 1)
    (row,) = aggregate(_rec([1.0, 2.0, 3.0]))
    assert row.mean == 2.0 and row.std == 1.0 and row.count == 3


def test_aggregate_order_invariant_and_grouped():
    recs = _rec([0.1, 0.5, 0.3]) + _rec([2.0, 4.0], est="S") + _rec([1.0, 1.0], metric="nll")
    rng = np.random.default_rng(4)
    shuffled = [recs[i] for i in rng.permutation(len(recs))]
    assert aggregate(recs) == aggregate(shuffled)
    keys = [(r.estimator, r.metric) for r in aggregate(recs)]
    assert keys == [("P", "error_rate"), ("P", "nll"), ("S", "error_rate")]


def test_aggregate_skips_failures():
    (row,) = aggregate(_rec([1.0, math.nan, 3.0]))
    assert row.count == 2 and row.mean == 2.0
    with pytest.raises(ValueError):
        aggregate([])


def test_running_stats_match_two_pass():
    rng = np.random.default_rng(5)
    xs = rng.normal(1e3, 5.0, size=1_000_000)
    acc = RunningStats()
    for chunk in np.array_split(xs, 7):
        acc.push_many(chunk)
    assert acc.mean == pytest.approx(xs.mean(), rel=1e-12)
    assert acc.std == pytest.approx(xs.std(ddof=1), rel=1e-12)
    one = RunningStats()
    for v in xs[:5000]:
        one.push(v)
    assert one.std == pytest.approx(xs[:5000].std(ddof=1), rel=1e-12)


def test_running_stats_merge_associative():
    rng = np.random.default_rng(6)
    parts = [rng.normal(size=k) for k in (3, 50, 1, 20)]

    def acc(arrs):
        r = RunningStats()
        for a in arrs:
            r.push_many(a)
        return r

    left = acc(parts[:2]).merge(acc(parts[2:]))
    right = acc(parts[:1]).merge(acc(parts[1:]))
    assert left.count == right.count
    assert left.mean == pytest.approx(right.mean, rel=1e-14)
    assert left.std == pytest.approx(right.std, rel=1e-13)
