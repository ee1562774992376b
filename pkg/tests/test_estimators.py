import math

import numpy as np
import pytest

from semigen.data import CLASSIFICATION, REGRESSION, DomainDataset, Sample
from semigen.datagen import ClassScmConfig, RegrScmConfig, gen_classification, gen_regression
from semigen.estimators import (
    FitOptions,
    JointBaseline,
    LambdaPolicy,
    WeightSource,
    fit,
    fit_joint_regression,
    loglik_pooled,
    loglik_supervised,
    loglik_unsupervised,
    loglik_weighted,
)
from semigen.models import DiscreteParams, GaussClassParams, LinGaussParams
from semigen.optimize import OptimOptions

GC = GaussClassParams(0.0, -1.0, 1.0)
HARD = ClassScmConfig(mu_C=-1.0, m=0.0, mu_0=-0.5, mu_1=0.5)


def _class_data(n_S=8, n_T=32, seed=0, cfg=HARD):
    return gen_classification(cfg, n_S, n_T, 10, seed)[0]


# -- lambda policies --------------------------------------------------------------


def test_lambda_policy_values():
    assert LambdaPolicy("equal")(8, 8) == 0.5
    assert LambdaPolicy("sqrt")(8, 16) == 8 / 12
    assert LambdaPolicy("supheavy")(1, 100) == 0.0
    assert LambdaPolicy("supheavy")(4, 0) == 0.75
    assert LambdaPolicy("fixed", 0.8)(3, 1000) == 0.8
    assert LambdaPolicy("equal")(5, 0) == 1.0


def test_lambda_policy_parse():
    assert LambdaPolicy.parse("fixed:0.8") == LambdaPolicy("fixed", 0.8)
    assert LambdaPolicy.parse("SQRT") == LambdaPolicy("sqrt")
    assert str(LambdaPolicy("fixed", 0.8)) == "fixed:0.8"
    for bad in ("fixed:1.5", "nope", "fixed:-0.1"):
        with pytest.raises(ValueError):
            LambdaPolicy.parse(bad)


# -- average log-likelihoods ----------------------------------------------------------


def test_supervised_examples():
    one = DomainDataset(Sample([0.0], [1.0], [1.0]), Sample.empty(1, 1))
    assert loglik_supervised(GC, one) == pytest.approx(GC.log_joint(0.0, 1, 1.0), abs=1e-15)
    two = DomainDataset(Sample([0.0, 0.0], [1.0, -1.0], [1.0, 0.0]), Sample.empty(1, 1))
    assert loglik_supervised(GC, two) == pytest.approx(-1.612086, abs=1e-6)


def test_supervised_duplicate_rows_invariant():
    ds = _class_data()
    s = ds.source
    doubled = DomainDataset(
        Sample(np.vstack([s.xc, s.xc]), np.vstack([s.xe, s.xe]), np.concatenate([s.y, s.y])), ds.target
    )
    assert loglik_supervised(GC, doubled) == pytest.approx(loglik_supervised(GC, ds), rel=1e-14)


def test_weighted_examples():
    ds = _class_data()
    assert loglik_weighted(GC, ds, np.ones(ds.n_source)) == loglik_supervised(GC, ds)
    two = DomainDataset(Sample([0.3, -0.2], [1.0, -1.0], [1.0, 0.0]), Sample.empty(1, 1))
    eps = 1e-12
    first = GC.log_joint(0.3, 1, 1.0)
    assert loglik_weighted(GC, two, [2.0, eps]) == pytest.approx(first, rel=1e-9)


def test_known_weights_at_symmetry_point():
    ds = DomainDataset(Sample([0.0, 0.0], [0.4, -0.3], [1.0, 0.0]), Sample.empty(1, 1))
    w = WeightSource("known", HARD).resolve(ds)
    np.testing.assert_array_equal(w, [1.0, 1.0])
    assert loglik_weighted(GC, ds, w) == loglik_supervised(GC, ds)


def test_weight_validation():
    ds = _class_data()
    with pytest.raises(ValueError):
        loglik_weighted(GC, ds, np.ones(ds.n_source + 1))
    with pytest.raises(ValueError):
        loglik_weighted(GC, ds, np.r_[0.0, np.ones(ds.n_source - 1)])
    with pytest.raises(ValueError):
        WeightSource("supplied", weights=(1.0, -1.0)).resolve(ds)
    w = WeightSource("supplied", weights=tuple(range(1, ds.n_source + 1)), self_normalize=True).resolve(ds)
    assert w.sum() == pytest.approx(ds.n_source)


def test_unsupervised_examples():
    one = DomainDataset(Sample([0.0], [1.0], [1.0]), Sample([0.7], [-0.2]))
    assert loglik_unsupervised(GC, one) == pytest.approx(GC.log_marginal(0.7, -0.2), abs=1e-15)
    ds = _class_data(n_T=20)
    perm = np.random.default_rng(0).permutation(20)
    shuffled = DomainDataset(ds.source, ds.target.take(perm))
    assert loglik_unsupervised(GC, shuffled) == pytest.approx(loglik_unsupervised(GC, ds), rel=1e-14)
    no_target = DomainDataset(ds.source, Sample.empty(1, 1))
    with pytest.raises(ValueError):
        loglik_unsupervised(GC, no_target)


def test_unsupervised_matches_row_sum():
    ds = _class_data(n_T=25)
    expect = np.mean([GC.log_marginal(a, b) for a, b in zip(ds.target.xc[:, 0], ds.target.xe[:, 0])])
    assert loglik_unsupervised(GC, ds) == pytest.approx(expect, rel=1e-13)


def test_pooled_identities():
    for params, ds in [
        (GC, _class_data()),
        (LinGaussParams.from_sigmas(0.2, 1.0, -0.1, 0.8, 1.1, 0.7), gen_regression(RegrScmConfig(), 6, 9, 1, 0)[0]),
        (DiscreteParams(np.array([0.1, -0.4]), np.array([[0.3, -1.0]])), _binary_data()),
    ]:
        s, t = loglik_supervised(params, ds), loglik_unsupervised(params, ds)
        assert loglik_pooled(params, ds, 1.0) == s
        assert loglik_pooled(params, ds, 0.0) == t
        assert loglik_pooled(params, ds, 0.5) == pytest.approx(0.5 * (s + t), rel=1e-14)
        assert loglik_weighted(params, ds, np.ones(ds.n_source)) == s
    empty_t = DomainDataset(_class_data().source, Sample.empty(1, 1))
    assert loglik_pooled(GC, empty_t, 0.2) == loglik_supervised(GC, empty_t)
    with pytest.raises(ValueError):
        loglik_pooled(GC, empty_t, 1.2)


def _binary_data():
    rng = np.random.default_rng(3)
    src = Sample(rng.integers(0, 2, (12, 1)), rng.integers(0, 2, (12, 1)), rng.integers(0, 2, 12))
    tgt = Sample(rng.integers(0, 2, (30, 1)), rng.integers(0, 2, (30, 1)))
    return DomainDataset(src, tgt)


def test_discrete_compression_preserves_values():
    ds = _binary_data()
    p = DiscreteParams(np.array([0.1, -0.4]), np.array([[0.3, -1.0]]))
    s = ds.source
    direct = float(np.mean(p.log_joint(s.xc, s.y, s.xe)))
    assert loglik_supervised(p, ds) == pytest.approx(direct, rel=1e-13)
    direct_t = float(np.mean(p.log_marginal(ds.target.xc, ds.target.xe)))
    assert loglik_unsupervised(p, ds) == pytest.approx(direct_t, rel=1e-13)


# -- fitting --------------------------------------------------------------------------


def test_pooled_without_target_equals_supervised():
    ds = _class_data(n_T=0)
    s = fit("gauss_class", ds, "S", seed=1)
    p = fit("gauss_class", ds, "P", seed=1)
    np.testing.assert_array_equal(s.params.to_vector(), p.params.to_vector())
    assert p.lam == 1.0


def test_pooled_with_unit_lambda_equals_supervised():
    ds = _class_data(n_T=50)
    s = fit("gauss_class", ds, "S", seed=2)
    p = fit("gauss_class", ds, "P", LambdaPolicy("fixed", 1.0), seed=2)
    np.testing.assert_allclose(p.params.to_vector(), s.params.to_vector(), atol=1e-5)


def test_unit_weighted_fit_is_flagged_and_equals_supervised():
    ds = _class_data()
    s = fit("gauss_class", ds, "S")
    ws = fit("gauss_class", ds, "WS")
    assert ws.notes and "unit" in ws.notes[0]
    np.testing.assert_array_equal(s.params.to_vector(), ws.params.to_vector())


def test_pooled_never_below_its_start():
    for seed in range(5):
        ds = _class_data(n_T=64, seed=seed)
        s = fit("gauss_class", ds, "S", seed=seed)
        p = fit("gauss_class", ds, "P", seed=seed)
        lam = p.lam
        assert loglik_pooled(p.params, ds, lam) >= loglik_pooled(s.params, ds, lam) - 1e-12
        assert p.result.objective_value == pytest.approx(loglik_pooled(p.params, ds, lam), rel=1e-12)


def test_objective_scale_does_not_move_argmax():
    ds = _class_data(n_T=40, seed=4)
    a = fit("gauss_class", ds, "P", seed=4)
    b = fit("gauss_class", ds, "P", options=FitOptions(objective_scale=2.0), seed=4)
    np.testing.assert_allclose(a.params.to_vector(), b.params.to_vector(), atol=1e-4)
    assert a.result.objective_value == pytest.approx(b.result.objective_value, rel=1e-9)


def test_restricted_fit_respects_signs():
    cfg = RegrScmConfig(a=0.0, b=1.5, c=0.0, d=2.0)
    for seed in range(4):
        ds = gen_regression(cfg, 6, 40, 1, seed)[0]
        for est in ("S", "P"):
            res = fit("lin_gauss", ds, est, LambdaPolicy("fixed", 0.8), options=FitOptions(restricted=True), seed=seed)
            assert res.params.b <= 0.0 and res.params.d <= 0.0
            assert res.params.restricted


def test_fit_is_deterministic():
    ds = _class_data(n_T=30, seed=9)
    a = fit("gauss_class", ds, "P", seed=123)
    b = fit("gauss_class", ds, "P", seed=np.random.SeedSequence(123))
    np.testing.assert_array_equal(a.params.to_vector(), b.params.to_vector())


def test_fit_errors():
    ds = _class_data()
    with pytest.raises(ValueError, match="regression model"):
        fit("lin_gauss", ds, "S")
    with pytest.raises(ValueError):
        fit("gauss_class", ds, "LR")
    with pytest.raises(ValueError):
        fit("nope", ds, "S")


def test_discrete_fit_stays_in_box():
    ds = _binary_data()
    res = fit("discrete", ds, "P", LambdaPolicy("sqrt"))
    v = res.params.to_vector()
    assert np.all(np.abs(v) <= DiscreteParams.logit_bound)


def test_pooled_recovers_from_degenerate_source():
    # every source label is 0, so the supervised fit cannot orient the classes
    cfg = ClassScmConfig(mu_C=-1.0, m=0.0, mu_0=-2.0, mu_1=2.0)
    ds, test = gen_classification(cfg, 8, 256, 2000, seed=4)
    assert np.all(ds.source.y == 0)
    res = fit("gauss_class", ds, "P", seed=4)
    err = np.mean(res.params.predict(test.xc[:, 0], test.xe[:, 0]) != test.y)
    assert err < 0.05


# -- joint-feature baseline -----------------------------------------------------------


def test_joint_regression_exact_line():
    rng = np.random.default_rng(0)
    xc, xe = rng.normal(size=20), rng.normal(size=20)
    ds = DomainDataset(Sample(xc, xe, 2 + 3 * xc - xe), Sample.empty(1, 1), REGRESSION)
    model = fit_joint_regression(ds)
    np.testing.assert_allclose(model.coef, [2.0, 3.0, -1.0], atol=1e-8)


def test_joint_regression_constant_column():
    xc = np.ones(6)
    xe = np.arange(6.0)
    ds = DomainDataset(Sample(xc, xe, 1 + xe), Sample.empty(1, 1), REGRESSION)
    model = fit_joint_regression(ds)
    assert np.all(np.isfinite(model.coef))
    assert model.diagnostics["rank_deficient"]
    np.testing.assert_allclose(model.predict(xc, xe), 1 + xe, atol=1e-6)


def test_logistic_baseline_on_separable_data():
    xc = np.array([-2.0, -1.0, 1.0, 2.0])
    xe = np.array([0.1, -0.3, 0.2, 0.0])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    ds = DomainDataset(Sample(xc, xe, y), Sample.empty(1, 1), CLASSIFICATION)
    model = fit_joint_regression(ds, OptimOptions(max_iters=500))
    assert np.all(np.isfinite(model.coef))
    np.testing.assert_array_equal(model.predict(xc, xe), y)


def test_joint_baseline_text_round_trip():
    ds = _class_data()
    model = fit_joint_regression(ds)
    back = JointBaseline.from_text(model.to_text())
    np.testing.assert_array_equal(back.coef, model.coef)
    assert back.task == model.task
