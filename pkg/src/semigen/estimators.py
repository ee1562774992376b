"""Average log-likelihoods, the S / WS / P estimators and the joint-feature
regression baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from semigen.data import CLASSIFICATION, REGRESSION, DomainDataset, Sample, fmt_float
from semigen.models import MODEL_KINDS, SemiGenerativeModel
from semigen.optimize import FitResult, Objective, OptimOptions, maximize, multistart_maximize

log = logging.getLogger(__name__)

ESTIMATORS = ("S", "WS", "P", "LR")


# -- lambda policies and weights -------------------------------------------


@dataclass(frozen=True)
class LambdaPolicy:
    """Maps ``(n_S, n_T)`` to the weight of the labelled average.

    ``equal``: n_S / (n_S + n_T); ``sqrt``: n_S / (n_S + sqrt(n_T));
    ``fixed``: a constant; ``supheavy``: 1 - 1/n_S.
    """

    kind: str = "equal"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("equal", "sqrt", "fixed", "supheavy"):
            raise ValueError(f"unknown lambda policy {self.kind!r}")
        if self.kind == "fixed" and (self.value is None or not 0.0 <= self.value <= 1.0):
            raise ValueError("fixed lambda must lie in [0, 1]")

    def __call__(self, n_S: int, n_T: int) -> float:
        if self.kind == "equal":
            lam = n_S / (n_S + n_T)
        elif self.kind == "sqrt":
            lam = n_S / (n_S + math.sqrt(n_T))
        elif self.kind == "fixed":
            lam = self.value
        else:
            lam = 1.0 - 1.0 / n_S
        return min(1.0, max(0.0, lam))

    def __str__(self):
        return f"fixed:{self.value:g}" if self.kind == "fixed" else self.kind

    @classmethod
    def parse(cls, text: str) -> LambdaPolicy:
        text = text.strip().lower()
        if text.startswith("fixed:"):
            return cls("fixed", float(text[6:]))
        return cls(text)


@dataclass(frozen=True)
class WeightSource:
    """Importance weights for the source rows.

    ``known`` takes an object with a ``density_ratio(x_C)`` method (the SCM
    configs and Bayes nets provide one); ``supplied`` carries one weight per
    source row; ``unit`` gives all ones.
    """

    kind: str = "unit"
    config: object = None
    weights: tuple[float, ...] | None = None
    self_normalize: bool = False

    def resolve(self, dataset: DomainDataset) -> np.ndarray:
        n = dataset.n_source
        if self.kind == "unit":
            w = np.ones(n)
        elif self.kind == "known":
            xc = dataset.source.xc
            w = np.asarray(self.config.density_ratio(xc[:, 0] if xc.shape[1] == 1 else xc), dtype=float)
        elif self.kind == "supplied":
            w = np.asarray(self.weights, dtype=float)
        else:
            raise ValueError(f"unknown weight source {self.kind!r}")
        w = np.ascontiguousarray(w.reshape(-1))
        _check_weights(w, n)
        if self.self_normalize:
            w = w * (n / w.sum())
        return w


def _check_weights(w, n):
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be positive and finite")


# -- average log-likelihoods -------------------------------------------------


def _theta(params):
    return np.ascontiguousarray(params.to_vector())


class _Rows(NamedTuple):
    """A sample as the model evaluates it: possibly collapsed to distinct
    rows with multiplicity weights, plus the original row count."""

    sample: Sample
    weights: np.ndarray | None
    n: int


def _pack(params, sample: Sample, weights=None) -> _Rows:
    packed, w = params.compress(sample, weights)
    return _Rows(packed, w, len(sample))


def _sup(params, theta, rows: _Rows):
    if rows.n == 0:
        raise ValueError("empty source sample")
    w = np.ones(len(rows.sample)) if rows.weights is None else rows.weights
    v, g = params.sup_sum(theta, rows.sample, w)
    return v / rows.n, g / rows.n


def _unsup(params, theta, rows: _Rows):
    if rows.n == 0:
        raise ValueError("empty target sample")
    if rows.weights is None:
        v, g = params.unsup_sum(theta, rows.sample)
    else:
        v, g = params.unsup_sum(theta, rows.sample, rows.weights)
    return v / rows.n, g / rows.n


def _pooled(params, theta, source: _Rows, target: _Rows, lam):
    vs, gs = _sup(params, theta, source)
    if target.n == 0:
        return vs, gs
    vt, gt = _unsup(params, theta, target)
    return lam * vs + (1.0 - lam) * vt, lam * gs + (1.0 - lam) * gt


def loglik_supervised(params, dataset: DomainDataset) -> float:
    """Average log semi-generative density over the labelled source rows."""
    return _sup(params, _theta(params), _pack(params, dataset.source))[0]


def loglik_weighted(params, dataset: DomainDataset, weights) -> float:
    w = np.ascontiguousarray(np.asarray(weights, dtype=float).reshape(-1))
    _check_weights(w, dataset.n_source)
    return _sup(params, _theta(params), _pack(params, dataset.source, w))[0]


def loglik_unsupervised(params, dataset: DomainDataset) -> float:
    """Average log marginal of x_E given x_C over the unlabelled target rows."""
    return _unsup(params, _theta(params), _pack(params, dataset.target))[0]


def loglik_pooled(params, dataset: DomainDataset, lam: float) -> float:
    """``lam * supervised + (1 - lam) * unsupervised``; without target rows
    this is the supervised average whatever ``lam`` is."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return _pooled(params, _theta(params), _pack(params, dataset.source), _pack(params, dataset.target), lam)[0]


# -- fitting -----------------------------------------------------------------


@dataclass(frozen=True)
class FitOptions:
    optim: OptimOptions = OptimOptions()
    supervised_starts: int = 1
    pooled_starts: int = 5
    perturb_scale: float = 0.5
    restricted: bool = False
    objective_scale: float = 1.0


@dataclass
class EstimatorFit:
    estimator: str
    params: SemiGenerativeModel
    result: FitResult
    lam: float | None = None
    notes: list[str] = field(default_factory=list)


def _objective(template, value_and_grad, scale):
    lo, hi = template.bounds()

    def vg(theta):
        # non-finite trial points are rejected by the line search
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v, g = value_and_grad(np.ascontiguousarray(theta))
            return scale * v, scale * g

    return Objective(fun=lambda t: vg(t)[0], dim=lo.shape[0], value_and_grad=vg, lower=lo, upper=hi)


def _resolve_model(model):
    if isinstance(model, str):
        try:
            return MODEL_KINDS[model]
        except KeyError:
            raise ValueError(f"unknown model {model!r}") from None
    return model


def _run(obj, init, n_starts, opts: FitOptions, seed, extra=()):
    if n_starts <= 1 and not extra:
        return maximize(obj, init, opts.optim)
    return multistart_maximize(obj, init, max(n_starts, 1), opts.perturb_scale, seed, opts.optim, extra)


def _unscale(result: FitResult, scale: float) -> FitResult:
    if scale != 1.0:
        result.objective_value /= scale
        result.start_values = [v / scale for v in result.start_values]
    return result


def fit(
    model,
    dataset: DomainDataset,
    estimator: str = "S",
    lambda_policy: LambdaPolicy | None = None,
    weight_source: WeightSource | None = None,
    options: FitOptions | None = None,
    seed=0,
) -> EstimatorFit:
    """Fit a semi-generative model with estimator ``S``, ``WS`` or ``P``.

    ``P`` starts from the supervised solution and refines it with a
    multi-start ascent of the pooled objective, plus the model's alternate
    (label-swapped) starts. With no target rows, or a policy giving
    ``lambda == 1``, the objective equals the supervised one and the
    supervised fit is returned unchanged.
    """
    opts = options or FitOptions()
    cls = _resolve_model(model)
    if cls.task != dataset.task:
        raise ValueError(f"{cls.__name__} is a {cls.task} model but the dataset is {dataset.task}")
    template = cls.initial(dataset, restricted=opts.restricted)
    init = template.to_vector()
    scale = opts.objective_scale
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seed_s, seed_p = ss.spawn(2)

    source = _pack(template, dataset.source)

    def sup_fit(weights=None):
        rows = source if weights is None else _pack(template, dataset.source, weights)
        obj = _objective(template, lambda t: _sup(template, t, rows), scale)
        res = _unscale(_run(obj, init, opts.supervised_starts, opts, seed_s), scale)
        return res

    notes: list[str] = []
    if estimator == "S":
        res = sup_fit()
        return EstimatorFit("S", template.from_vector(res.theta_hat), res, 1.0, notes)
    if estimator == "WS":
        ws = weight_source or WeightSource()
        if ws.kind == "unit":
            notes.append("unit weights: WS coincides with S")
            log.info("WS fitted with unit weights; identical to S")
        res = sup_fit(ws.resolve(dataset))
        return EstimatorFit("WS", template.from_vector(res.theta_hat), res, None, notes)
    if estimator == "P":
        policy = lambda_policy or LambdaPolicy()
        lam = policy(dataset.n_source, dataset.n_target)
        res_s = sup_fit()
        if dataset.n_target == 0 or lam == 1.0:
            notes.append("pooled objective equals the supervised one")
            return EstimatorFit("P", template.from_vector(res_s.theta_hat), res_s, lam, notes)
        target = _pack(template, dataset.target)
        obj = _objective(template, lambda t: _pooled(template, t, source, target, lam), scale)
        extra = template.from_vector(res_s.theta_hat).alternate_starts(dataset)
        res = _unscale(_run(obj, res_s.theta_hat, opts.pooled_starts, opts, seed_p, extra), scale)
        res.n_evals += res_s.n_evals
        return EstimatorFit("P", template.from_vector(res.theta_hat), res, lam, notes)
    raise ValueError(f"unknown estimator {estimator!r}; use S, WS or P (LR via fit_joint_regression)")


# -- joint-feature baseline --------------------------------------------------


@dataclass
class JointBaseline:
    """Linear or logistic regression on ``(1, x_C, x_E)``."""

    task: str
    coef: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    kind = "joint_regression"

    def _design(self, xc, xe):
        xc = np.asarray(xc, dtype=float)
        xe = np.asarray(xe, dtype=float)
        xc = xc.reshape(xc.shape[0], -1) if xc.ndim else xc.reshape(1, 1)
        xe = xe.reshape(xe.shape[0], -1) if xe.ndim else xe.reshape(1, 1)
        return np.hstack([np.ones((xc.shape[0], 1)), xc, xe])

    def decision(self, xc, xe):
        return self._design(xc, xe) @ self.coef

    def predict(self, xc, xe):
        f = self.decision(xc, xe)
        if self.task == CLASSIFICATION:
            return (f >= 0).astype(int)
        return f

    def to_text(self) -> str:
        lines = [f"model={self.kind}", f"task={self.task}"]
        lines += [f"coef_{k}={fmt_float(v)}" for k, v in enumerate(self.coef)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> JointBaseline:
        items = dict(
            line.split("=", 1) for line in text.splitlines() if line.strip() and not line.startswith("#")
        )
        if items.get("model") != cls.kind:
            raise ValueError("not a joint_regression parameter file")
        k = sum(1 for key in items if key.startswith("coef_"))
        return cls(items["task"], np.array([float(items[f"coef_{i}"]) for i in range(k)]))


def _logistic_vg(X, y):
    n = X.shape[0]

    def vg(beta):
        eta = X @ beta
        ll = np.sum(y * eta - np.logaddexp(0.0, eta)) / n
        p = 0.5 * (1.0 + np.tanh(0.5 * eta))
        return ll, X.T @ (y - p) / n

    return vg


def fit_joint_regression(dataset: DomainDataset, optim: OptimOptions | None = None, jitter: float = 1e-10) -> JointBaseline:
    """Least squares (regression) or logistic MLE (classification) on the
    labelled source rows, ignoring the causal roles of the features.

    No regularisation is applied to logistic fits: on separable data the
    iteration cap keeps the coefficients finite.
    """
    src = dataset.source
    X = np.hstack([np.ones((len(src), 1)), src.xc, src.xe])
    y = src.y
    p = X.shape[1]
    rank = int(np.linalg.matrix_rank(X))
    diag = {"rank": rank, "rank_deficient": rank < p}
    if dataset.task == REGRESSION:
        coef = np.linalg.solve(X.T @ X + jitter * np.eye(p), X.T @ y)
        return JointBaseline(REGRESSION, coef, diag)
    vg = _logistic_vg(X, y)
    obj = Objective(fun=lambda b: vg(b)[0], dim=p, value_and_grad=vg)
    res = maximize(obj, np.zeros(p), optim or OptimOptions())
    diag.update(converged=res.converged[0], n_iters=res.n_iters)
    return JointBaseline(CLASSIFICATION, res.theta_hat, diag)
