"""Semi-generative model classes.

Each parameter class models ``P(y | x_C) P(x_E | y)`` and provides

* ``log_joint(xc, y, xe)``   -- log of the semi-generative density,
* ``log_marginal(xc, xe)``   -- ``y`` summed or integrated out,
* ``predict(xc, xe)``        -- maximiser of the target conditional,
* ``predict_proba(xc, xe)``  -- ``P(Y=1 | x_C, x_E)`` (binary models only),

plus the flat-vector plumbing used by the optimizer. None of the methods
take a domain indicator: the conditional is the same in both domains.

Inputs may be scalars (one row) or arrays (many rows); scalar inputs give a
Python float back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from semigen import kernels
from semigen._pykernels import log_sigmoid, sigmoid
from semigen.data import CLASSIFICATION, REGRESSION, DomainDataset, Sample, fmt_float

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _col(x):
    """Coerce a scalar, 1-D or ``(n, 1)`` input into a contiguous 1-D array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 2:
        if a.shape[1] != 1:
            raise ValueError(f"expected a single feature column, got shape {a.shape}")
        a = a[:, 0]
    elif a.ndim > 2:
        raise ValueError(f"expected at most 2 dimensions, got shape {a.shape}")
    return np.ascontiguousarray(np.atleast_1d(a))


def _out(values, scalar):
    return float(values[0]) if scalar else values


def _all_scalar(*xs):
    return all(np.ndim(x) == 0 for x in xs)


def _norm_logpdf(x, mean, var):
    r = x - mean
    return -_HALF_LOG_2PI - 0.5 * np.log(var) - 0.5 * r * r / var


class SemiGenerativeModel:
    """Shared flat-vector interface; concrete classes fill in the densities."""

    task = CLASSIFICATION
    kind = ""
    names: tuple[str, ...] = ()

    @property
    def n_params(self) -> int:
        return len(self.to_vector())

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.names], dtype=float)

    def bounds(self):
        n = self.n_params
        return np.full(n, -np.inf), np.full(n, np.inf)

    def project(self, vec):
        lo, hi = self.bounds()
        return np.clip(np.asarray(vec, dtype=float), lo, hi)

    def compress(self, sample: Sample, weights=None):
        """Rows and weights to evaluate in place of ``sample``. Models over
        continuous data return them unchanged."""
        return sample, weights

    def alternate_starts(self, dataset: DomainDataset | None = None) -> list[np.ndarray]:
        """Extra starting vectors for the pooled fit.

        The unsupervised likelihood is multimodal, with modes that exchange
        the roles of the labels, so a single supervised start can sit in
        the wrong basin.
        """
        return []

    def to_text(self) -> str:
        """``key=value`` lines with exact decimal round trip."""
        lines = [f"model={self.kind}"]
        lines += [f"{k}={fmt_float(v)}" for k, v in zip(self.names, self.to_vector())]
        if getattr(self, "restricted", False):
            lines.append("restricted=true")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GaussClassParams(SemiGenerativeModel):
    """Logistic cause mechanism with unit slope, unit-variance Gaussian effects.

    ``P(Y=1 | x_C) = sigmoid(x_C - m)`` and ``X_E | Y=y ~ N(mu_y, 1)``.
    """

    m: float = 0.0
    mu_0: float = -1.0
    mu_1: float = 1.0

    kind = "gauss_class"
    names = ("m", "mu_0", "mu_1")

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.m, self.mu_0, self.mu_1)):
            raise ValueError("GaussClassParams must be finite")

    def from_vector(self, vec) -> GaussClassParams:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (3,):
            raise ValueError(f"expected 3 parameters, got shape {vec.shape}")
        return GaussClassParams(float(vec[0]), float(vec[1]), float(vec[2]))

    def alternate_starts(self, dataset=None):
        starts = [np.array([self.m, self.mu_1, self.mu_0])]
        if dataset is not None:
            # both orientations of a median split of all observed effects
            xc = np.concatenate([dataset.source.xc[:, 0], dataset.target.xc[:, 0]])
            xe = np.concatenate([dataset.source.xe[:, 0], dataset.target.xe[:, 0]])
            med = np.median(xe)
            lo, hi = xe[xe <= med].mean(), xe[xe >= med].mean()
            m0 = float(np.clip(self.m, xc.min(), xc.max()))
            starts += [np.array([m0, lo, hi]), np.array([m0, hi, lo])]
        return starts

    def _class_terms(self, xc, xe):
        z = xc - self.m
        a0 = log_sigmoid(-z) - _HALF_LOG_2PI - 0.5 * (xe - self.mu_0) ** 2
        a1 = log_sigmoid(z) - _HALF_LOG_2PI - 0.5 * (xe - self.mu_1) ** 2
        return a0, a1

    def log_joint(self, xc, y, xe):
        scalar = _all_scalar(xc, y, xe)
        xc, xe, y = np.broadcast_arrays(_col(xc), _col(xe), _col(y))
        a0, a1 = self._class_terms(xc, xe)
        return _out(np.where(y > 0.5, a1, a0), scalar)

    def log_marginal(self, xc, xe):
        scalar = _all_scalar(xc, xe)
        xc, xe = np.broadcast_arrays(_col(xc), _col(xe))
        a0, a1 = self._class_terms(xc, xe)
        return _out(np.logaddexp(a0, a1), scalar)

    def predict(self, xc, xe):
        # ties go to class 1
        scalar = _all_scalar(xc, xe)
        xc, xe = np.broadcast_arrays(_col(xc), _col(xe))
        a0, a1 = self._class_terms(xc, xe)
        pred = (a1 >= a0).astype(int)
        return int(pred[0]) if scalar else pred

    def predict_proba(self, xc, xe):
        scalar = _all_scalar(xc, xe)
        xc, xe = np.broadcast_arrays(_col(xc), _col(xe))
        a0, a1 = self._class_terms(xc, xe)
        return _out(sigmoid(a1 - a0), scalar)

    # optimizer plumbing: sums over rows and gradients w.r.t. to_vector()

    @staticmethod
    def sup_sum(theta, sample: Sample, weights):
        return kernels.gc_sup(theta, _col(sample.xc), _col(sample.y), _col(sample.xe), weights)

    @staticmethod
    def unsup_sum(theta, sample: Sample):
        return kernels.gc_unsup(theta, _col(sample.xc), _col(sample.xe))

    @classmethod
    def initial(cls, dataset: DomainDataset, **_) -> GaussClassParams:
        """Class means of x_E; an empty class falls back to the overall mean."""
        xe = dataset.source.xe[:, 0]
        y = dataset.source.y
        overall = float(xe.mean())
        mu = [float(xe[y == k].mean()) if np.any(y == k) else overall for k in (0, 1)]
        return cls(0.0, mu[0], mu[1])


@dataclass(frozen=True)
class LinGaussParams(SemiGenerativeModel):
    """Linear-Gaussian cause and effect mechanisms.

    ``Y | x_C ~ N(a + b x_C, sigma_Y^2)`` and ``X_E | y ~ N(c + d y, sigma_E^2)``,
    with the noise scales stored on the log scale. With ``restricted`` set,
    the slopes ``b`` and ``d`` are constrained to be non-positive.
    """

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    log_sigma_Y: float = 0.0
    log_sigma_E: float = 0.0
    restricted: bool = False

    task = REGRESSION
    kind = "lin_gauss"
    names = ("a", "b", "c", "d", "log_sigma_Y", "log_sigma_E")

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.to_vector()):
            raise ValueError("LinGaussParams must be finite")

    @classmethod
    def from_sigmas(cls, a, b, c, d, sigma_Y, sigma_E, restricted=False) -> LinGaussParams:
        if sigma_Y <= 0 or sigma_E <= 0:
            raise ValueError("noise scales must be positive")
        return cls(a, b, c, d, math.log(sigma_Y), math.log(sigma_E), restricted)

    @property
    def sigma_Y(self) -> float:
        return math.exp(self.log_sigma_Y)

    @property
    def sigma_E(self) -> float:
        return math.exp(self.log_sigma_E)

    def from_vector(self, vec) -> LinGaussParams:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (6,):
            raise ValueError(f"expected 6 parameters, got shape {vec.shape}")
        return LinGaussParams(*(float(v) for v in vec), restricted=self.restricted)

    def alternate_starts(self, dataset=None):
        # (a, b, d) -> -(a, b, d) leaves the marginal of X_E unchanged
        v = self.to_vector()
        v[[0, 1, 3]] *= -1.0
        return [v]

    def bounds(self):
        lo, hi = np.full(6, -np.inf), np.full(6, np.inf)
        if self.restricted:
            hi[1] = hi[3] = 0.0
        return lo, hi

    def log_joint(self, xc, y, xe):
        scalar = _all_scalar(xc, y, xe)
        xc, xe, y = np.broadcast_arrays(_col(xc), _col(xe), _col(y))
        vy, ve = self.sigma_Y**2, self.sigma_E**2
        out = _norm_logpdf(y, self.a + self.b * xc, vy) + _norm_logpdf(xe, self.c + self.d * y, ve)
        return _out(out, scalar)

    def marginal_moments(self, xc):
        """Mean and variance of ``X_E | x_C`` with ``y`` integrated out."""
        xc = np.asarray(xc, dtype=float)
        mean = self.c + self.d * (self.a + self.b * xc)
        var = self.d**2 * self.sigma_Y**2 + self.sigma_E**2
        return mean, var

    def log_marginal(self, xc, xe):
        scalar = _all_scalar(xc, xe)
        xc, xe = np.broadcast_arrays(_col(xc), _col(xe))
        mean, var = self.marginal_moments(xc)
        return _out(_norm_logpdf(xe, mean, var), scalar)

    def predict(self, xc, xe):
        """Precision-weighted combination of the cause-side prediction and the
        inverted effect mechanism; written without dividing by ``d``."""
        scalar = _all_scalar(xc, xe)
        xc, xe = np.broadcast_arrays(_col(xc), _col(xe))
        vy, ve = self.sigma_Y**2, self.sigma_E**2
        num = ve * (self.a + self.b * xc) + self.d * vy * (xe - self.c)
        return _out(num / (ve + self.d**2 * vy), scalar)

    def predict_proba(self, xc, xe):
        raise TypeError("predict_proba is only defined for binary labels")

    @staticmethod
    def sup_sum(theta, sample: Sample, weights):
        return kernels.lg_sup(theta, _col(sample.xc), _col(sample.y), _col(sample.xe), weights)

    @staticmethod
    def unsup_sum(theta, sample: Sample):
        return kernels.lg_unsup(theta, _col(sample.xc), _col(sample.xe))

    @classmethod
    def initial(cls, dataset: DomainDataset, restricted: bool = False, **_) -> LinGaussParams:
        """Least-squares lines and residual scales, projected if restricted."""
        xc = dataset.source.xc[:, 0]
        xe = dataset.source.xe[:, 0]
        y = dataset.source.y
        a, b, sy = _line_fit(xc, y)
        c, d, se = _line_fit(y, xe)
        if restricted:
            b, d = min(b, 0.0), min(d, 0.0)
        return cls(a, b, c, d, math.log(sy), math.log(se), restricted)


def _line_fit(x, t, floor=1e-3):
    """Intercept, slope and residual RMS of ``t`` on ``x`` (slope 0 if x is constant)."""
    xm, tm = float(np.mean(x)), float(np.mean(t))
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (t - tm)) / sxx) if sxx > 1e-12 else 0.0
    icpt = tm - slope * xm
    rms = math.sqrt(float(np.mean((t - icpt - slope * x) ** 2)))
    return icpt, slope, max(rms, floor)


@dataclass(frozen=True, eq=False)
class DiscreteParams(SemiGenerativeModel):
    """Binary causes and effects.

    ``P(Y=1 | x_C) = sigmoid(w[0] + w[1:] . x_C)`` and the effects are
    conditionally independent given ``Y`` with
    ``P(X_Ej = 1 | Y=y) = sigmoid(logit_p[j, y])``.
    """

    w: np.ndarray
    logit_p: np.ndarray

    kind = "discrete"
    # separable or single-class samples push the unconstrained MLE to
    # infinity; the box keeps every fit a finite maximiser
    logit_bound = 15.0

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        lp = np.array(self.logit_p, dtype=float)
        if lp.ndim != 2 or lp.shape[1] != 2:
            raise ValueError(f"logit_p must have shape (dim_e, 2), got {lp.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(lp))):
            raise ValueError("DiscreteParams must be finite")
        w.flags.writeable = False
        lp.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "logit_p", lp)

    def __eq__(self, other):
        return (
            isinstance(other, DiscreteParams)
            and np.array_equal(self.w, other.w)
            and np.array_equal(self.logit_p, other.logit_p)
        )

    def __hash__(self):
        return hash((self.w.tobytes(), self.logit_p.tobytes()))

    @classmethod
    def zeros(cls, dim_c: int, dim_e: int) -> DiscreteParams:
        return cls(np.zeros(dim_c + 1), np.zeros((dim_e, 2)))

    @property
    def dim_c(self) -> int:
        return self.w.shape[0] - 1

    @property
    def dim_e(self) -> int:
        return self.logit_p.shape[0]

    @property
    def names(self):
        return tuple(f"w_{k}" for k in range(self.w.shape[0])) + tuple(
            f"logit_p_{j}_{y}" for j in range(self.dim_e) for y in (0, 1)
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.w, self.logit_p.reshape(-1)])

    def from_vector(self, vec) -> DiscreteParams:
        vec = np.asarray(vec, dtype=float)
        k = self.w.shape[0]
        if vec.shape != (k + 2 * self.dim_e,):
            raise ValueError(f"expected {k + 2 * self.dim_e} parameters, got shape {vec.shape}")
        return DiscreteParams(vec[:k].copy(), vec[k:].reshape(self.dim_e, 2).copy())

    def bounds(self):
        n = self.n_params
        return np.full(n, -self.logit_bound), np.full(n, self.logit_bound)

    def alternate_starts(self, dataset=None):
        # exact symmetry: negated w with swapped effect columns
        return [np.concatenate([-self.w, self.logit_p[:, ::-1].reshape(-1)])]

    def _rows(self, xc, xe):
        xc = np.asarray(xc, dtype=float)
        xe = np.asarray(xe, dtype=float)
        single = xc.ndim == 1 and xe.ndim == 1
        xc = np.atleast_2d(xc)
        xe = np.atleast_2d(xe)
        if xc.shape[1] != self.dim_c or xe.shape[1] != self.dim_e:
            raise ValueError(
                f"expected x_C dim {self.dim_c} and x_E dim {self.dim_e}, "
                f"got {xc.shape[1]} and {xe.shape[1]}"
            )
        return xc, xe, single

    def _class_terms(self, xc, xe):
        eta = self.w[0] + xc @ self.w[1:]
        eff = [
            xe @ log_sigmoid(self.logit_p[:, k]) + (1.0 - xe) @ log_sigmoid(-self.logit_p[:, k])
            for k in (0, 1)
        ]
        return log_sigmoid(-eta) + eff[0], log_sigmoid(eta) + eff[1]

    def log_joint(self, xc, y, xe):
        xc, xe, single = self._rows(xc, xe)
        y = np.broadcast_to(np.asarray(y, dtype=float).reshape(-1), (xc.shape[0],))
        a0, a1 = self._class_terms(xc, xe)
        return _out(np.where(y > 0.5, a1, a0), single)

    def log_marginal(self, xc, xe):
        xc, xe, single = self._rows(xc, xe)
        a0, a1 = self._class_terms(xc, xe)
        return _out(np.logaddexp(a0, a1), single)

    def predict(self, xc, xe):
        xc, xe, single = self._rows(xc, xe)
        a0, a1 = self._class_terms(xc, xe)
        pred = (a1 >= a0).astype(int)
        return int(pred[0]) if single else pred

    def predict_proba(self, xc, xe):
        xc, xe, single = self._rows(xc, xe)
        a0, a1 = self._class_terms(xc, xe)
        return _out(sigmoid(a1 - a0), single)

    # the compiled kernels treat effects as binary via ``x > 0.5``
    def sup_sum(self, theta, sample: Sample, weights):
        return kernels.disc_sup(
            np.ascontiguousarray(theta, dtype=float),
            np.ascontiguousarray(sample.xc),
            np.ascontiguousarray(sample.y),
            np.ascontiguousarray(sample.xe),
            np.ascontiguousarray(weights, dtype=float),
        )

    def unsup_sum(self, theta, sample: Sample, weights=None):
        wt = np.ones(len(sample)) if weights is None else weights
        return kernels.disc_unsup(
            np.ascontiguousarray(theta, dtype=float),
            np.ascontiguousarray(sample.xc),
            np.ascontiguousarray(sample.xe),
            np.ascontiguousarray(wt, dtype=float),
        )

    def compress(self, sample: Sample, weights=None):
        """Collapse repeated binary rows into one row carrying the summed weight."""
        if len(sample) == 0:
            return sample, weights
        cols = [sample.xc, sample.xe] if sample.y is None else [sample.xc, sample.xe, sample.y[:, None]]
        rows, inverse = np.unique(np.hstack(cols), axis=0, return_inverse=True)
        w = np.ones(len(sample)) if weights is None else np.asarray(weights, dtype=float)
        merged = np.bincount(inverse.reshape(-1), weights=w, minlength=rows.shape[0])
        dc, de = sample.xc.shape[1], sample.xe.shape[1]
        y = None if sample.y is None else rows[:, dc + de]
        return Sample(rows[:, :dc], rows[:, dc : dc + de], y), merged

    @classmethod
    def initial(cls, dataset: DomainDataset, **_) -> DiscreteParams:
        """Smoothed label frequency for the bias, smoothed per-class effect rates."""
        y = dataset.source.y
        xe = dataset.source.xe
        p1 = (y.sum() + 1.0) / (len(y) + 2.0)
        w = np.zeros(dataset.dim_c + 1)
        w[0] = math.log(p1 / (1.0 - p1))
        lp = np.zeros((dataset.dim_e, 2))
        for k in (0, 1):
            rows = xe[y == k]
            rate = (rows.sum(axis=0) + 1.0) / (rows.shape[0] + 2.0)
            lp[:, k] = np.log(rate / (1.0 - rate))
        return cls(w, lp)


MODEL_KINDS = {
    "gauss_class": GaussClassParams,
    "lin_gauss": LinGaussParams,
    "discrete": DiscreteParams,
}


def params_from_text(text: str) -> SemiGenerativeModel:
    """Inverse of ``to_text``."""
    items = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed parameter line {line!r}")
        items[key.strip()] = value.strip()
    kind = items.pop("model", None)
    if kind == "gauss_class":
        return GaussClassParams(*(float(items[k]) for k in GaussClassParams.names))
    if kind == "lin_gauss":
        restricted = items.pop("restricted", "false").lower() in ("1", "true")
        return LinGaussParams(*(float(items[k]) for k in LinGaussParams.names), restricted=restricted)
    if kind == "discrete":
        n_w = sum(1 for k in items if k.startswith("w_"))
        dim_e = sum(1 for k in items if k.startswith("logit_p_")) // 2
        w = [float(items[f"w_{k}"]) for k in range(n_w)]
        lp = [[float(items[f"logit_p_{j}_{y}"]) for y in (0, 1)] for j in range(dim_e)]
        return DiscreteParams(np.array(w), np.array(lp).reshape(dim_e, 2))
    raise ValueError(f"unknown model kind {kind!r}")
