"""Projected gradient ascent with Armijo backtracking, plus multi-start.

Objectives here are low-dimensional and smooth; constraints are per-coordinate
boxes (used for the non-positive slope restriction), so projection is a clip.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class Objective:
    """A function to maximise over a box.

    Supply ``value_and_grad`` (returning ``(f, g)``) or ``grad`` for an
    analytic gradient; otherwise central differences are used.
    """

    fun: Callable[[np.ndarray], float]
    dim: int
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]] | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.lower = np.full(self.dim, -np.inf) if self.lower is None else np.asarray(self.lower, float)
        self.upper = np.full(self.dim, np.inf) if self.upper is None else np.asarray(self.upper, float)
        if self.lower.shape != (self.dim,) or self.upper.shape != (self.dim,):
            raise ValueError("bounds must match the objective dimension")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def has_gradient(self) -> bool:
        return self.grad is not None or self.value_and_grad is not None

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def feasible(self, x) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def analytic(self, x):
        if self.value_and_grad is not None:
            f, g = self.value_and_grad(x)
            return float(f), np.asarray(g, dtype=float), 1
        return float(self.fun(x)), np.asarray(self.grad(x), dtype=float), 1

    def evaluate(self, x):
        """Return ``(value, gradient, n_function_evaluations)``."""
        if self.has_gradient:
            return self.analytic(x)
        f = float(self.fun(x))
        return f, fd_gradient(self.fun, x), 1 + 2 * self.dim


def fd_gradient(fun, x):
    """Central differences with step ``1e-6 * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        h = 1e-6 * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fun(xp) - fun(xm)) / (2.0 * h)
    return g


@dataclass(frozen=True)
class OptimOptions:
    max_iters: int = 500
    tol: float = 1e-6
    step_floor: float = 1e-12
    armijo: float = 1e-4
    shrink: float = 0.5


@dataclass
class FitResult:
    theta_hat: np.ndarray
    objective_value: float
    n_starts: int = 1
    n_evals: int = 0
    converged: list[bool] = field(default_factory=list)
    best_start_index: int = 0
    n_iters: int = 0
    grad_norm: float = np.nan
    start_values: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def maximize(obj: Objective, init, opts: OptimOptions | None = None) -> FitResult:
    """Projected gradient ascent from ``init``.

    The first trial step of each iteration is a Barzilai-Borwein step and is
    halved until the Armijo condition holds, so accepted iterates never
    decrease the objective. Stops when the projected gradient's max-norm is
    at most ``opts.tol``, after ``opts.max_iters`` iterations, or when the
    step falls below ``opts.step_floor``; the latter two are reported as not
    converged rather than raised.
    """
    opts = opts or OptimOptions()
    x = np.array(init, dtype=float).reshape(-1)
    if x.shape != (obj.dim,):
        raise ValueError(f"init has {x.shape[0]} coordinates, objective has {obj.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("init must be finite")
    if not obj.feasible(x):
        raise ValueError("init violates the constraints")
    f, g, n_evals = obj.evaluate(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise ValueError("objective is not finite at init")

    step = 1.0
    converged = False
    it = 0
    pg_norm = np.inf
    for it in range(opts.max_iters + 1):
        pg_norm = float(np.max(np.abs(obj.project(x + g) - x))) if obj.dim else 0.0
        if pg_norm <= opts.tol:
            converged = True
            break
        if it == opts.max_iters:
            break
        t = step
        accepted = False
        while t >= opts.step_floor:
            x_new = obj.project(x + t * g)
            d = x_new - x
            f_new, g_new, k = obj.evaluate(x_new)
            n_evals += k
            if np.isfinite(f_new) and np.all(np.isfinite(g_new)) and f_new >= f + opts.armijo * float(g @ d):
                accepted = True
                break
            t *= opts.shrink
        if not accepted:
            break
        s = x_new - x
        yv = g_new - g
        curv = -float(s @ yv)
        step = float(s @ s) / curv if curv > 0 else 2.0 * t
        step = min(max(step, 1e-10), 1e10)
        x, f, g = x_new, f_new, g_new
    return FitResult(
        theta_hat=x,
        objective_value=f,
        n_starts=1,
        n_evals=n_evals,
        converged=[converged],
        best_start_index=0,
        n_iters=it,
        grad_norm=pg_norm,
        start_values=[f],
    )


def multistart_maximize(
    obj: Objective,
    base_init,
    n_starts: int = 5,
    perturb_scale: float = 0.5,
    seed=0,
    opts: OptimOptions | None = None,
    extra_starts=(),
) -> FitResult:
    """Run ``maximize`` from ``base_init``, ``n_starts - 1`` Gaussian
    perturbations of it (projected to the box) and any ``extra_starts``,
    and keep the best.

    Ties in objective value go to the lower start index.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    base = np.array(base_init, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    starts = [base]
    for _ in range(n_starts - 1):
        starts.append(obj.project(base + perturb_scale * rng.standard_normal(base.shape[0])))
    starts += [obj.project(np.asarray(x, dtype=float).reshape(-1)) for x in extra_starts]
    results = []
    for k, s in enumerate(starts):
        try:
            results.append(maximize(obj, s, opts))
        except ValueError:
            if k == 0:
                raise
            log.debug("start %d skipped: objective not finite", k)
            results.append(None)
    best_k = max(
        (k for k, r in enumerate(results) if r is not None),
        key=lambda k: (results[k].objective_value, -k),
    )
    best = results[best_k]
    return FitResult(
        theta_hat=best.theta_hat,
        objective_value=best.objective_value,
        n_starts=len(starts),
        n_evals=sum(r.n_evals for r in results if r is not None),
        converged=[bool(r and r.converged[0]) for r in results],
        best_start_index=best_k,
        n_iters=best.n_iters,
        grad_norm=best.grad_norm,
        start_values=[r.objective_value if r else -np.inf for r in results],
    )


def check_gradient(obj: Objective, point) -> float:
    """Largest ``|g_fd - g| / max(1, |g|)`` over coordinates."""
    if not obj.has_gradient:
        raise ValueError("objective has no analytic gradient")
    x = np.asarray(point, dtype=float)
    _, g, _ = obj.analytic(x)
    g_fd = fd_gradient(obj.fun, x)
    return float(np.max(np.abs(g_fd - g) / np.maximum(1.0, np.abs(g))))
