"""Replicated learning-curve experiments, real-data loading and comparisons.

Each ``(n_S, n_T, replicate)`` cell draws one training/test split from a
seed derived from the master seed and the cell coordinates; every estimator
in the cell is fitted on that same split so per-replicate metrics can be
paired. Records are sorted before they are returned, so the worker count
never changes the output.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from semigen.data import REGRESSION, DomainDataset, Sample, fmt_float
from semigen.datagen import (
    BayesNetConfig,
    ClassScmConfig,
    RegrScmConfig,
    gen_bayesnet_dataset,
    gen_classification,
    gen_regression,
)
from semigen.estimators import (
    FitOptions,
    LambdaPolicy,
    WeightSource,
    fit,
    fit_joint_regression,
)
from semigen.models import DiscreteParams, GaussClassParams, LinGaussParams
from semigen.stats import (
    AggregateRow,
    MetricRecord,
    PairedTestResult,
    aggregate,
    error_rate,
    paired_t_test,
    rmse,
    semi_generative_nll,
)

log = logging.getLogger(__name__)

TASKS = ("class", "regr", "bn", "real")


# -- real data ---------------------------------------------------------------


@dataclass(frozen=True)
class RealDataSource:
    """A CSV file with one cause, target and effect column and a domain column."""

    path: str
    cause: str
    target: str
    effect: str
    domain_column: str
    source_value: str
    target_value: str
    log_transform: bool = True
    n_test: int = 200


@dataclass(frozen=True)
class RealTable:
    source: Sample
    target: Sample
    n_dropped: int


@lru_cache(maxsize=8)
def _read_real(path, mtime, cause, target, effect, domain_column, source_value, target_value, log_transform):
    cols = (cause, target, effect)
    src, tgt = [], []
    dropped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in (*cols, domain_column) if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"missing columns in {path}: {missing}")
        for lineno, row in enumerate(reader, start=2):
            dom = row[domain_column].strip()
            if dom not in (source_value, target_value):
                continue
            try:
                vals = [float(row[c]) for c in cols]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            if log_transform:
                if min(vals) <= 0:
                    dropped += 1
                    continue
                vals = [math.log(v) for v in vals]
            (src if dom == source_value else tgt).append(vals)

    def sample(rows):
        a = np.array(rows, dtype=float).reshape(-1, 3)
        return Sample(a[:, 0], a[:, 2], a[:, 1])

    return RealTable(sample(src), sample(tgt), dropped)


def read_real_table(source: RealDataSource) -> RealTable:
    """Parse (and cache) the file; rows that cannot be log-transformed are dropped."""
    return _read_real(
        source.path,
        os.path.getmtime(source.path),
        source.cause,
        source.target,
        source.effect,
        source.domain_column,
        source.source_value,
        source.target_value,
        source.log_transform,
    )


def load_real(source: RealDataSource, n_S: int, n_T: int, seed):
    """Subsample a real two-domain dataset.

    Draws, without replacement, ``n_S`` labelled source rows, then
    ``source.n_test`` target rows reserved for testing, then ``n_T``
    unlabelled target rows from the remainder. Returns
    ``(dataset, test_sample, indices)`` where ``indices`` holds the chosen
    row positions within the source and target tables.
    """
    table = read_real_table(source)
    n_src, n_tgt = len(table.source), len(table.target)
    if n_S < 1 or n_S > n_src:
        raise ValueError(f"requested n_S={n_S} but {n_src} source rows are available")
    if source.n_test < 1 or source.n_test > n_tgt:
        raise ValueError(f"cannot reserve {source.n_test} test rows from {n_tgt} target rows")
    if n_T < 0 or n_T > n_tgt - source.n_test:
        raise ValueError(
            f"requested n_T={n_T} but only {n_tgt - source.n_test} target rows remain after the test reserve"
        )
    rng = np.random.default_rng(seed)
    idx_s = rng.choice(n_src, size=n_S, replace=False)
    perm = rng.permutation(n_tgt)
    idx_test = perm[: source.n_test]
    idx_t = perm[source.n_test : source.n_test + n_T]
    dataset = DomainDataset(table.source.take(idx_s), table.target.take(idx_t).unlabelled(), REGRESSION)
    indices = {"source": idx_s, "test": idx_test, "target": idx_t}
    return dataset, table.target.take(idx_test), indices


# -- grid --------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentGrid:
    """A learning-curve experiment.

    ``estimators`` holds labels ``S``, ``WS``, ``LR``, ``P`` or
    ``P@<policy>`` (e.g. ``P@fixed:0.8``); plain ``P`` uses
    ``lambda_policy``.
    """

    task: str
    config: object
    n_S: tuple[int, ...]
    n_T: tuple[int, ...]
    n_replicates: int
    n_test: int = 1000
    estimators: tuple[str, ...] = ("S", "WS", "P", "LR")
    lambda_policy: LambdaPolicy = LambdaPolicy("equal")
    master_seed: int = 0
    fit_options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        object.__setattr__(self, "n_S", tuple(int(v) for v in self.n_S))
        object.__setattr__(self, "n_T", tuple(int(v) for v in self.n_T))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if list(self.n_T) != sorted(self.n_T):
            raise ValueError("n_T list must be sorted ascending")
        if self.n_replicates < 1:
            raise ValueError("need at least one replicate")
        for label in self.estimators:
            _estimator_spec(label, self.lambda_policy)
        expected = {
            "class": ClassScmConfig,
            "regr": RegrScmConfig,
            "bn": BayesNetConfig,
            "real": RealDataSource,
        }[self.task]
        if not isinstance(self.config, expected):
            raise ValueError(f"task {self.task!r} needs a {expected.__name__}")

    @property
    def model(self):
        return {"class": GaussClassParams, "regr": LinGaussParams, "bn": DiscreteParams, "real": LinGaussParams}[
            self.task
        ]

    @property
    def is_classification(self) -> bool:
        return self.task in ("class", "bn")


def _estimator_spec(label, default_policy):
    base, _, pol = label.partition("@")
    if base not in ("S", "WS", "P", "LR"):
        raise ValueError(f"unknown estimator {label!r}")
    if pol and base != "P":
        raise ValueError(f"only P takes a lambda policy: {label!r}")
    return base, LambdaPolicy.parse(pol) if pol else default_policy


def cell_seed(master_seed: int, n_S: int, n_T: int, replicate: int, stream: int = 0):
    return np.random.SeedSequence([master_seed, n_S, n_T, replicate, stream])


def _label_stream(label):
    return 1 + zlib.crc32(label.encode())


class _RatioTable:
    """Cached density ratio of a Bayes net's cause configurations."""

    def __init__(self, cfg: BayesNetConfig):
        src, tgt = cfg.cause_marginal(0), cfg.cause_marginal(1)
        self.ratio = {k: tgt[k] / src[k] if src[k] > 0 else np.inf for k in src}

    def density_ratio(self, x_c):
        rows = np.atleast_2d(np.asarray(x_c)).astype(int)
        return np.array([self.ratio[tuple(r)] for r in rows])


def draw_cell(grid: ExperimentGrid, n_S: int, n_T: int, replicate: int):
    seed = cell_seed(grid.master_seed, n_S, n_T, replicate)
    if grid.task == "class":
        return gen_classification(grid.config, n_S, n_T, grid.n_test, seed)
    if grid.task == "regr":
        return gen_regression(grid.config, n_S, n_T, grid.n_test, seed)
    if grid.task == "bn":
        return gen_bayesnet_dataset(grid.config, n_S, n_T, grid.n_test, seed)
    dataset, test, _ = load_real(grid.config, n_S, n_T, seed)
    return dataset, test


def _metric_names(grid, base):
    names = ["error_rate"] if grid.is_classification else ["rmse"]
    if base != "LR":
        names.append("nll")
    return names


def _weights_for(grid, ratio_table):
    if grid.task in ("class", "regr"):
        return WeightSource("known", grid.config)
    if grid.task == "bn":
        return WeightSource("known", ratio_table)
    return WeightSource("unit")


def run_cell(grid: ExperimentGrid, n_S: int, n_T: int, replicate: int, ratio_table=None) -> list[MetricRecord]:
    """Fit every estimator on one drawn split and evaluate on its test set."""
    dataset, test = draw_cell(grid, n_S, n_T, replicate)
    xc = test.xc[:, 0] if test.xc.shape[1] == 1 else test.xc
    xe = test.xe[:, 0] if test.xe.shape[1] == 1 else test.xe
    out = []
    for label in grid.estimators:
        base, policy = _estimator_spec(label, grid.lambda_policy)
        names = _metric_names(grid, base)
        try:
            if base == "LR":
                model = fit_joint_regression(dataset, grid.fit_options.optim)
                values = {}
            else:
                seed = cell_seed(grid.master_seed, n_S, n_T, replicate, _label_stream(label))
                weights = _weights_for(grid, ratio_table) if base == "WS" else None
                model = fit(grid.model, dataset, base, policy, weights, grid.fit_options, seed).params
                values = {"nll": semi_generative_nll(model, test)}
            pred = model.predict(xc, xe)
            if grid.is_classification:
                values["error_rate"] = error_rate(pred, test.y)
            else:
                values["rmse"] = rmse(pred, test.y)
        except (ValueError, ArithmeticError, FloatingPointError) as exc:
            log.warning("fit failed for %s at n_S=%d n_T=%d rep=%d: %s", label, n_S, n_T, replicate, exc)
            values = {k: math.nan for k in names}
        for k in names:
            out.append(MetricRecord(replicate, n_S, n_T, label, k, float(values[k])))
    return out


def _run_cells(grid, cells):
    table = _RatioTable(grid.config) if grid.task == "bn" and "WS" in grid.estimators else None
    out = []
    for n_S, n_T, rep in cells:
        out.extend(run_cell(grid, n_S, n_T, rep, table))
    return out


def grid_cells(grid: ExperimentGrid):
    return [(s, t, r) for s in grid.n_S for t in grid.n_T for r in range(grid.n_replicates)]


def run_grid(grid: ExperimentGrid, workers: int = 1, chunk_size: int = 50) -> list[MetricRecord]:
    """All records of the grid, sorted by ``(n_S, n_T, replicate, estimator, metric)``."""
    cells = grid_cells(grid)
    if workers <= 1:
        records = _run_cells(grid, cells)
    else:
        chunks = [cells[i : i + chunk_size] for i in range(0, len(cells), chunk_size)]
        records = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_cells, [grid] * len(chunks), chunks):
                records.extend(part)
    records.sort(key=lambda r: r.sort_key)
    return records


# -- CSV ---------------------------------------------------------------------

RECORD_HEADER = ["replicate", "n_S", "n_T", "estimator", "metric", "value"]
AGGREGATE_HEADER = ["n_S", "n_T", "estimator", "metric", "mean", "std", "count"]


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for r in records:
        w.writerow([r.replicate, r.n_S, r.n_T, r.estimator, r.metric, fmt_float(r.value)])
    return buf.getvalue()


def records_from_csv(text: str) -> list[MetricRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != RECORD_HEADER:
        raise ValueError(f"records header must be {','.join(RECORD_HEADER)}")
    return [
        MetricRecord(int(r["replicate"]), int(r["n_S"]), int(r["n_T"]), r["estimator"], r["metric"], float(r["value"]))
        for r in reader
    ]


def aggregate_to_csv(rows: list[AggregateRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for r in rows:
        w.writerow([r.n_S, r.n_T, r.estimator, r.metric, fmt_float(r.mean), fmt_float(r.std), r.count])
    return buf.getvalue()


# -- analysis ----------------------------------------------------------------


def compare(
    records, estimator_a: str, estimator_b: str, metric: str, n_S: int, n_T: int, alternative: str = "two-sided"
) -> PairedTestResult:
    """Paired t-test of ``a - b`` over replicates of one grid cell."""

    def values(est):
        return {
            r.replicate: r.value
            for r in records
            if r.estimator == est and r.metric == metric and r.n_S == n_S and r.n_T == n_T
        }

    va, vb = values(estimator_a), values(estimator_b)
    if not va or not vb:
        raise ValueError(f"no {metric} records for {estimator_a!r} or {estimator_b!r} at n_S={n_S}, n_T={n_T}")
    if set(va) != set(vb):
        raise ValueError("the two estimators do not share the same replicates")
    reps = [k for k in sorted(va) if math.isfinite(va[k]) and math.isfinite(vb[k])]
    if len(reps) < len(va):
        log.warning("dropped %d replicate pairs with failed fits", len(va) - len(reps))
    return paired_t_test([va[k] for k in reps], [vb[k] for k in reps], alternative)


def bayes_error(cfg: ClassScmConfig, n_mc: int, seed, chunk: int = 1_000_000) -> float:
    """Monte Carlo error of the classifier that knows the true mechanisms,
    on target-domain draws."""
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    truth = GaussClassParams(cfg.m, cfg.mu_0, cfg.mu_1)
    rng_seq = np.random.SeedSequence(seed)
    wrong = 0
    done = 0
    for ss in rng_seq.spawn(-(-n_mc // chunk)):
        k = min(chunk, n_mc - done)
        _, test = gen_classification(cfg, 1, 0, k, ss)
        wrong += int(np.sum(truth.predict(test.xc[:, 0], test.xe[:, 0]) != test.y.astype(int)))
        done += k
    return wrong / n_mc
