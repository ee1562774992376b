"""Command line interface: ``semigen <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from semigen import kernels
from semigen.data import REGRESSION, fmt_float, read_dataset_csv, read_features_csv, write_dataset_csv
from semigen.datagen import (
    ClassScmConfig,
    RegrScmConfig,
    gen_bayesnet_dataset,
    gen_classification,
    gen_regression,
    load_bayesnet,
)
from semigen.estimators import FitOptions, JointBaseline, LambdaPolicy, WeightSource, fit, fit_joint_regression
from semigen.harness import (
    ExperimentGrid,
    RealDataSource,
    aggregate_to_csv,
    bayes_error,
    compare,
    records_from_csv,
    records_to_csv,
    run_grid,
)
from semigen.models import MODEL_KINDS, DiscreteParams, params_from_text
from semigen.optimize import OptimOptions
from semigen.stats import aggregate

log = logging.getLogger("semigen")


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _pair(text):
    a, b = (float(v) for v in text.split(","))
    return (a, b)


def _resolve_seed(args):
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % (2**32))
    print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _out_path(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


# -- argument groups ---------------------------------------------------------


def _add_scm_args(p):
    g = p.add_argument_group("classification SCM")
    g.add_argument("--mu-c", type=float, default=-1.0)
    g.add_argument("--m", type=float, default=0.0)
    g.add_argument("--mu0", type=float, default=-0.5)
    g.add_argument("--mu1", type=float, default=0.5)
    g = p.add_argument_group("regression SCM")
    g.add_argument("--a", type=float, default=0.0)
    g.add_argument("--b", type=float, default=1.0)
    g.add_argument("--c", type=float, default=0.0)
    g.add_argument("--d", type=float, default=1.0)
    g.add_argument("--sigma-y", type=float, default=1.0)
    g.add_argument("--sigma-e", type=float, default=1.0)
    g.add_argument("--cause-source", type=_pair, default=(0.0, 1.0), metavar="MEAN,STD")
    g.add_argument("--cause-target", type=_pair, default=(1.0, 1.0), metavar="MEAN,STD")
    g = p.add_argument_group("Bayes net")
    g.add_argument("--bn-config", help="Bayes net CPT file")


def _add_optim_args(p):
    g = p.add_argument_group("optimizer")
    g.add_argument("--max-iters", type=int, default=500)
    g.add_argument("--tol", type=float, default=1e-6)
    g.add_argument("--starts", type=int, default=5, help="starts for pooled fits")
    g.add_argument("--perturb", type=float, default=0.5)
    g.add_argument("--restricted", action="store_true", help="constrain regression slopes to be <= 0")


def _fit_options(args):
    return FitOptions(
        optim=OptimOptions(max_iters=args.max_iters, tol=args.tol),
        pooled_starts=args.starts,
        perturb_scale=args.perturb,
        restricted=args.restricted,
    )


def _class_cfg(args):
    return ClassScmConfig(args.mu_c, args.m, args.mu0, args.mu1, allow_equal_means=args.mu0 == args.mu1)


def _regr_cfg(args):
    return RegrScmConfig(
        args.a, args.b, args.c, args.d, args.sigma_y, args.sigma_e, args.cause_source, args.cause_target
    )


def _task_config(args):
    if args.task == "class":
        return _class_cfg(args)
    if args.task == "regr":
        return _regr_cfg(args)
    if args.task == "bn":
        if not args.bn_config:
            raise SystemExit("--bn-config is required for task bn")
        return load_bayesnet(args.bn_config)
    return RealDataSource(
        args.real_csv,
        args.cause,
        args.target,
        args.effect,
        args.domain_col,
        args.source_value,
        args.target_value,
        not args.no_log,
        args.n_test_reserved,
    )


# -- commands ----------------------------------------------------------------


def cmd_gen(args):
    seed = _resolve_seed(args)
    if args.task == "class":
        dataset, test = gen_classification(_class_cfg(args), args.n_s, args.n_t, args.n_test, seed)
    elif args.task == "regr":
        dataset, test = gen_regression(_regr_cfg(args), args.n_s, args.n_t, args.n_test, seed)
    else:
        dataset, test = gen_bayesnet_dataset(_task_config(args), args.n_s, args.n_t, args.n_test, seed)
    path = args.out or _out_path(args, "dataset.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_dataset_csv(fh, dataset, test)
    print(path)


def _read_weights(path):
    with open(path, encoding="utf-8") as fh:
        return tuple(float(line) for line in fh if line.strip())


def cmd_fit(args):
    seed = _resolve_seed(args)
    kind = MODEL_KINDS[args.model]
    with open(args.data, newline="", encoding="utf-8") as fh:
        dataset, _ = read_dataset_csv(fh, kind.task)
    if args.estimator == "LR":
        model = fit_joint_regression(dataset, OptimOptions(max_iters=args.max_iters, tol=args.tol))
        text = model.to_text()
    else:
        if args.weights:
            ws = WeightSource("supplied", weights=_read_weights(args.weights), self_normalize=args.self_normalize)
        elif args.known_mu_c is not None:
            ws = WeightSource("known", ClassScmConfig(args.known_mu_c, allow_equal_means=True))
        else:
            ws = WeightSource("unit")
        res = fit(kind, dataset, args.estimator, LambdaPolicy.parse(args.lambda_), ws, _fit_options(args), seed)
        for note in res.notes:
            log.warning(note)
        text = res.params.to_text()
        text += f"# objective={res.result.objective_value!r} converged={all(res.result.converged)}\n"
    path = args.out or _out_path(args, "params.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(path)


def _load_params(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if "model=joint_regression" in text:
        return JointBaseline.from_text(text)
    return params_from_text(text)


def cmd_predict(args):
    model = _load_params(args.params)
    with open(args.data, newline="", encoding="utf-8") as fh:
        rows = read_features_csv(fh)
    flat = rows.xc.shape[1] == 1 and rows.xe.shape[1] == 1 and not isinstance(model, DiscreteParams)
    xc = rows.xc[:, 0] if flat else rows.xc
    xe = rows.xe[:, 0] if flat else rows.xe
    pred = np.atleast_1d(model.predict(xc, xe))
    regression = getattr(model, "task", None) == REGRESSION
    path = args.out or _out_path(args, "predictions.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,prediction\n")
        for i, v in enumerate(pred):
            fh.write(f"{i},{fmt_float(v) if regression else int(v)}\n")
    print(path)


def cmd_curve(args):
    seed = _resolve_seed(args)
    reps = args.replicates
    if reps is None:
        reps = 500 if args.task in ("class", "bn") else 200
    estimators = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
    grid = ExperimentGrid(
        task=args.task,
        config=_task_config(args),
        n_S=tuple(args.n_s),
        n_T=tuple(args.n_t),
        n_replicates=reps,
        n_test=args.n_test,
        estimators=estimators,
        lambda_policy=LambdaPolicy.parse(args.lambda_),
        master_seed=seed,
        fit_options=_fit_options(args),
    )
    records = run_grid(grid, workers=args.threads)
    rec_path = _out_path(args, "records.csv")
    agg_path = _out_path(args, "aggregate.csv")
    with open(rec_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))
    with open(agg_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(aggregate_to_csv(aggregate(records)))
    print(rec_path)
    print(agg_path)


def cmd_ttest(args):
    with open(args.records, encoding="utf-8") as fh:
        records = records_from_csv(fh.read())
    res = compare(records, args.a, args.b, args.metric, args.n_s, args.n_t, args.alternative)
    print(f"t={res.t_stat:.6g} dof={res.dof} p={res.p_value:.6g} mean_diff={res.mean_diff:.6g}")


def cmd_bayes_error(args):
    seed = _resolve_seed(args)
    print(f"{bayes_error(_class_cfg(args), args.n_mc, seed):.6f}")


# -- parser ------------------------------------------------------------------


def _expand_config(argv):
    """Replace ``--config FILE`` by the ``key=value`` pairs it contains.

    File entries come first so explicit flags still override them.
    """
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2 :]
    extra = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            flag = "--" + key.strip().replace("_", "-")
            value = value.strip()
            if value.lower() in ("true", "yes"):
                extra.append(flag)
            elif value.lower() in ("false", "no"):
                continue
            else:
                extra += [flag, value]
    cmd_pos = next((k for k, a in enumerate(rest) if a in COMMANDS), None)
    if cmd_pos is None:
        return rest + extra
    return rest[: cmd_pos + 1] + extra + rest[cmd_pos + 1 :]


COMMANDS = ("gen", "fit", "predict", "curve", "ttest", "bayes-error")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (random if omitted)")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="semigen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="write a synthetic dataset CSV")
    p.add_argument("--task", choices=("class", "regr", "bn"), default="class")
    p.add_argument("--n-s", type=int, default=8)
    p.add_argument("--n-t", type=int, default=256)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--out")
    _add_scm_args(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", parents=[common], help="fit one estimator on a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=sorted(MODEL_KINDS), default="gauss_class")
    p.add_argument("--estimator", choices=("S", "WS", "P", "LR"), default="P")
    p.add_argument("--lambda", dest="lambda_", default="equal", help="equal|sqrt|fixed:<c>|supheavy")
    p.add_argument("--weights", help="file with one importance weight per source row")
    p.add_argument("--known-mu-c", type=float, help="use exact weights of the classification SCM")
    p.add_argument("--self-normalize", action="store_true")
    p.add_argument("--out")
    _add_optim_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="predict labels for the rows of a dataset CSV")
    p.add_argument("--params", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("curve", parents=[common], help="run a learning-curve grid")
    p.add_argument("--config", help="key=value file with any of these options")
    p.add_argument("--task", choices=("class", "regr", "bn", "real"), default="class")
    p.add_argument("--n-s", type=_int_list, default=[8])
    p.add_argument("--n-t", type=_int_list, default=[0, 4, 16, 64, 256])
    p.add_argument("--replicates", type=int)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--estimators", default="S,WS,P,LR")
    p.add_argument("--lambda", dest="lambda_", default="equal")
    _add_scm_args(p)
    _add_optim_args(p)
    g = p.add_argument_group("real data")
    g.add_argument("--real-csv")
    g.add_argument("--cause")
    g.add_argument("--target")
    g.add_argument("--effect")
    g.add_argument("--domain-col")
    g.add_argument("--source-value")
    g.add_argument("--target-value")
    g.add_argument("--no-log", action="store_true")
    g.add_argument("--n-test-reserved", type=int, default=200)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("ttest", parents=[common], help="paired t-test between two estimators")
    p.add_argument("--records", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", default="error_rate")
    p.add_argument("--n-s", type=int, required=True)
    p.add_argument("--n-t", type=int, required=True)
    p.add_argument("--alternative", choices=("two-sided", "greater", "less"), default="two-sided")
    p.set_defaults(func=cmd_ttest)

    p = sub.add_parser("bayes-error", parents=[common], help="Monte Carlo Bayes error of the classification SCM")
    p.add_argument("--mu-c", type=float, default=-1.0)
    p.add_argument("--m", type=float, default=0.0)
    p.add_argument("--mu0", type=float, default=-0.5)
    p.add_argument("--mu1", type=float, default=0.5)
    p.add_argument("--n-mc", type=int, default=1_000_000)
    p.set_defaults(func=cmd_bayes_error)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_expand_config(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    log.info("kernel backend: %s", kernels.BACKEND)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
