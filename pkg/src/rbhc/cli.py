"""Command-line entry point: ``rbhc <command> ...``."""
from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .agglomerate import greedy_cluster, nnchain_cluster
from .bhc import PRIOR_FAMILIES, bhc_greedy, cut_tree, default_prior
from .evaluate import (
    LINKAGES,
    adjusted_rand_index,
    baseline_forest,
    beta_trend,
    error_decay_sweep,
    run_reducibility,
    sweep_to_csv,
)
from .expfam import FAMILIES, FamilyDescriptor, SmoothingConfig
from .forest import Partition, extract_partition
from .io import dataset_to_csv, parse_dataset, to_json, write_atomic
from .lambda_select import CENTER_WEIGHTS, LambdaHeuristicConfig, select_lambda
from .synth import SYNTH_FAMILIES, SynthSpec, generate


def _choice(options):
    """argparse type accepting ``-`` or ``_`` spellings of ``options``."""
    def convert(text):
        name = text.strip().lower().replace("-", "_")
        if name not in options:
            shown = ", ".join(o.replace("_", "-") for o in options)
            raise argparse.ArgumentTypeError(f"unknown family {text!r} (choose from {shown})")
        return name
    convert.__name__ = "family"
    return convert


def parse_lambda(text: str):
    """``inf``, ``auto:<k_tilde>`` or a positive number."""
    t = text.strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    if t.startswith("auto:"):
        try:
            k = int(t[5:])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad lambda {text!r}: auto needs an integer k_tilde") from None
        if k < 1:
            raise argparse.ArgumentTypeError("auto:<k_tilde> needs k_tilde >= 1")
        return ("auto", k)
    try:
        lam = float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda {text!r}") from None
    if not lam > 0:
        raise argparse.ArgumentTypeError("lambda must be positive")
    return lam


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _family_descriptor(args, X) -> FamilyDescriptor:
    dim = X.shape[1]
    kw = {"sigma2": args.sigma2}
    if args.family == "multinomial":
        m = args.m
        if m is None:
            sums = X.sum(axis=1)
            if not np.all(sums == sums[0]):
                raise ValueError("multinomial rows have different totals; pass --m")
            m = int(sums[0])
        kw["m"] = m
    if args.no_smoothing:
        kw["smoothing"] = SmoothingConfig()
    return FamilyDescriptor(args.family, dim, **kw)


def _partition_path(args):
    if args.partition:
        return args.partition
    return os.path.join(os.path.dirname(os.path.abspath(args.out)), "partition.csv")


def cmd_cluster(args) -> int:
    X, _ = parse_dataset(args.input)
    if args.algo in LINKAGES:
        if args.k is None:
            raise ValueError(f"--algo {args.algo} needs --k")
        forest = baseline_forest(X, args.algo, args.k)
        meta = {"algorithm": args.algo, "k": args.k}
    else:
        fam = _family_descriptor(args, X)
        lam = args.lam
        if isinstance(lam, tuple):
            cfg = LambdaHeuristicConfig(
                lam[1], a=args.lambda_multiplier, kmeans_iters=args.kmeans_iters, seed=args.seed,
                center_weight=args.lambda_center_weight,
            )
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                lam = select_lambda(X, fam, cfg)
            for w in caught:
                print(f"rbhc: warning: {w.message}", file=sys.stderr)
        run = greedy_cluster if args.algo == "greedy" else nnchain_cluster
        forest = run(X, fam, lam)
        meta = {"algorithm": args.algo, "family": args.family, "lambda": lam if math.isfinite(lam) else "inf"}
    out = {**meta, **forest.to_dict()}
    write_atomic(args.out, to_json(out))
    write_atomic(_partition_path(args), extract_partition(forest).to_csv())
    if args.linkage_csv:
        write_atomic(args.linkage_csv, forest.to_linkage_csv())
    return 0


def cmd_bhc(args) -> int:
    X, _ = parse_dataset(args.input)
    overrides = {}
    if args.family == "gamma_poisson":
        overrides = {"a": args.a, "b": args.b}
    elif args.family == "dirichlet_multinomial" and args.concentration is not None:
        overrides = {"concentration": np.full(X.shape[1], args.concentration)}
    elif args.family == "gaussian_known_var":
        overrides = {"sigma2": args.sigma2, "rho2": args.rho2}
    prior = default_prior(args.family, X, **overrides)
    tree = bhc_greedy(X, prior, args.alpha, cut=False)
    forest = cut_tree(tree, args.threshold)
    out = {"family": args.family, "alpha": args.alpha, "threshold": args.threshold, **tree.to_dict()}
    write_atomic(args.out, to_json(out))
    write_atomic(_partition_path(args), extract_partition(forest).to_csv())
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        args.family, n=args.n, k=args.k, dim=args.dim, m=args.m, beta=args.beta, seed=args.seed,
        gamma_shape=args.gamma_shape, gamma_rate=args.gamma_rate, dirichlet=args.dirichlet,
        mean_precision=args.mean_precision, wishart_df=args.wishart_df, weights=args.weights,
    )
    X, labels = generate(spec)
    write_atomic(args.out, dataset_to_csv(X, labels))
    return 0


def _emit(text, path):
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def cmd_reducibility(args) -> int:
    report = run_reducibility(
        args.family, args.trials, seed=args.seed, beta=args.beta,
        size_range=(args.min_size, args.max_size), workers=args.workers,
    )
    _emit(to_json(report.to_dict()), args.out)
    return 0


def cmd_sweep(args) -> int:
    cells = error_decay_sweep(
        args.family, args.betas, args.max_sizes, args.trials_per_cell, seed=args.seed,
        min_size=args.min_size, workers=args.workers,
    )
    _emit(sweep_to_csv(cells), args.out)
    if cells:
        trend = {str(k): v for k, v in beta_trend(cells).items()}
        print(to_json({"spearman_vs_beta": trend}), end="", file=sys.stderr)
    return 0


def _read_partition(path) -> Partition:
    with open(path) as fh:
        head = fh.readline().strip().replace(" ", "")
    if head == "id,label":
        with open(path) as fh:
            return Partition.from_csv(fh.read())
    _, labels = parse_dataset(path)
    if labels is None:
        raise ValueError(f"{path}: neither a partition CSV nor a dataset with a label column")
    return Partition.from_labels(labels.tolist())


def cmd_eval_ari(args) -> int:
    p1, p2 = _read_partition(args.truth), _read_partition(args.pred)
    if len(p1) != len(p2):
        raise ValueError(f"partitions cover different leaf sets ({len(p1)} vs {len(p2)} points)")
    _emit(to_json({"ari": adjusted_rand_index(p1, p2), "n": len(p1)}), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rbhc", description="Small-variance Bayesian hierarchical clustering.")
    p.add_argument("--version", action="version", version=f"rbhc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="agglomerative clustering with the small-variance dissimilarity")
    c.add_argument("--input", required=True)
    c.add_argument("--family", type=_choice(FAMILIES), default="gaussian_spherical")
    c.add_argument("--sigma2", type=float, default=1.0)
    c.add_argument("--m", type=int, help="multinomial trials per row (default: inferred)")
    c.add_argument("--no-smoothing", action="store_true", help="disable the family's default smoothing")
    c.add_argument("--algo", choices=("greedy", "nnchain") + LINKAGES, default="nnchain")
    c.add_argument("--k", type=int, help="cluster count for the classic linkage baselines")
    c.add_argument("--lambda", dest="lam", type=parse_lambda, default=math.inf,
                   help="merge threshold: a positive number, inf, or auto:<k_tilde>")
    c.add_argument("--lambda-center-weight", choices=CENTER_WEIGHTS, default="population")
    c.add_argument("--lambda-multiplier", type=int, default=4)
    c.add_argument("--kmeans-iters", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True, help="forest JSON path")
    c.add_argument("--partition", help="partition CSV path (default: partition.csv beside --out)")
    c.add_argument("--linkage-csv", help="also write merges as a CSV table")
    c.set_defaults(func=cmd_cluster)

    b = sub.add_parser("bhc", help="exact Bayesian hierarchical clustering")
    b.add_argument("--input", required=True)
    b.add_argument("--family", type=_choice(PRIOR_FAMILIES), required=True)
    b.add_argument("--alpha", type=float, default=1.0)
    b.add_argument("--a", type=float, default=2.0, help="gamma prior shape")
    b.add_argument("--b", type=float, default=0.05, help="gamma prior rate")
    b.add_argument("--concentration", type=float, help="symmetric dirichlet concentration")
    b.add_argument("--sigma2", type=float, default=1.0)
    b.add_argument("--rho2", type=float, default=1.0)
    b.add_argument("--threshold", type=float, default=0.5)
    b.add_argument("--out", required=True)
    b.add_argument("--partition")
    b.set_defaults(func=cmd_bhc)

    s = sub.add_parser("synth", help="sample a synthetic mixture dataset")
    s.add_argument("--family", type=_choice(SYNTH_FAMILIES), required=True)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--k", type=int, default=6)
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--m", type=int, default=10)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--gamma-shape", type=float, default=2.0)
    s.add_argument("--gamma-rate", type=float, default=0.05)
    s.add_argument("--dirichlet", type=float, default=0.5)
    s.add_argument("--mean-precision", type=float, default=0.08)
    s.add_argument("--wishart-df", type=float)
    s.add_argument("--weights", type=_floats, help="comma-separated mixing weights")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("reducibility", help="Monte-Carlo reducibility and approximation-error report")
    r.add_argument("--family", type=_choice(SYNTH_FAMILIES), required=True)
    r.add_argument("--trials", type=int, default=10000)
    r.add_argument("--beta", type=float, default=1.0)
    r.add_argument("--min-size", type=int, default=20)
    r.add_argument("--max-size", type=int, default=100)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_reducibility)

    w = sub.add_parser("sweep", help="mean relative error over a (beta, max size) grid")
    w.add_argument("--family", type=_choice(SYNTH_FAMILIES), default="gaussian")
    w.add_argument("--betas", type=_floats, default=[1.0, 2.0, 4.0, 8.0, 16.0])
    w.add_argument("--max-sizes", type=_ints, default=[100])
    w.add_argument("--trials-per-cell", type=int, default=2000)
    w.add_argument("--min-size", type=int, default=20)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--workers", type=int)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("eval-ari", help="adjusted Rand index between two labelings")
    e.add_argument("--truth", required=True, help="partition CSV or dataset CSV with a label column")
    e.add_argument("--pred", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval_ari)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"rbhc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
