"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .clustering import KMEANS, THRESHOLD, confusion_matrix, kmeans_rows, misclustering, threshold_cluster
from .diagnostics import assumption_report
from .errors import ConfigError, InvalidParameters, NumericalError
from .experiment import (
    ExperimentConfig,
    format_config,
    load_config,
    records_csv,
    run_experiment,
    summary_csv,
    sweep_context,
    timings_csv,
)
from .io import (
    confusion_to_text,
    embedding_to_csv,
    labels_from_csv,
    labels_to_csv,
    matrix_to_text,
    read_hypergraph,
    write_hypergraph,
)
from .model import sample_scalable
from .projection import weighted_adjacency
from .seeding import derive_seed
from .spectral import leading_eigenpairs

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if getattr(args, "seed", None) is not None:
        over["master_seed"] = args.seed
    if getattr(args, "c0", None) is not None:
        over["c0"] = args.c0
    return replace(cfg, **over).validate() if over else cfg.validate()


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def cmd_print_config(args):
    sys.stdout.write(format_config(_config(args)))


def cmd_generate(args):
    cfg = _config(args)
    scale = args.scale if args.scale is not None else cfg.density_scales[-1]
    ctx = sweep_context(cfg)
    params = ctx.params(cfg, scale)
    H = sample_scalable(params, derive_seed(cfg.master_seed, "generate", repr(float(scale))))
    path = os.path.join(args.out_dir, "hypergraph.txt")
    os.makedirs(args.out_dir, exist_ok=True)
    write_hypergraph(path, H)
    _write(args.out_dir, "truth.csv", labels_to_csv(ctx.g))
    print(f"wrote {path} ({len(H)} hyperedges, n={H.n})")


def cmd_cluster(args):
    H = read_hypergraph(args.hypergraph)
    A = weighted_adjacency(H)
    seed = args.seed if args.seed is not None else 0
    emb = leading_eigenpairs(A, args.K, seed=derive_seed(seed, "eigen"))
    _write(args.out_dir, "embedding.csv", embedding_to_csv(emb))
    if args.dump_matrix:
        _write(args.out_dir, "adjacency.txt", matrix_to_text(A))
    truth = None
    if args.truth:
        with open(args.truth) as fh:
            truth = labels_from_csv(fh.read())
    algs = {"kmeans": [KMEANS], "threshold": [THRESHOLD], "both": [KMEANS, THRESHOLD]}[args.algorithm]
    for alg in algs:
        if alg == KMEANS:
            res = kmeans_rows(emb.Ustar, args.K, args.restarts, seed=derive_seed(seed, "kmeans"),
                              zero_rows=emb.zero_rows)
        else:
            res = threshold_cluster(emb.Ustar, args.K)
        path = _write(args.out_dir, f"labels_{alg.lower()}.csv", labels_to_csv(res.labels))
        line = f"{alg}: wrote {path}"
        if truth is not None:
            err = misclustering(truth, res.labels, args.K)
            line += f"; misclustered {err}/{len(truth)}"
            _write(args.out_dir, f"confusion_{alg.lower()}.txt",
                   confusion_to_text(confusion_matrix(truth, res.labels, args.K)))
        print(line)


def cmd_diagnose(args):
    cfg = _config(args)
    scale = args.scale if args.scale is not None else cfg.density_scales[-1]
    ctx = sweep_context(cfg)
    report = assumption_report(ctx.params(cfg, scale), cfg.c0, population=ctx.population(scale),
                               embedding=ctx.population_embedding(scale))
    print(f"scale = {scale!r}")
    for key, val in report.as_dict().items():
        print(f"{key} = {val!r}")


def cmd_experiment(args):
    cfg = _config(args)
    result = run_experiment(cfg, threads=args.threads)
    trials = _write(args.out_dir, "trials.csv", records_csv(result.records))
    summary = _write(args.out_dir, "summary.csv", summary_csv(result.summary))
    _write(args.out_dir, "timings.csv", timings_csv(result.records))
    _write(args.out_dir, "config.txt", format_config(cfg))
    failed = sum(1 for r in result.records if r.error)
    for row in result.summary:
        print(f"scale={row.scale:g} {row.algorithm:<9} mean_err={row.mean_err_rate:.4f} "
              f"se={row.se_err_rate:.4f} exact={row.exact_recovery:.2f}")
    print(f"wrote {trials} and {summary}; {failed} failed trials")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dchsbm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--c0", type=float, help="constant in d = max{n max P, c0 log n}")

    p = sub.add_parser("print-config", help="print the effective configuration")
    common(p)
    p.set_defaults(func=cmd_print_config)

    p = sub.add_parser("generate", help="sample a hypergraph file")
    common(p)
    p.add_argument("--scale", type=float, help="density scale (default: the largest configured)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("cluster", help="cluster a hypergraph file")
    common(p, config=False)
    p.add_argument("hypergraph")
    p.add_argument("-K", type=int, required=True, help="number of communities")
    p.add_argument("--algorithm", choices=["kmeans", "threshold", "both"], default="both")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--truth", help="labels CSV to score against")
    p.add_argument("--dump-matrix", action="store_true")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("diagnose", help="assumption report for the configured model")
    common(p)
    p.add_argument("--scale", type=float)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("experiment", help="run a Monte-Carlo sweep")
    common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, InvalidParameters, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
