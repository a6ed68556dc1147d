"""Command-line entry point: ``sbmrefine <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from . import io as sbm_io
from .experiments import DATA_ENV, ExperimentSpec, emit_report, run_preset
from .graph import GraphError, LabelError
from .greedy import GreedyConfig, greedy_cluster
from .metrics import best_permutation, loss, misclassified_count
from .refine import (EstimationError, PenaltyMode, iterate_refinement, refine_full,
                     refine_simplified)
from .sbm import (GeneralSbmParams, ParameterError, PlantedPartitionParams,
                  condition_diagnostics, equal_sizes, sample_general_sbm,
                  sample_planted_partition)
from .spectral import DEFAULT_MU, SpectralInitializer, TauPolicy, spectral_embedding

log = logging.getLogger("sbmrefine")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_graph(args):
    return sbm_io.read_edge_list(args.edges, n=args.n, one_based=args.one_based,
                                 skip_header=args.skip_header)


def _initializer(args) -> SpectralInitializer:
    default = "2d" if args.init == "usc" else "1d"
    tau = TauPolicy.parse(args.tau if args.tau is not None else default)
    return SpectralInitializer(args.init, tau, args.mu, args.a)


def _penalty(args) -> PenaltyMode:
    if args.penalty == "known":
        if args.a is None or args.b is None:
            raise ParameterError("--penalty known needs --a and --b")
        return PenaltyMode("known", a=args.a, b=args.b)
    if args.penalty == "truncated":
        return PenaltyMode("truncated", epsilon0=args.epsilon0)
    return PenaltyMode("adaptive")


def cmd_generate(args):
    if args.config:
        cfg = sbm_io.read_params(args.config)
        for key in ("n", "k", "a", "b", "beta", "sizes", "B"):
            if key in cfg and getattr(args, key, None) in (None, []):
                setattr(args, key, cfg[key])
    if args.B is not None:
        B = np.asarray(args.B, dtype=float)
        sizes = args.sizes or equal_sizes(args.n, B.shape[0])
        g, labels = sample_general_sbm(GeneralSbmParams(B, tuple(sizes)), args.seed)
    else:
        if None in (args.n, args.k, args.a, args.b):
            raise ParameterError("generate needs --n --k --a --b (or a config with B)")
        params = PlantedPartitionParams(args.n, args.k, args.a, args.b, args.beta or 1.0)
        g, labels = sample_planted_partition(params, args.sizes or None, args.seed)
    sbm_io.write_edge_list(g, args.out_edges)
    sbm_io.write_labels(labels, args.out_labels)
    log.info("wrote %d nodes, %d edges", g.n, g.num_edges)


def cmd_cluster(args):
    g = _load_graph(args)
    init = _initializer(args)
    labels = init(g, args.k)
    if args.embedding_out:
        tau = init.tau.resolve(g, args.a)
        sbm_io.write_embedding(spectral_embedding(g, args.k, args.init, tau).rows,
                               args.embedding_out)
    sbm_io.write_labels(labels, args.out)


def cmd_cluster_embedding(args):
    rows = sbm_io.read_embedding(args.embedding)
    n = rows.shape[0]
    config = GreedyConfig(args.k, args.radius) if args.radius else \
        GreedyConfig.from_mu(args.k, n, args.mu)
    sbm_io.write_labels(greedy_cluster(rows, config), args.out)


def cmd_refine(args):
    g = _load_graph(args)
    mode = _penalty(args)
    diag: dict = {"algorithm": args.algorithm, "penalty": asdict(mode), "seed": args.seed}
    if args.init == "file":
        if not args.init_labels:
            raise ParameterError("--init file needs --init-labels")
        init_labels = sbm_io.read_labels(args.init_labels)
        initializer = None
        diag["initializer"] = f"file:{args.init_labels}"
    else:
        initializer = _initializer(args)
        init_labels = initializer(g, args.k)
        diag["initializer"] = initializer.name

    if args.algorithm == "full":
        if initializer is None:
            raise ParameterError("--algorithm full reruns the initializer; use --init usc|nsc")
        res = refine_full(g, args.k, initializer, mode, workers=args.workers)
        labels = res.labels
        diag.update(res.summary())
        diag["nodes"] = [asdict(d) for d in res.nodes]
    elif args.algorithm == "simplified":
        res = refine_simplified(g, args.k, init_labels, mode)
        labels = res.labels
        diag.update(res.summary())
        diag["penalty_values"] = asdict(res.nodes[0])
    else:
        it = iterate_refinement(g, args.k, init_labels, mode, args.max_iters)
        labels = it.labels
        diag.update({"changes": it.changes, "converged": it.converged, "cycle": it.cycle,
                     "penalties": [asdict(p) for p in it.penalties],
                     "fallbacks": sum(p.degenerate for p in it.penalties)})
    sbm_io.write_labels(labels, args.out)
    _dump(diag, args.diagnostics)


def cmd_evaluate(args):
    truth = sbm_io.read_labels(args.truth)
    est = sbm_io.read_labels(args.estimate)
    pi = best_permutation(truth, est, args.k)
    _dump({"loss": loss(truth, est, args.k),
           "misclassified": misclassified_count(truth, est, args.k),
           "permutation": {int(i): int(pi[i]) for i in range(1, pi.size)}})


def cmd_diagnostics(args):
    params = PlantedPartitionParams(args.n, args.k, args.a, args.b, args.beta)
    _dump(condition_diagnostics(params).as_dict())


def cmd_experiment(args):
    fields: dict = {"preset": args.preset}
    if args.config:
        cfg = sbm_io.read_params(args.config)
        for key, cast in (("replications", int), ("seed_base", int), ("mu", float),
                          ("workers", int), ("max_iters", int)):
            if key in cfg:
                fields[key] = cast(cfg[key])
        for key in ("initializers", "refinements"):
            if key in cfg:
                fields[key] = tuple(s.strip() for s in str(cfg[key]).split(",") if s.strip())
        if "B" in cfg:
            fields.update(preset="custom", B=cfg["B"], sizes=tuple(cfg["sizes"]))
    for key in ("replications", "seed_base", "mu", "workers", "max_iters"):
        v = getattr(args, key)
        if v is not None:
            fields[key] = v
    if args.initializers:
        fields["initializers"] = tuple(args.initializers)
    if args.refinements:
        fields["refinements"] = tuple(args.refinements)
    fields["penalty"] = _penalty(args)
    fields["data_dir"] = args.data_dir or os.environ.get(DATA_ENV)
    fields["polblogs_edges"] = args.edges
    fields["polblogs_labels"] = args.labels
    report = run_preset(ExperimentSpec(**fields))
    if args.out_csv:
        emit_report(report, args.out_csv, "csv")
    if args.out_json:
        emit_report(report, args.out_json, "json")
    _dump(report.summary())


def _add_graph_args(p):
    p.add_argument("--edges", required=True, help="edge-list file")
    p.add_argument("--n", type=int, help="node count (default: max index + 1)")
    p.add_argument("--one-based", action="store_true", help="node ids start at 1")
    p.add_argument("--skip-header", type=int, default=0, metavar="LINES")


def _add_init_args(p, choices=("usc", "nsc")):
    p.add_argument("--init", choices=choices, default="usc")
    p.add_argument("--tau", help="inf, 0, a number, <c>d (times average degree) or <c>a")
    p.add_argument("--mu", type=float, default=DEFAULT_MU, help="radius constant")


def _add_penalty_args(p):
    p.add_argument("--penalty", choices=("adaptive", "truncated", "known"), default="adaptive")
    p.add_argument("--epsilon0", type=float, default=0.1)
    p.add_argument("--a", type=float, help="known within-rate numerator")
    p.add_argument("--b", type=float, help="known between-rate numerator")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbmrefine",
                                     description="Spectral initialization and penalized "
                                                 "refinement for stochastic block models")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample an SBM graph")
    p.add_argument("--config", help="key=value parameter file")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--sizes", type=int, nargs="*", default=[])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-edges", required=True)
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=cmd_generate, B=None)

    p = sub.add_parser("cluster", help="spectral clustering (USC or NSC)")
    _add_graph_args(p)
    _add_init_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--a", type=float, help="known a for tau policies like 3a")
    p.add_argument("--out", required=True, help="labels CSV")
    p.add_argument("--embedding-out", help="also write the eigenvector rows")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("cluster-embedding", help="greedy clustering of embedding rows")
    p.add_argument("--embedding", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mu", type=float, default=DEFAULT_MU)
    p.add_argument("--radius", type=float, help="explicit radius (overrides --mu)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster_embedding)

    p = sub.add_parser("refine", help="penalized neighbor-voting refinement")
    _add_graph_args(p)
    _add_init_args(p, ("usc", "nsc", "file"))
    _add_penalty_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--algorithm", choices=("full", "simplified", "iterated"),
                   default="simplified")
    p.add_argument("--init-labels", help="initial labels when --init file")
    p.add_argument("--max-iters", type=int, default=20)
    p.add_argument("--seed", type=int, default=0,
                   help="recorded for provenance; the pipeline is deterministic")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="labels CSV")
    p.add_argument("--diagnostics", help="JSON diagnostics path (default: stdout)")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("evaluate", help="misclassification loss against truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnostics", help="rate and condition diagnostics for (n,k,a,b)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=cmd_diagnostics)

    p = sub.add_parser("experiment", help="run a simulation preset or the blog network")
    p.add_argument("--preset", choices=("balanced", "imbalanced", "sparse", "polblogs"),
                   required=True)
    p.add_argument("--config", help="key=value overrides for preset fields")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed-base", dest="seed_base", type=int)
    p.add_argument("--initializers", nargs="+", metavar="SPEC",
                   help="e.g. usc:inf usc:2d nsc:0 nsc:1d")
    p.add_argument("--refinements", nargs="+", choices=("simplified", "full", "iterated"))
    p.add_argument("--mu", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    _add_penalty_args(p)
    p.add_argument("--data-dir", help=f"dataset directory (default: ${DATA_ENV})")
    p.add_argument("--edges", help="blog network edge list or GML file")
    p.add_argument("--labels", help="blog network label file")
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (GraphError, LabelError, ParameterError, EstimationError, ValueError,
            FileNotFoundError) as exc:
        print(f"sbmrefine: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
