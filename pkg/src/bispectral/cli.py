"""Command-line entry point.

Subcommands: generate, cluster, evaluate, experiment, ingest.
Exit codes: 0 ok, 2 invalid input, 3 numerical failure, 4 file error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import io as bio
from .experiments import KINDS, ExperimentConfig, run_experiment, write_outputs, determinism_hash
from .metrics import misclassification, nmi
from .models import GraphonSpec, SubGaussianSpec, sample_graphon, sample_sbm, sample_subgaussian
from .pipelines import PIPELINES, PipelineConfig, run_pipeline
from .types import BiclusterError, InvalidProbability, NoConvergence, SbmSpec

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _tau(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tau must be a positive number or 'inf', got {text!r}")
    if not val > 0:
        raise argparse.ArgumentTypeError("tau must be positive")
    return val


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def cmd_generate(args):
    obj = _load_json(args.spec)
    model = obj.pop("model", "sbm")
    if args.seed is not None:
        obj["seed"] = args.seed
    os.makedirs(args.out, exist_ok=True)
    if model == "sbm":
        spec = SbmSpec.from_dict(obj)
        a, rows, cols = sample_sbm(spec, shuffle=not args.no_shuffle)
        echo = spec.to_dict()
    elif model == "subgaussian":
        spec = SubGaussianSpec.from_dict(obj)
        a, rows, cols = sample_subgaussian(spec, shuffle=not args.no_shuffle)
        echo = spec.to_dict()
    elif model == "graphon":
        spec = GraphonSpec.from_dict(obj)
        sample = sample_graphon(spec)
        a, rows, cols = sample.adjacency, sample.rows, sample.cols
        echo = spec.to_dict()
        echo["clipped"] = sample.clipped
    else:
        raise ValueError(f"unknown model {model!r}")
    echo["model"] = model
    bio.write_matrix_market(os.path.join(args.out, "adjacency.mtx"), a)
    bio.write_labels(os.path.join(args.out, "rows.txt"), rows)
    bio.write_labels(os.path.join(args.out, "cols.txt"), cols)
    with open(os.path.join(args.out, "spec.json"), "w") as fh:
        json.dump(echo, fh, indent=2)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_cluster(args):
    a = bio.read_matrix_market(args.adjacency)
    cfg = PipelineConfig(
        args.k_rows,
        args.k_cols,
        truncation_k=args.truncation_k,
        tau=args.tau,
        side=args.side,
        seed=args.seed or 0,
        restarts=args.restarts,
    )
    res = run_pipeline(args.pipeline, a, cfg)
    os.makedirs(args.out, exist_ok=True)
    out = res.to_dict()
    if res.rows is not None:
        bio.write_labels(os.path.join(args.out, "labels_rows.txt"), res.rows)
    if res.cols is not None:
        bio.write_labels(os.path.join(args.out, "labels_cols.txt"), res.cols)
    if args.truth_rows and res.rows is not None:
        truth = bio.read_labels(args.truth_rows)
        out["metrics_rows"] = _metrics(truth, res.rows)
    if args.truth_cols and res.cols is not None:
        truth = bio.read_labels(args.truth_cols)
        out["metrics_cols"] = _metrics(truth, res.cols)
    # timings vary run to run; keep them out of the result file
    out.pop("timings")
    with open(os.path.join(args.out, "result.json"), "w") as fh:
        json.dump(out, fh, indent=2)
    print(f"wrote {args.out}")
    return EXIT_OK


def _metrics(truth, pred):
    rep = misclassification(truth, pred)
    val, degenerate = nmi(truth, pred, return_flag=True)
    return {**rep.to_dict(), "nmi": val, "nmi_degenerate": degenerate}


def cmd_evaluate(args):
    truth = bio.read_labels(args.truth)
    pred = bio.read_labels(args.pred)
    out = _metrics(truth, pred)
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_experiment(args):
    obj = _load_json(args.config) if args.config else {}
    if args.kind:
        obj["kind"] = args.kind
    if "kind" not in obj:
        raise ValueError("experiment needs --kind or a config with 'kind'")
    if args.replicates is not None:
        obj["replicates"] = args.replicates
    if args.seed is not None:
        obj["master_seed"] = args.seed
    if args.grid:
        obj["grid"] = [float(v) for v in args.grid.split(",")]
    if args.pipeline:
        obj["pipelines"] = [args.pipeline]
    if args.tau is not None:
        obj["taus"] = [args.tau]
    obj["output_dir"] = args.out
    cfg = ExperimentConfig.from_dict(obj)
    records = run_experiment(cfg, workers=args.workers)
    paths = write_outputs(cfg, records, args.out)
    failed = sum(1 for r in records if r.get("error"))
    print(f"{len(records)} records ({failed} failed); hash {determinism_hash(records)}")
    print(f"wrote {paths['results']} and {paths['summary']}")
    return EXIT_OK


def cmd_ingest(args):
    shape = tuple(args.shape) if args.shape else None
    a = bio.read_edge_list(args.edges, one_based=not args.zero_based, shape=shape)
    bio.write_matrix_market(args.out, a)
    print(f"{a.n_rows}x{a.n_cols}, {int(a.entries.sum())} edges -> {args.out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="bispectral", description="Spectral clustering of bipartite networks.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a network from a model spec")
    g.add_argument("--spec", required=True, help="model JSON (sbm, subgaussian or graphon)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--no-shuffle", action="store_true", help="keep nodes sorted by cluster")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", help="cluster a MatrixMarket adjacency")
    c.add_argument("--adjacency", required=True)
    c.add_argument("--pipeline", choices=PIPELINES, default="scrre")
    c.add_argument("--k-rows", type=int, required=True)
    c.add_argument("--k-cols", type=int)
    c.add_argument("--truncation-k", type=int)
    c.add_argument("--tau", type=_tau, default=3.0)
    c.add_argument("--side", choices=("rows", "cols", "both"), default="rows")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--restarts", type=int, default=10)
    c.add_argument("--truth-rows")
    c.add_argument("--truth-cols")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("evaluate", help="compare two label files")
    e.add_argument("--truth", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="run a replicated sweep")
    x.add_argument("--kind", choices=KINDS)
    x.add_argument("--config", help="ExperimentConfig JSON")
    x.add_argument("--replicates", type=int)
    x.add_argument("--grid", help="comma-separated sweep values")
    x.add_argument("--pipeline", choices=PIPELINES)
    x.add_argument("--tau", type=_tau)
    x.add_argument("--seed", type=int)
    x.add_argument("--workers", type=int, help="defaults to $BICLUST_WORKERS or 1")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_experiment)

    i = sub.add_parser("ingest", help="convert an edge list to MatrixMarket")
    i.add_argument("--edges", required=True)
    i.add_argument("--zero-based", action="store_true")
    i.add_argument("--shape", type=int, nargs=2, metavar=("N1", "N2"))
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_ingest)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except bio.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError, InvalidProbability, BiclusterError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
