"""Command-line front end.

Exit codes: 0 success, 1 bad configuration or input, 2 completed with
partial failures (some cells failed but the run produced output).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _kernels, embedspace, graphstats, substructure
from ._version import __version__
from .encoder import EncoderConfig, encode_dataset, init_random, save_embeddings
from .graph import canonical_hash, dump
from .pipeline import (
    SuiteConfig,
    emit_report,
    load_dataset,
    read_config,
    run_suite,
    sample_node_pairs,
    scaffold_split,
    write_split_csv,
)
from .smiles import SmilesError, parse_smiles

LOGGER = logging.getLogger(__name__)


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="molprobe", description="probe-task evaluation of molecular embeddings")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file merged under explicit flags")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--jobs", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("parse", parents=[common], help="parse SMILES and print graph dumps")
    q.add_argument("smiles", nargs="+")
    q.add_argument("--hash", action="store_true", help="print canonical hashes only")

    q = sub.add_parser("stats", parents=[common], help="topology metric CSVs for a dataset")
    q.add_argument("input")
    q.add_argument("--metrics", help="comma list, default all")
    q.add_argument("--pairs", type=int, default=0, help="sample this many (molecule,u,v) triples for pair metrics")

    q = sub.add_parser("substructure", parents=[common], help="substructure count matrix")
    q.add_argument("input")

    q = sub.add_parser("split", parents=[common], help="scaffold split assignment CSV")
    q.add_argument("input")
    q.add_argument("--fractions", default="0.8,0.1,0.1")

    q = sub.add_parser("embed", parents=[common], help="random-encoder embeddings to binary files")
    q.add_argument("input")
    q.add_argument("--layers", type=int, default=5)
    q.add_argument("--dim", type=int, default=300)
    q.add_argument("--readout", default="mean", choices=("mean", "sum"))

    q = sub.add_parser("probe", parents=[common], help="train one probe task on a dataset")
    q.add_argument("input")
    q.add_argument("--task", required=True)
    q.add_argument("--epochs", type=int, default=100)
    q.add_argument("--pair-count", type=int, default=10000)

    q = sub.add_parser("space", parents=[common], help="embedding-space diagnostics")
    q.add_argument("input")

    q = sub.add_parser("cramers", parents=[common], help="substructure/label association table")
    q.add_argument("input")

    q = sub.add_parser("suite", parents=[common], help="full probe suite over datasets")
    q.add_argument("datasets", nargs="*")
    q.add_argument("--seeds", help="comma list of seeds")
    q.add_argument("--tasks", help="comma list of tasks or families")
    q.add_argument("--epochs", type=int)
    q.add_argument("--pair-count", type=int)
    return p


def _merge_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    return read_config(args.config)


def _cmd_parse(args) -> int:
    failed = 0
    for text in args.smiles:
        try:
            g = parse_smiles(text)
        except SmilesError as exc:
            print(f"{text}\terror at offset {exc.offset}: {exc}", file=sys.stderr)
            failed += 1
            continue
        if args.hash:
            print(f"{text}\t{canonical_hash(g):016x}")
        else:
            print(dump(g))
    if failed == len(args.smiles):
        return 1
    return 2 if failed else 0


def _cmd_stats(args) -> int:
    ds = load_dataset(args.input)
    metrics = tuple(args.metrics.split(",")) if args.metrics else None
    pairs = None
    if args.pairs > 0:
        pairs = sample_node_pairs(ds.graphs, args.pairs, seed=args.seed).tolist()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = graphstats.emit_stats(ds.graphs, out, metrics=metrics, pairs=pairs)
    for f in files:
        print(f)
    return 0


def _cmd_substructure(args) -> int:
    ds = load_dataset(args.input)
    counts = substructure.count_matrix(ds.graphs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"counts_{ds.name}.csv"
    substructure.write_counts_csv(path, counts)
    print(path)
    return 0


def _cmd_split(args) -> int:
    ds = load_dataset(args.input)
    fractions = tuple(float(v) for v in args.fractions.split(","))
    assignment = scaffold_split(ds, fractions, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"split_{ds.name}.csv"
    write_split_csv(assignment, path)
    counts = assignment.counts()
    print(f"{path} train={counts[0]} valid={counts[1]} test={counts[2]}")
    return 0


def _cmd_embed(args) -> int:
    ds = load_dataset(args.input)
    enc = init_random(
        EncoderConfig(layers=args.layers, hidden_dim=args.dim, seed=args.seed, readout=args.readout)
    )
    node_layers, graph_layers = encode_dataset(enc, ds.graphs, provenance=f"{ds.name} seed={args.seed}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    node_path = out / f"{ds.name}_node.bin"
    graph_path = out / f"{ds.name}_graph.bin"
    save_embeddings(node_layers[-1], node_path)
    save_embeddings(graph_layers[-1], graph_path)
    print(node_path)
    print(graph_path)
    return 0


def _cmd_probe(args) -> int:
    cfg = SuiteConfig(
        datasets=(args.input,),
        seeds=(args.seed,),
        tasks=(args.task,),
        epochs=args.epochs,
        pair_count=args.pair_count,
        jobs=args.jobs,
    )
    result = run_suite(cfg)
    name = next(iter(result.report["datasets"]))
    print(json.dumps(result.report["datasets"][name]["tasks"], sort_keys=True, indent=1))
    return 2 if result.failures else 0


def _cmd_space(args) -> int:
    ds = load_dataset(args.input)
    enc = init_random(EncoderConfig(seed=args.seed))
    _, graph_layers = encode_dataset(enc, ds.graphs)
    values = graph_layers[-1].values
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    uni = embedspace.uniformity(values)
    spec = embedspace.spectrum(values)
    embedspace.write_spectrum_csv(spec, out / f"spectrum_{ds.name}.csv")
    doc = {
        "uniformity": uni,
        "effective_rank": spec.effective_rank,
        "collapsed": spec.collapsed,
        "dim": spec.dim,
    }
    if ds.target_names and np.isfinite(ds.targets).any():
        pairs = embedspace.build_pairs(ds.targets, 10000, seed=args.seed)
        al = embedspace.alignment(values, pairs)
        embedspace.write_alignment_json(al, out / f"alignment_{ds.name}.json")
        doc["separation"] = al.separation
    print(json.dumps(doc, sort_keys=True, indent=1))
    return 0


def _cmd_cramers(args) -> int:
    ds = load_dataset(args.input)
    if not ds.target_names:
        print("dataset has no target columns", file=sys.stderr)
        return 1
    counts = substructure.count_matrix(ds.graphs)
    names = substructure.registry_names()
    assoc = substructure.association_matrix(counts, ds.targets)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"association_{ds.name}.csv"
    substructure.write_v_table_csv(path, {ds.name: assoc}, names)
    for name, v in substructure.rank_substructures(assoc, names, mode="task"):
        print(f"{name}\t{v:.4f}")
    print(path, file=sys.stderr)
    return 0


def _cmd_suite(args) -> int:
    merged = _merge_config(args)
    datasets = tuple(args.datasets) or tuple(merged.get("datasets", ()))
    if not datasets:
        raise _ArgError("no datasets given (positional or config)")
    kwargs = dict(merged)
    kwargs["datasets"] = datasets
    kwargs.pop("out_dir", None)
    if args.seeds:
        kwargs["seeds"] = tuple(int(v) for v in args.seeds.split(","))
    if args.tasks:
        kwargs["tasks"] = tuple(args.tasks.split(","))
    if args.epochs is not None:
        kwargs["epochs"] = args.epochs
    if args.pair_count is not None:
        kwargs["pair_count"] = args.pair_count
    if args.jobs != 1 or "jobs" not in kwargs:
        kwargs["jobs"] = args.jobs
    cfg = SuiteConfig(**kwargs)
    result = run_suite(cfg)
    files = emit_report(result, args.out)
    for f in files:
        print(f)
    if result.failures:
        print(f"{result.failures} cells failed; see report.json", file=sys.stderr)
        return 2
    return 0


_COMMANDS = {
    "parse": _cmd_parse,
    "stats": _cmd_stats,
    "substructure": _cmd_substructure,
    "split": _cmd_split,
    "embed": _cmd_embed,
    "probe": _cmd_probe,
    "space": _cmd_space,
    "cramers": _cmd_cramers,
    "suite": _cmd_suite,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        LOGGER.debug("kernel backend: %s", _kernels.backend())
        return _COMMANDS[args.command](args)
    except _ArgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, SmilesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
