"""Command-line pipeline driver.

Subcommands mirror the pipeline stages (cluster, aggregate, bowtie,
hodge, nmf, select-k, analyze, synth) and interchange data through the
CSV/JSON formats in :mod:`cryptoflow.fileio`.  Options may come from an
optional ``key = value`` config file; command-line flags always win.
Exit codes: 0 success, 1 data error, 2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _kernels, bowtie as bowtie_mod, fileio, hodge as hodge_mod
from . import modelsel, network as net_mod, nmf as nmf_mod
from .clustering import cluster_addresses, rank_size
from .errors import DataError, FlowError, NumericError
from .network import FlowNetwork, iter_months, restrict
from .records import read_records

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


# Converters applied to config-file values, keyed by argument dest.
_CONFIG_TYPES = {
    "input": str, "out": str, "clustering": str, "nodes": str,
    "labels": str, "config": str,
    "from_month": str, "to_month": str, "scale": str, "weight": str,
    "k": int, "k_range": str, "runs": int, "seed": int, "threads": int,
    "jitter": float, "alpha": float, "beta": float,
    "docs": int, "vocab": int, "doc_length": int,
    "strict": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


def _load_config(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise UsageError(f"config line {line_no}: expected key = value")
            key, _, value = text.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(args: argparse.Namespace):
    if not getattr(args, "config", None):
        return
    config = _load_config(args.config)
    alias = {"from": "from_month", "to": "to_month"}
    for key, raw in config.items():
        dest = alias.get(key, key)
        if dest not in _CONFIG_TYPES:
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, dest, None) is None:
            setattr(args, dest, _CONFIG_TYPES[dest](raw))


def _require(args, *dests):
    for dest in dests:
        if getattr(args, dest, None) is None:
            flag = {"from_month": "--from", "to_month": "--to"}.get(
                dest, "--" + dest.replace("_", "-")
            )
            raise UsageError(f"missing required option {flag}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_json(obj):
    json.dump(fileio._json_ready(obj), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _parse_k_range(text: str) -> list[int]:
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad --k-range {text!r} (use A..B or a,b,c)") from None
    if not values:
        raise UsageError(f"bad --k-range {text!r}: empty")
    return values


def _load_input_matrix(args) -> tuple[np.ndarray, list[str], list[str]]:
    """Accept either a matrix grid or a snapshot edge list as input."""
    path = Path(args.input)
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if header and header[0] == "source":
        network = fileio.read_network(path, getattr(args, "nodes", None))
        network = restrict(network, network.nodes, drop_self_loops=True)
        X, _ = net_mod.export_adjacency(network, args.weight or "frequency")
        labels = list(network.nodes)
        return X, labels, labels
    X, rows, cols = fileio.read_matrix(path)
    if np.any(X < 0):
        raise DataError(f"matrix {path} has negative entries")
    return X, rows, cols


def _load_clustering(args, records):
    if getattr(args, "clustering", None):
        return fileio.read_clustering(args.clustering)
    return cluster_addresses(records)


# -- subcommands -----------------------------------------------------------

def cmd_cluster(args) -> int:
    _require(args, "input", "out")
    out = _out_dir(args)
    records = list(read_records(args.input, strict=bool(args.strict)))
    clustering = cluster_addresses(records)
    fileio.write_clustering(clustering, out / "clustering.csv")
    fileio.write_rank_size(rank_size(clustering), out / "rank_size.csv")
    type_a = sum(1 for t in clustering.user_type.values() if t == "TypeA")
    _print_json(
        {
            "n_records": len(records),
            "n_addresses": clustering.n_addresses,
            "n_users": clustering.n_users,
            "type_a": type_a,
            "type_b": clustering.n_users - type_a,
        }
    )
    return 0


def cmd_aggregate(args) -> int:
    _require(args, "input", "out", "from_month", "to_month")
    out = _out_dir(args)
    records = list(read_records(args.input, strict=bool(args.strict)))
    clustering = _load_clustering(args, records)
    transfers = list(net_mod.resolve_transfers(records, clustering))
    summary = []
    for period in iter_months(args.from_month, args.to_month):
        snapshot = net_mod.aggregate(transfers, period, args.scale or "month")
        period_dir = out / period.label()
        period_dir.mkdir(parents=True, exist_ok=True)
        fileio.write_network(
            snapshot, period_dir / "edges.csv", period_dir / "nodes.csv"
        )
        summary.append(
            {
                "period": period.label(),
                "n_nodes": snapshot.n_nodes,
                "n_edges": snapshot.n_edges,
                "n_self_loops": sum(1 for i, j in snapshot.edges if i == j),
            }
        )
    _print_json({"periods": summary})
    return 0


def _decomposed(args) -> tuple[FlowNetwork, "bowtie_mod.BowTieResult"]:
    _require(args, "input")
    network = fileio.read_network(args.input, getattr(args, "nodes", None))
    network = restrict(network, network.nodes, drop_self_loops=True)
    return network, bowtie_mod.bowtie_decompose(network)


def cmd_bowtie(args) -> int:
    _require(args, "out")
    network, result = _decomposed(args)
    out = _out_dir(args)
    fileio.write_bowtie(result, out / "bowtie.csv")
    summary = fileio.bowtie_summary(result)
    fileio.write_json(summary, out / "bowtie_summary.json")
    _print_json(summary)
    return 0


def cmd_hodge(args) -> int:
    _require(args, "out")
    network, classes = _decomposed(args)
    out = _out_dir(args)
    g = hodge_mod.net_flow(network, args.weight or "frequency")
    result = hodge_mod.hodge_decompose(g)
    fileio.write_hodge(result, classes, out / "hodge.csv")
    fileio.write_flow_edges(g, result.F_grad, out / "gradient.csv")
    fileio.write_flow_edges(g, result.F_circ, out / "circular.csv")
    _print_json(
        {
            "n_nodes": len(result.nodes),
            "residual_norm": result.residual_norm,
            "weight": g.weight_source,
        }
    )
    return 0


def cmd_nmf(args) -> int:
    _require(args, "input", "out", "k")
    out = _out_dir(args)
    X, rows, cols = _load_input_matrix(args)
    model = nmf_mod.nmf_fit(
        X,
        args.k,
        seed=args.seed if args.seed is not None else 0,
        jitter=args.jitter if args.jitter is not None else 0.0,
        row_labels=tuple(rows),
        col_labels=tuple(cols),
    )
    fileio.write_nmf_model(
        model, out / "S.csv", out / "D.csv", out / "nmf_summary.json"
    )
    _print_json(fileio.nmf_summary(model))
    return 0


def cmd_select_k(args) -> int:
    _require(args, "input", "out", "k_range")
    out = _out_dir(args)
    X, _, _ = _load_input_matrix(args)
    runs = args.runs if args.runs is not None else modelsel.DEFAULT_RUNS
    base = args.seed if args.seed is not None else 0
    report = modelsel.select_k(
        X,
        _parse_k_range(args.k_range),
        runs_per_k=runs,
        seeds=[base + i for i in range(runs)],
        jitter=args.jitter if args.jitter is not None else modelsel.SELECT_JITTER,
        n_jobs=args.threads if args.threads is not None else 1,
    )
    fileio.write_coherence_report(report, out / "report.csv", out / "report.json")
    _print_json(
        {
            "consensus_k": report.consensus_k,
            "chosen_k": {n: c.chosen_k for n, c in report.curves.items()},
            "n_failures": len(report.failures),
        }
    )
    return 0


def cmd_synth(args) -> int:
    _require(args, "out", "k")
    out = _out_dir(args)
    corpus = modelsel.generate_lda(
        D=args.docs if args.docs is not None else 100,
        V=args.vocab if args.vocab is not None else 100,
        K=args.k,
        alpha=args.alpha if args.alpha is not None else 0.1,
        beta=args.beta if args.beta is not None else 0.05,
        doc_length=args.doc_length if args.doc_length is not None else 2000,
        seed=args.seed if args.seed is not None else 0,
    )
    fileio.write_corpus(corpus, out / "corpus.csv")
    truth = {
        "true_K": corpus.true_K,
        "alpha": corpus.alpha,
        "beta": corpus.beta,
        "doc_length": corpus.doc_length,
        "seed": corpus.seed,
        "docs": int(corpus.counts.shape[0]),
        "vocab": int(corpus.counts.shape[1]),
    }
    fileio.write_json(truth, out / "truth.json")
    _print_json(truth)
    return 0


def _analyze_period(period, transfers, args, out):
    snapshot = net_mod.aggregate(transfers, period, args.scale or "month")
    period_dir = out / period.label()
    period_dir.mkdir(parents=True, exist_ok=True)
    fileio.write_network(
        snapshot, period_dir / "edges.csv", period_dir / "nodes.csv"
    )
    row = {
        "period": period.label(),
        "n_nodes": snapshot.n_nodes,
        "n_edges": snapshot.n_edges,
        "n_self_loops": sum(1 for i, j in snapshot.edges if i == j),
    }
    if snapshot.n_nodes == 0:
        log.warning("period %s has no transfers", period.label())
        return row, snapshot, None, None

    regular = net_mod.select_regular_users(transfers, period)
    core = restrict(snapshot, regular, drop_self_loops=True)
    row["n_regular"] = len(regular)
    if core.n_nodes == 0:
        log.warning("period %s has no regular users", period.label())
        return row, snapshot, None, None

    classes = bowtie_mod.bowtie_decompose(core)
    fileio.write_bowtie(classes, period_dir / "bowtie.csv")
    row["gwcc"] = classes.gwcc_size
    for cls in ("GSCC", "IN", "OUT", "TE"):
        row[cls.lower()] = classes.component_counts[cls]

    g = hodge_mod.net_flow(core, args.weight or "frequency")
    result = hodge_mod.hodge_decompose(g)
    fileio.write_hodge(result, classes, period_dir / "hodge.csv")
    fileio.write_flow_edges(g, result.F_grad, period_dir / "gradient.csv")
    fileio.write_flow_edges(g, result.F_circ, period_dir / "circular.csv")

    model = None
    X, _ = net_mod.export_adjacency(core, args.weight or "frequency")
    k = min(args.k if args.k is not None else 13, core.n_nodes)
    if k >= 1:
        model = nmf_mod.nmf_fit(
            X,
            k,
            seed=args.seed if args.seed is not None else 0,
            jitter=args.jitter if args.jitter is not None else 0.0,
            row_labels=core.nodes,
            col_labels=core.nodes,
        )
        fileio.write_nmf_model(
            model,
            period_dir / "S.csv",
            period_dir / "D.csv",
            period_dir / "nmf_summary.json",
        )
        row["nmf_k"] = model.K
        row["nmf_kl"] = model.kl_final
    return row, snapshot, classes, model


def cmd_analyze(args) -> int:
    _require(args, "input", "out", "from_month", "to_month")
    out = _out_dir(args)
    records = list(read_records(args.input, strict=bool(args.strict)))
    clustering = _load_clustering(args, records)
    transfers = list(net_mod.resolve_transfers(records, clustering))

    rows = []
    failures = []
    prev_snapshot = None
    prev_analysis = None  # (label, classes, model) of the last analyzed period
    for period in iter_months(args.from_month, args.to_month):
        label = period.label()
        try:
            row, snapshot, classes, model = _analyze_period(
                period, transfers, args, out
            )
        except FlowError as exc:
            failures.append(label)
            log.error("period %s failed: %s", label, exc)
            prev_snapshot = None
            prev_analysis = None
            continue
        if prev_snapshot is not None:
            overlap = net_mod.snapshot_overlap(prev_snapshot, snapshot)
            row["common_nodes_prev"] = overlap["common_nodes"]
            row["common_edges_prev"] = overlap["common_edges"]
        if prev_analysis is not None and classes is not None:
            prev_label, prev_classes, prev_model = prev_analysis
            table = bowtie_mod.transitions(prev_classes, classes)
            fileio.write_transition(
                table, out / f"transition_{prev_label}_{label}.csv"
            )
            if prev_model is not None and model is not None:
                sims = nmf_mod.cosine_similarity_matrix(prev_model, model, "D")
                fileio.write_similarity(
                    sims, out / f"similarity_{prev_label}_{label}.csv"
                )
        rows.append(row)
        prev_snapshot = snapshot
        prev_analysis = (label, classes, model) if classes is not None else None

    _write_summary_rows(rows, out / "summary.csv")
    _print_json({"periods": [r["period"] for r in rows], "failed": failures})
    return 1 if failures else 0


_SUMMARY_COLUMNS = [
    "period", "n_nodes", "n_edges", "n_self_loops", "n_regular",
    "gwcc", "gscc", "in", "out", "te",
    "common_nodes_prev", "common_edges_prev", "nmf_k", "nmf_kl",
]


def _write_summary_rows(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SUMMARY_COLUMNS)
        for row in rows:
            out_row = []
            for col in _SUMMARY_COLUMNS:
                value = row.get(col, "")
                if isinstance(value, float):
                    value = fileio.fmt(value)
                out_row.append(value)
            writer.writerow(out_row)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cryptoflow",
        description="Flow-network reconstruction and decomposition pipeline",
    )
    parser.add_argument(
        "--backend-info", action="store_true",
        help="print the active kernel backend and exit",
    )
    sub = parser.add_subparsers(dest="command")

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", help="key = value option file; flags override")
        p.add_argument("--input")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--strict", action="store_true", default=None,
                       help="fail on the first malformed record")
        return p

    add("cluster", help="cluster addresses into users")

    p = add("aggregate", help="build per-period snapshots")
    p.add_argument("--clustering", help="reuse an exported clustering")
    p.add_argument("--from", dest="from_month", metavar="YYYY-MM")
    p.add_argument("--to", dest="to_month", metavar="YYYY-MM")
    p.add_argument("--scale", choices=("month", "day"))

    p = add("bowtie", help="bow-tie decomposition of a snapshot")
    p.add_argument("--nodes", help="node order file for the edge list")

    p = add("hodge", help="potential/circular decomposition of a snapshot")
    p.add_argument("--nodes")
    p.add_argument("--weight", choices=("frequency", "amount"))

    p = add("nmf", help="factorize a snapshot or matrix")
    p.add_argument("--nodes")
    p.add_argument("--weight", choices=("frequency", "amount"))
    p.add_argument("--k", type=int)
    p.add_argument("--jitter", type=float)

    p = add("select-k", help="choose the component count by coherence")
    p.add_argument("--nodes")
    p.add_argument("--weight", choices=("frequency", "amount"))
    p.add_argument("--k-range", dest="k_range", metavar="A..B")
    p.add_argument("--runs", type=int)
    p.add_argument("--jitter", type=float)

    p = add("analyze", help="full monthly pipeline over a record file")
    p.add_argument("--clustering")
    p.add_argument("--from", dest="from_month", metavar="YYYY-MM")
    p.add_argument("--to", dest="to_month", metavar="YYYY-MM")
    p.add_argument("--scale", choices=("month", "day"))
    p.add_argument("--weight", choices=("frequency", "amount"))
    p.add_argument("--k", type=int)
    p.add_argument("--jitter", type=float)

    p = add("synth", help="generate a synthetic ground-truth corpus")
    p.add_argument("--k", type=int, help="true component count")
    p.add_argument("--docs", type=int)
    p.add_argument("--vocab", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--doc-length", dest="doc_length", type=int)

    return parser


_COMMANDS = {
    "cluster": cmd_cluster,
    "aggregate": cmd_aggregate,
    "bowtie": cmd_bowtie,
    "hodge": cmd_hodge,
    "nmf": cmd_nmf,
    "select-k": cmd_select_k,
    "analyze": cmd_analyze,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend_info:
        _print_json({"backend": _kernels.BACKEND})
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    try:
        _apply_config(args)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (FlowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
