"""CSV/JSON interchange for every pipeline stage.

All floats are printed with 12 significant digits and all row orders
are fixed (node order, sorted edge keys, component order), so reruns
with identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .bowtie import CLASSES, BowTieResult, TransitionTable
from .clustering import UserClustering
from .errors import DataError
from .hodge import HodgeResult, NetFlowGraph
from .modelsel import CoherenceReport, SyntheticCorpus
from .network import FlowNetwork
from .nmf import NmfModel, ihh, normalize
from .records import format_btc, parse_btc


def fmt(x) -> str:
    """12-significant-digit rendering used by every float column."""
    return format(float(x), ".12g")


def _json_ready(obj):
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(fmt(float(obj)))
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    return obj


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_ready(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- clustering ------------------------------------------------------------

def write_clustering(clustering: UserClustering, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["address", "user_id", "user_type"])
        for addr in sorted(clustering.address_to_user):
            uid = clustering.address_to_user[addr]
            writer.writerow([addr, uid, clustering.user_type[uid]])


def read_clustering(path) -> UserClustering:
    address_to_user: dict[str, str] = {}
    user_type: dict[str, str] = {}
    user_size: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            addr, uid, kind = row["address"], row["user_id"], row["user_type"]
            if addr in address_to_user:
                raise DataError(f"address {addr} listed twice in {path}")
            address_to_user[addr] = uid
            if user_type.setdefault(uid, kind) != kind:
                raise DataError(f"user {uid} has conflicting types in {path}")
            user_size[uid] = user_size.get(uid, 0) + 1
    return UserClustering(address_to_user, user_type, user_size)


def write_rank_size(pairs, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "size"])
        writer.writerows(pairs)


# -- snapshots -------------------------------------------------------------

def write_network(network: FlowNetwork, edges_path, nodes_path):
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id"])
        for u in network.nodes:
            writer.writerow([u])
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "destination", "frequency", "amount"])
        for (i, j) in sorted(network.edges):
            f, g = network.edges[(i, j)]
            writer.writerow([i, j, f, format_btc(g)])


def read_network(edges_path, nodes_path=None) -> FlowNetwork:
    """Load a snapshot from its edge list (plus optional node file).

    The period is not stored in the files; the loaded snapshot carries
    none and is flagged as possibly containing self-loops.
    """
    nodes: list[str] = []
    if nodes_path is not None and Path(nodes_path).exists():
        with open(nodes_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            nodes = [row["user_id"] for row in reader]
    edges: dict[tuple[str, str], tuple[int, int]] = {}
    seen: set[str] = set(nodes)
    with open(edges_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"source", "destination", "frequency", "amount"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"edge list missing columns {sorted(missing)}")
        for row_no, row in enumerate(reader, start=2):
            key = (row["source"], row["destination"])
            if key in edges:
                raise DataError(f"duplicate edge {key} (row {row_no})")
            try:
                f = int(row["frequency"])
            except ValueError:
                raise DataError(
                    f"bad frequency {row['frequency']!r} (row {row_no})"
                ) from None
            edges[key] = (f, parse_btc(row["amount"]))
            seen.add(key[0])
            seen.add(key[1])
    if not nodes:
        nodes = sorted(seen)
    return FlowNetwork(
        period=None, nodes=tuple(nodes), edges=edges, self_loops_removed=False
    )


# -- dense matrices --------------------------------------------------------

def write_matrix(matrix: np.ndarray, row_labels, col_labels, path):
    """CSV grid: first row column labels, first column row labels."""
    matrix = np.asarray(matrix)
    if matrix.shape != (len(row_labels), len(col_labels)):
        raise DataError("matrix shape does not match the labels")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(col_labels))
        for label, row in zip(row_labels, matrix):
            writer.writerow([label] + [fmt(v) for v in row])


def read_matrix(path) -> tuple[np.ndarray, list[str], list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty matrix file {path}") from None
        col_labels = header[1:]
        row_labels: list[str] = []
        rows: list[list[float]] = []
        for row in reader:
            if not row:
                continue
            row_labels.append(row[0])
            if len(row) != len(col_labels) + 1:
                raise DataError(f"ragged matrix row {row[0]!r} in {path}")
            rows.append([float(v) for v in row[1:]])
    return np.asarray(rows, dtype=np.float64), row_labels, col_labels


# -- bow-tie ---------------------------------------------------------------

def write_bowtie(result: BowTieResult, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "class"])
        for u in sorted(result.assignment):
            writer.writerow([u, result.assignment[u]])


def bowtie_summary(result: BowTieResult) -> dict:
    return {
        "period": result.period.label() if result.period else None,
        "n_nodes": len(result.assignment),
        "n_weak_components": result.n_weak_components,
        "gwcc": result.gwcc_size,
        "counts": dict(result.component_counts),
    }


def write_transition(table: TransitionTable, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["from\\to"] + list(CLASSES))
        for a in CLASSES:
            writer.writerow([a] + [table.counts[a][b] for b in CLASSES])
        writer.writerow(["entered", table.entered])
        writer.writerow(["exited", table.exited])


# -- potentials ------------------------------------------------------------

def write_hodge(result: HodgeResult, bowtie: BowTieResult | None, path):
    classes = bowtie.assignment if bowtie else {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "potential", "class"])
        for u in result.nodes:
            writer.writerow([u, fmt(result.phi[u]), classes.get(u, "")])


def write_flow_edges(g: NetFlowGraph, flow: np.ndarray, path):
    """Signed flow per linked pair, one row per unordered pair (i < j)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "destination", "flow"])
        n = len(g.nodes)
        for i in range(n):
            for j in range(i + 1, n):
                if g.w[i, j] > 0:
                    writer.writerow([g.nodes[i], g.nodes[j], fmt(flow[i, j])])


# -- factor models ---------------------------------------------------------

def nmf_summary(model: NmfModel) -> dict:
    S_tilde, D_tilde, r = normalize(model)
    return {
        "K": model.K,
        "r": [float(v) for v in r],
        "ihh_src": [ihh(S_tilde[:, k]) for k in range(model.K)],
        "ihh_dest": [ihh(D_tilde[k, :]) for k in range(model.K)],
        "kl_final": model.kl_final,
        "seed": model.seed,
        "iterations": model.iterations,
    }


def write_nmf_model(model: NmfModel, s_path, d_path, summary_path):
    S_tilde, D_tilde, _ = normalize(model)
    comp_labels = [f"c{k}" for k in range(1, model.K + 1)]
    with open(s_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id"] + comp_labels)
        for s, u in enumerate(model.row_labels):
            writer.writerow([u] + [fmt(v) for v in S_tilde[s, :]])
    with open(d_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component"] + list(model.col_labels))
        for k, label in enumerate(comp_labels):
            writer.writerow([label] + [fmt(v) for v in D_tilde[k, :]])
    write_json(nmf_summary(model), summary_path)


def write_similarity(matrix: np.ndarray, path):
    matrix = np.asarray(matrix)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + [f"c{l}" for l in range(1, matrix.shape[1] + 1)])
        for k in range(matrix.shape[0]):
            writer.writerow([f"c{k + 1}"] + [fmt(v) for v in matrix[k]])


# -- model selection -------------------------------------------------------

def write_coherence_report(report: CoherenceReport, csv_path, json_path):
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "k", "mean", "se", "scaled"])
        for name in sorted(report.curves):
            curve = report.curves[name]
            for i, k in enumerate(report.k_values):
                writer.writerow(
                    [name, k, fmt(curve.mean[i]), fmt(curve.se[i]),
                     fmt(curve.scaled[i])]
                )
    write_json(
        {
            "k_values": list(report.k_values),
            "runs_per_k": report.runs_per_k,
            "chosen_k": {n: c.chosen_k for n, c in report.curves.items()},
            "constant_metrics": sorted(
                n for n, c in report.curves.items() if c.constant
            ),
            "consensus_k": report.consensus_k,
            "failures": [list(f) for f in report.failures],
        },
        json_path,
    )


def write_corpus(corpus: SyntheticCorpus, path):
    """Count matrix in the shared grid format (docs × terms)."""
    rows = [f"d{d}" for d in range(corpus.counts.shape[0])]
    cols = [f"v{v}" for v in range(corpus.counts.shape[1])]
    write_matrix(corpus.counts, rows, cols, path)
