"""Shared builders for the test suite."""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from cryptoflow import FlowNetwork, Period, TransferRecord, UserTransfer

DATA_DIR = Path(__file__).resolve().parent / "data"
FIXTURE = DATA_DIR / "two_month.jsonl"


def utc(*args) -> datetime:
    return datetime(*args, tzinfo=timezone.utc)


SEPT = Period(utc(2019, 9, 1), utc(2019, 10, 1))
NOON = utc(2019, 9, 15, 12, 0, 0)


def record(tx_id, inputs, outputs, when=NOON) -> TransferRecord:
    """Build a record from (address, satoshis) output pairs."""
    return TransferRecord(tx_id, tuple(inputs), tuple(outputs), when)


def transfer(source, destination, sats=100, when=NOON) -> UserTransfer:
    return UserTransfer(source, destination, sats, when)


def snapshot(edges, nodes=None, period=None, self_loops_removed=False) -> FlowNetwork:
    """Build a snapshot from {(i, j): (f, g)} or {(i, j): f} edges."""
    fixed = {
        k: (v if isinstance(v, tuple) else (int(v), 0)) for k, v in edges.items()
    }
    found = {u for ij in fixed for u in ij}
    return FlowNetwork(
        period=period,
        nodes=tuple(sorted(found | set(nodes or ()))),
        edges=fixed,
        self_loops_removed=self_loops_removed,
    )


def random_digraph(rng, n, p, allow_self_loops=False):
    """Random directed graph as a snapshot with unit frequencies."""
    names = [f"n{i:03d}" for i in range(n)]
    edges = {}
    for i in range(n):
        for j in range(n):
            if i == j and not allow_self_loops:
                continue
            if rng.random() < p:
                edges[(names[i], names[j])] = (int(rng.integers(1, 6)), int(rng.integers(10**6)))
    return FlowNetwork(
        period=None,
        nodes=tuple(names),
        edges=edges,
        self_loops_removed=not allow_self_loops,
    )


def random_counts(rng, n, m, density=0.3, high=40) -> np.ndarray:
    """Sparse random non-negative integer count matrix with no zero total."""
    X = np.where(rng.random((n, m)) < density, rng.integers(1, high, (n, m)), 0)
    X = X.astype(float)
    if X.sum() == 0:
        X[0, 0] = 1.0
    return X
