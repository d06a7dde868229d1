"""User-level transfers and aggregated flow snapshots.

Records resolve to one transfer per (input user, output address); a
snapshot aggregates transfers over a period into a weighted digraph
with per-edge frequency ``f_ij`` and amount ``g_ij``.  Amounts stay in
integer satoshis so sums are exact.  Node order inside a snapshot is
lexicographic and shared by every export.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Iterator

import numpy as np

from .clustering import UserClustering
from .errors import DataError
from .records import TransferRecord

log = logging.getLogger(__name__)

DENSE_EXPORT_LIMIT = 5000


@dataclass(frozen=True)
class Period:
    """Half-open UTC interval [start, end)."""

    start: datetime
    end: datetime

    def __post_init__(self):
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise DataError("period bounds must be timezone-aware")
        if not self.start < self.end:
            raise DataError(f"empty period {self.start}..{self.end}")

    def __contains__(self, ts: datetime) -> bool:
        return self.start <= ts < self.end

    def days(self) -> list[date]:
        """UTC calendar days the period intersects."""
        out = []
        d = self.start.astimezone(timezone.utc).date()
        last = (self.end.astimezone(timezone.utc) - timedelta(microseconds=1)).date()
        while d <= last:
            out.append(d)
            d += timedelta(days=1)
        return out

    def label(self) -> str:
        s = self.start.astimezone(timezone.utc)
        if (s.day, s.hour, s.minute, s.second) == (1, 0, 0, 0):
            return f"{s.year:04d}-{s.month:02d}"
        return s.strftime("%Y-%m-%dT%H:%M:%SZ")


def month_period(year: int, month: int) -> Period:
    start = datetime(year, month, 1, tzinfo=timezone.utc)
    if month == 12:
        end = datetime(year + 1, 1, 1, tzinfo=timezone.utc)
    else:
        end = datetime(year, month + 1, 1, tzinfo=timezone.utc)
    return Period(start, end)


def parse_month(text: str) -> tuple[int, int]:
    try:
        year_s, month_s = text.strip().split("-")
        year, month = int(year_s), int(month_s)
    except ValueError:
        raise DataError(f"invalid month {text!r} (expected YYYY-MM)") from None
    if not 1 <= month <= 12:
        raise DataError(f"invalid month {text!r} (expected YYYY-MM)")
    return year, month


def iter_months(from_month: str, to_month: str) -> Iterator[Period]:
    """Calendar-month periods from ``from_month`` to ``to_month`` inclusive."""
    y, m = parse_month(from_month)
    y_end, m_end = parse_month(to_month)
    if (y, m) > (y_end, m_end):
        raise DataError(f"month range {from_month}..{to_month} is reversed")
    while (y, m) <= (y_end, m_end):
        yield month_period(y, m)
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)


def _check_alignment(period: Period, time_scale: str):
    s = period.start.astimezone(timezone.utc)
    e = period.end.astimezone(timezone.utc)
    if time_scale == "month":
        ok = all(
            (t.day, t.hour, t.minute, t.second, t.microsecond) == (1, 0, 0, 0, 0)
            for t in (s, e)
        )
    elif time_scale == "day":
        ok = all(
            (t.hour, t.minute, t.second, t.microsecond) == (0, 0, 0, 0)
            for t in (s, e)
        )
    else:
        raise DataError(f"unsupported time scale {time_scale!r}")
    if not ok:
        raise DataError(
            f"period {period.start}..{period.end} is not aligned to {time_scale}s"
        )


@dataclass(frozen=True)
class UserTransfer:
    """One user-level flow: source user, destination user, satoshis, time."""

    source: str
    destination: str
    sats: int
    timestamp: datetime

    @property
    def is_self_loop(self) -> bool:
        return self.source == self.destination


@dataclass(frozen=True)
class FlowNetwork:
    """Aggregated snapshot: directed edges with frequency and amount.

    ``edges`` maps ``(source, destination)`` to ``(f, g_sats)``; nodes
    are lexicographically ordered and every edge endpoint appears in
    ``nodes``.  Treat instances as immutable.
    """

    period: Period | None
    nodes: tuple[str, ...]
    edges: dict[tuple[str, str], tuple[int, int]]
    self_loops_removed: bool = False

    def __post_init__(self):
        node_set = set(self.nodes)
        for (i, j), (f, g) in self.edges.items():
            if i not in node_set or j not in node_set:
                raise DataError(f"edge ({i}, {j}) endpoint missing from nodes")
            if f < 1 or g < 0:
                raise DataError(f"edge ({i}, {j}) has invalid weights f={f}, g={g}")
            if self.self_loops_removed and i == j:
                raise DataError(f"self-loop ({i}, {i}) present but flagged removed")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def node_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.nodes)}

    def out_neighbors(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {u: [] for u in self.nodes}
        for i, j in self.edges:
            adj[i].append(j)
        return adj

    def in_neighbors(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {u: [] for u in self.nodes}
        for i, j in self.edges:
            adj[j].append(i)
        return adj


def resolve_transfers(
    records: Iterable[TransferRecord],
    clustering: UserClustering,
    rejected: list[str] | None = None,
) -> Iterator[UserTransfer]:
    """Convert records to user-level transfers, one per output.

    All inputs of a record must resolve to a single user (the
    clustering guarantees this when built from the same records); a
    record whose inputs span several users is rejected and counted,
    never silently emitted.  Unknown addresses raise.
    """
    n_rejected = 0
    for rec in records:
        users = set()
        for addr in rec.inputs:
            user = clustering.address_to_user.get(addr)
            if user is None:
                raise DataError(f"tx {rec.tx_id}: address {addr!r} not in clustering")
            users.add(user)
        if len(users) > 1:
            n_rejected += 1
            if rejected is not None:
                rejected.append(rec.tx_id)
            log.warning(
                "tx %s: inputs span %d users, record rejected", rec.tx_id, len(users)
            )
            continue
        source = users.pop()
        for addr, sats in rec.outputs:
            dest = clustering.address_to_user.get(addr)
            if dest is None:
                raise DataError(f"tx {rec.tx_id}: address {addr!r} not in clustering")
            yield UserTransfer(source, dest, sats, rec.timestamp)
    if n_rejected:
        log.warning("rejected %d records with multi-user inputs", n_rejected)


def aggregate(
    transfers: Iterable[UserTransfer],
    period: Period,
    time_scale: str = "month",
) -> FlowNetwork:
    """Aggregate transfers in a period into a snapshot.

    f_ij counts transfers i→j, g_ij sums their amounts; self-loops are
    retained.  Transfers outside the period are ignored.
    """
    _check_alignment(period, time_scale)
    edges: dict[tuple[str, str], list[int]] = {}
    nodes: set[str] = set()
    for t in transfers:
        if t.timestamp not in period:
            continue
        key = (t.source, t.destination)
        cell = edges.get(key)
        if cell is None:
            edges[key] = [1, t.sats]
            nodes.add(t.source)
            nodes.add(t.destination)
        else:
            cell[0] += 1
            cell[1] += t.sats
    return FlowNetwork(
        period=period,
        nodes=tuple(sorted(nodes)),
        edges={k: (f, g) for k, (f, g) in edges.items()},
        self_loops_removed=False,
    )


def select_regular_users(
    transfers: Iterable[UserTransfer], period: Period
) -> set[str]:
    """Users touched by a non-self-loop transfer on every UTC day of the period."""
    needed = period.days()
    if not needed:
        raise DataError("period spans no full UTC day")
    required = len(needed)
    first = needed[0]
    seen: dict[str, set[int]] = {}
    for t in transfers:
        if t.is_self_loop or t.timestamp not in period:
            continue
        day = (t.timestamp.astimezone(timezone.utc).date() - first).days
        seen.setdefault(t.source, set()).add(day)
        seen.setdefault(t.destination, set()).add(day)
    return {u for u, days in seen.items() if len(days) == required}


def restrict(
    network: FlowNetwork, users: Iterable[str], drop_self_loops: bool
) -> FlowNetwork:
    """Induced subgraph on ``users`` (intersected with the node set)."""
    keep = set(users) & set(network.nodes)
    edges = {
        (i, j): w
        for (i, j), w in network.edges.items()
        if i in keep and j in keep and not (drop_self_loops and i == j)
    }
    return FlowNetwork(
        period=network.period,
        nodes=tuple(sorted(keep)),
        edges=edges,
        self_loops_removed=network.self_loops_removed or drop_self_loops,
    )


@dataclass(frozen=True)
class ActivityProfile:
    """Per-hour (UTC) transfer counts for one user."""

    user_id: str
    out_counts: tuple[int, ...]
    in_counts: tuple[int, ...]
    self_counts: tuple[int, ...]

    def total(self) -> tuple[int, ...]:
        return tuple(
            o + i + s
            for o, i, s in zip(self.out_counts, self.in_counts, self.self_counts)
        )

    @property
    def peak_hour(self) -> int:
        total = self.total()
        best = max(total)
        return total.index(best)


def activity_profiles(
    transfers: Iterable[UserTransfer], users: Iterable[str]
) -> list[ActivityProfile]:
    """24-bin UTC activity histograms for the listed users, in list order."""
    order = list(users)
    wanted = set(order)
    out = {u: [0] * 24 for u in wanted}
    inn = {u: [0] * 24 for u in wanted}
    self_ = {u: [0] * 24 for u in wanted}
    for t in transfers:
        hour = t.timestamp.astimezone(timezone.utc).hour
        if t.is_self_loop:
            if t.source in wanted:
                self_[t.source][hour] += 1
            continue
        if t.source in wanted:
            out[t.source][hour] += 1
        if t.destination in wanted:
            inn[t.destination][hour] += 1
    return [
        ActivityProfile(u, tuple(out[u]), tuple(inn[u]), tuple(self_[u]))
        for u in order
    ]


def export_adjacency(
    network: FlowNetwork,
    weight: str = "frequency",
    dense_limit: int = DENSE_EXPORT_LIMIT,
) -> tuple[np.ndarray, dict[str, int]]:
    """Dense weighted adjacency matrix in snapshot node order.

    ``weight`` selects frequencies or amounts (amounts in BTC).  Guards
    against accidental huge dense allocations.
    """
    if weight not in ("frequency", "amount"):
        raise DataError(f"unknown weight source {weight!r}")
    n = network.n_nodes
    if n > dense_limit:
        raise DataError(
            f"{n} nodes exceeds dense export limit {dense_limit}; "
            "use the edge-list export instead"
        )
    index = network.node_index()
    X = np.zeros((n, n))
    for (i, j), (f, g) in network.edges.items():
        X[index[i], index[j]] = f if weight == "frequency" else g / 10**8
    return X, index


def snapshot_overlap(a: FlowNetwork, b: FlowNetwork) -> dict[str, int]:
    """Node and edge sets shared by two snapshots (order-symmetric)."""
    common_nodes = set(a.nodes) & set(b.nodes)
    common_edges = set(a.edges) & set(b.edges)
    return {"common_nodes": len(common_nodes), "common_edges": len(common_edges)}
