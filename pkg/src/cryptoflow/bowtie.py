"""Bow-tie decomposition of flow snapshots.

The largest weakly connected component (GWCC) splits into the largest
strongly connected component (GSCC), the nodes that can reach it (IN),
the nodes it can reach (OUT), and the remaining tendrils (TE); nodes
outside the GWCC are DISCONNECTED.  Only binary adjacency matters —
edge weights never change the classes.  All ties (equal-size weak or
strong components) break toward the component containing the smallest
node-id, so results are deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import DataError
from .network import FlowNetwork, Period

GSCC = "GSCC"
IN = "IN"
OUT = "OUT"
TE = "TE"
DISCONNECTED = "DISCONNECTED"

CLASSES = (GSCC, IN, OUT, TE, DISCONNECTED)


@dataclass(frozen=True)
class BowTieResult:
    """Class per node, class sizes, and the weak-component count."""

    assignment: dict[str, str]
    component_counts: dict[str, int]
    n_weak_components: int
    period: Period | None = None

    def members(self, cls: str) -> list[str]:
        return sorted(u for u, c in self.assignment.items() if c == cls)

    @property
    def gwcc_size(self) -> int:
        return sum(self.component_counts[c] for c in (GSCC, IN, OUT, TE))


@dataclass(frozen=True)
class TransitionTable:
    """Class-to-class node counts between two snapshots.

    ``counts[a][b]`` is the number of common nodes classified ``a``
    before and ``b`` after; nodes present on only one side are tallied
    in ``entered`` / ``exited``.
    """

    from_period: str | None
    to_period: str | None
    counts: dict[str, dict[str, int]]
    entered: int
    exited: int


def _tarjan_sccs(n: int, adj: list[list[int]]) -> list[list[int]]:
    """Strongly connected components, iteratively (no recursion limit)."""
    index_of = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index_of[root] != -1:
            continue
        index_of[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        work = [(root, iter(adj[root]))]
        while work:
            v, neighbors = work[-1]
            advanced = False
            for w in neighbors:
                if index_of[w] == -1:
                    index_of[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(adj[w])))
                    advanced = True
                    break
                if on_stack[w] and index_of[w] < low[v]:
                    low[v] = index_of[w]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == index_of[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def _weak_components(n: int, adj: list[list[int]], radj: list[list[int]]):
    comp = [-1] * n
    comps: list[list[int]] = []
    for start in range(n):
        if comp[start] != -1:
            continue
        cid = len(comps)
        comp[start] = cid
        queue = deque([start])
        members = [start]
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if comp[w] == -1:
                    comp[w] = cid
                    members.append(w)
                    queue.append(w)
            for w in radj[v]:
                if comp[w] == -1:
                    comp[w] = cid
                    members.append(w)
                    queue.append(w)
        comps.append(members)
    return comps


def _bfs_closure(seeds: list[int], adj: list[list[int]]) -> set[int]:
    reached = set(seeds)
    queue = deque(seeds)
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in reached:
                reached.add(w)
                queue.append(w)
    return reached


def bowtie_decompose(network: FlowNetwork) -> BowTieResult:
    """Classify every node as GSCC/IN/OUT/TE/DISCONNECTED.

    Requires a snapshot with self-loops already removed.  An empty
    snapshot yields an empty assignment.
    """
    if not network.self_loops_removed:
        raise DataError("bow-tie decomposition requires self-loops removed")
    n = network.n_nodes
    if n == 0:
        return BowTieResult(
            assignment={},
            component_counts={c: 0 for c in CLASSES},
            n_weak_components=0,
            period=network.period,
        )
    index = network.node_index()
    adj: list[list[int]] = [[] for _ in range(n)]
    radj: list[list[int]] = [[] for _ in range(n)]
    for i, j in network.edges:
        adj[index[i]].append(index[j])
        radj[index[j]].append(index[i])

    # nodes are sorted, so min(indices) is the lexicographically smallest id
    weak = _weak_components(n, adj, radj)
    gwcc = min(weak, key=lambda c: (-len(c), min(c)))
    gwcc_set = set(gwcc)

    sccs = [c for c in _tarjan_sccs(n, adj) if c[0] in gwcc_set]
    gscc = set(min(sccs, key=lambda c: (-len(c), min(c))))

    reach = _bfs_closure(sorted(gscc), adj)
    coreach = _bfs_closure(sorted(gscc), radj)

    assignment: dict[str, str] = {}
    for u, i in index.items():
        if i not in gwcc_set:
            assignment[u] = DISCONNECTED
        elif i in gscc:
            assignment[u] = GSCC
        elif i in coreach:
            assignment[u] = IN
        elif i in reach:
            assignment[u] = OUT
        else:
            assignment[u] = TE
    counts = {c: 0 for c in CLASSES}
    for c in assignment.values():
        counts[c] += 1
    return BowTieResult(
        assignment=assignment,
        component_counts=counts,
        n_weak_components=len(weak),
        period=network.period,
    )


def transitions(a: BowTieResult, b: BowTieResult) -> TransitionTable:
    """Count class movements over the nodes common to both results."""
    counts = {ca: {cb: 0 for cb in CLASSES} for ca in CLASSES}
    common = a.assignment.keys() & b.assignment.keys()
    for u in common:
        counts[a.assignment[u]][b.assignment[u]] += 1
    return TransitionTable(
        from_period=a.period.label() if a.period else None,
        to_period=b.period.label() if b.period else None,
        counts=counts,
        entered=len(b.assignment.keys() - a.assignment.keys()),
        exited=len(a.assignment.keys() - b.assignment.keys()),
    )
