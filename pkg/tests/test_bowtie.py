"""Bow-tie classification against a transitive-closure oracle."""

import numpy as np
import pytest

from cryptoflow import DataError, bowtie_decompose, transitions
from cryptoflow.bowtie import CLASSES, DISCONNECTED, GSCC, IN, OUT, TE

from helpers import random_digraph, snapshot


def reachability(n, pairs):
    """Reflexive transitive closure by Floyd–Warshall on booleans."""
    R = np.eye(n, dtype=bool)
    for i, j in pairs:
        R[i, j] = True
    for k in range(n):
        R |= R[:, k : k + 1] & R[k : k + 1, :]
    return R


def oracle_bowtie(network):
    """Classify nodes straight from the closure matrices."""
    nodes = network.nodes
    n = len(nodes)
    index = {u: i for i, u in enumerate(nodes)}
    pairs = [(index[i], index[j]) for i, j in network.edges]
    R = reachability(n, pairs)

    undirected = R | R.T
    U = reachability(n, zip(*np.nonzero(undirected))) if n else np.eye(0, dtype=bool)
    weak = {}
    for i in range(n):
        weak.setdefault(frozenset(np.flatnonzero(U[i]).tolist()), set()).add(i)
    weak_comps = [set(c) for c in weak]
    gwcc = min(weak_comps, key=lambda c: (-len(c), min(c)))

    sccs = {}
    for i in gwcc:
        sccs.setdefault(frozenset(np.flatnonzero(R[i] & R[:, i]).tolist()), set()).add(i)
    gscc = set(min(sccs.values(), key=lambda c: (-len(c), min(c))))

    assignment = {}
    for u, i in index.items():
        if i not in gwcc:
            assignment[u] = DISCONNECTED
        elif i in gscc:
            assignment[u] = GSCC
        elif any(R[i, s] for s in gscc):
            assignment[u] = IN
        elif any(R[s, i] for s in gscc):
            assignment[u] = OUT
        else:
            assignment[u] = TE
    return assignment, len(weak_comps)


class TestKnownShapes:
    def test_classic_bow_tie(self):
        net = snapshot(
            {
                ("in1", "core1"): 1,
                ("core1", "core2"): 1,
                ("core2", "core3"): 1,
                ("core3", "core1"): 1,
                ("core2", "out1"): 1,
                ("in1", "tendril1"): 1,
                ("lost1", "lost2"): 1,
            },
            self_loops_removed=True,
        )
        got = bowtie_decompose(net)
        assert got.assignment == {
            "core1": GSCC,
            "core2": GSCC,
            "core3": GSCC,
            "in1": IN,
            "out1": OUT,
            "tendril1": TE,
            "lost1": DISCONNECTED,
            "lost2": DISCONNECTED,
        }
        assert got.component_counts == {GSCC: 3, IN: 1, OUT: 1, TE: 1, DISCONNECTED: 2}
        assert got.n_weak_components == 2
        assert got.gwcc_size == 6
        assert got.members(GSCC) == ["core1", "core2", "core3"]

    def test_single_node(self):
        net = snapshot({}, nodes=("only",), self_loops_removed=True)
        got = bowtie_decompose(net)
        assert got.assignment == {"only": GSCC}

    def test_empty(self):
        net = snapshot({}, self_loops_removed=True)
        got = bowtie_decompose(net)
        assert got.assignment == {}
        assert got.n_weak_components == 0
        assert got.gwcc_size == 0

    def test_requires_self_loops_removed(self):
        with pytest.raises(DataError, match="self-loops removed"):
            bowtie_decompose(snapshot({("a", "b"): 1}))

    def test_weights_never_matter(self):
        light = snapshot({("a", "b"): (1, 0)}, self_loops_removed=True)
        heavy = snapshot({("a", "b"): (999, 10**12)}, self_loops_removed=True)
        assert bowtie_decompose(light).assignment == bowtie_decompose(heavy).assignment


class TestTieBreaks:
    def test_equal_weak_components_pick_smallest_node_id(self):
        net = snapshot(
            {("z1", "z2"): 1, ("a1", "a2"): 1}, self_loops_removed=True
        )
        got = bowtie_decompose(net)
        assert got.assignment["a1"] in (GSCC, IN, OUT, TE)
        assert got.assignment["z1"] == DISCONNECTED

    def test_equal_sccs_pick_smallest_node_id(self):
        # two 2-cycles joined by one edge: equal SCC sizes, one GWCC
        net = snapshot(
            {
                ("m1", "m2"): 1,
                ("m2", "m1"): 1,
                ("b1", "b2"): 1,
                ("b2", "b1"): 1,
                ("m1", "b1"): 1,
            },
            self_loops_removed=True,
        )
        got = bowtie_decompose(net)
        assert got.assignment["b1"] == GSCC
        assert got.assignment["b2"] == GSCC
        assert got.assignment["m1"] == IN
        assert got.assignment["m2"] == IN


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(40))
    def test_random_digraphs(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 50))
        p = float(rng.uniform(0.05, 0.3))
        net = random_digraph(rng, n, p)
        got = bowtie_decompose(net)
        want_assignment, want_weak = oracle_bowtie(net)
        assert got.assignment == want_assignment
        assert got.n_weak_components == want_weak

    @pytest.mark.parametrize("seed", range(5))
    def test_classes_partition_the_nodes(self, seed):
        rng = np.random.default_rng(100 + seed)
        net = random_digraph(rng, 30, 0.1)
        got = bowtie_decompose(net)
        assert sum(got.component_counts.values()) == net.n_nodes
        assert set(got.component_counts) == set(CLASSES)

    def test_deep_recursion_safe(self):
        # a long path stresses the iterative strong-component traversal
        names = [f"n{i:05d}" for i in range(3000)]
        edges = {(names[i], names[i + 1]): (1, 0) for i in range(2999)}
        net = snapshot(edges, self_loops_removed=True)
        got = bowtie_decompose(net)
        assert got.assignment[names[0]] == GSCC  # every SCC is a singleton
        assert got.n_weak_components == 1


class TestTransitions:
    def test_counts_movements(self):
        before = bowtie_decompose(
            snapshot(
                {("a", "b"): 1, ("b", "a"): 1, ("a", "c"): 1},
                self_loops_removed=True,
            )
        )
        after = bowtie_decompose(
            snapshot(
                {("b", "c"): 1, ("c", "b"): 1, ("d", "b"): 1},
                self_loops_removed=True,
            )
        )
        table = transitions(before, after)
        assert table.counts[GSCC][GSCC] == 1  # b stays core
        assert table.counts[OUT][GSCC] == 1  # c joins the core
        assert table.counts[GSCC][DISCONNECTED] == 0
        assert table.entered == 1  # d
        assert table.exited == 1  # a
        assert sum(sum(row.values()) for row in table.counts.values()) == 2

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(77)
        before = bowtie_decompose(random_digraph(rng, 25, 0.12))
        after = bowtie_decompose(random_digraph(rng, 25, 0.12))
        table = transitions(before, after)
        for ca in CLASSES:
            for cb in CLASSES:
                want = sum(
                    1
                    for u in before.assignment
                    if u in after.assignment
                    and before.assignment[u] == ca
                    and after.assignment[u] == cb
                )
                assert table.counts[ca][cb] == want

    def test_periods_carried(self):
        from helpers import SEPT

        net = snapshot({("a", "b"): 1}, self_loops_removed=True, period=SEPT)
        table = transitions(bowtie_decompose(net), bowtie_decompose(net))
        assert table.from_period == "2019-09"
        assert table.to_period == "2019-09"
