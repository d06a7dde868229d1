"""Potential/circular decomposition of net flows.

A snapshot's directed weights collapse to an antisymmetric net-flow
matrix F and a symmetric binary-link weight w (0, 1 or 2).  Solving
the graph-Laplacian system L·φ = F·1 per connected component — with
the zero mode fixed by a mean-zero gauge — splits F into a gradient
part w_ij·(φ_i − φ_j) and a divergence-free circular remainder.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .bowtie import CLASSES, BowTieResult
from .errors import DataError, NumericError
from .network import FlowNetwork

log = logging.getLogger(__name__)

# Components at least this large are solved iteratively; smaller ones
# go through the dense pseudoinverse.
DENSE_SOLVE_LIMIT = 500

CG_RTOL = 1e-10
CG_MAXITER = 100_000

# Divergence of the circular part must vanish to this relative level.
DIVERGENCE_TOL = 1e-9


@dataclass(frozen=True)
class NetFlowGraph:
    """Antisymmetric net flow F and symmetric link weight w."""

    nodes: tuple[str, ...]
    F: np.ndarray
    w: np.ndarray
    weight_source: str

    def __post_init__(self):
        n = len(self.nodes)
        if self.F.shape != (n, n) or self.w.shape != (n, n):
            raise DataError("net-flow matrices do not match the node count")


@dataclass(frozen=True)
class HodgeResult:
    """Potentials and the gradient/circular flow split."""

    nodes: tuple[str, ...]
    phi: dict[str, float]
    F_grad: np.ndarray
    F_circ: np.ndarray
    residual_norm: float


def net_flow(network: FlowNetwork, weight_source: str = "frequency") -> NetFlowGraph:
    """Collapse directed edge weights into net flows and binary link weights.

    F_ij is the signed excess of the chosen weight i→j over j→i; w_ij
    counts how many of the two directed links exist (0, 1 or 2).
    """
    if not network.self_loops_removed:
        raise DataError("net flow requires self-loops removed")
    if weight_source not in ("frequency", "amount"):
        raise DataError(f"unknown weight source {weight_source!r}")
    n = network.n_nodes
    index = network.node_index()
    raw = np.zeros((n, n))
    A = np.zeros((n, n))
    for (i, j), (f, g) in network.edges.items():
        s, d = index[i], index[j]
        raw[s, d] = f if weight_source == "frequency" else g / 10**8
        A[s, d] = 1.0
    F = raw - raw.T
    w = A + A.T
    return NetFlowGraph(network.nodes, F, w, weight_source)


def _components(w: np.ndarray) -> list[list[int]]:
    n = w.shape[0]
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        members = [start]
        while queue:
            v = queue.popleft()
            for u in np.nonzero(w[v])[0]:
                if not seen[u]:
                    seen[u] = True
                    members.append(int(u))
                    queue.append(int(u))
        comps.append(members)
    return comps


def _solve_dense(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(L) @ b


def _solve_cg(L, b: np.ndarray, rtol: float, maxiter: int, atol_inf: float) -> np.ndarray:
    """Conjugate gradients on the singular Laplacian, gauge-projected.

    L annihilates constants, so subtracting the mean of the iterate
    never changes the residual; it just pins the zero mode.  Iteration
    stops once the residual is small both relative to ``b`` (2-norm)
    and absolutely per node (∞-norm), the latter so that the
    divergence-freeness guarantee holds regardless of graph size.
    """
    b = b - b.mean()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    for _ in range(maxiter):
        Ap = L @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            break
        alpha = rs / pAp
        x += alpha * p
        x -= x.mean()
        r -= alpha * Ap
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= rtol * bnorm and (
            atol_inf <= 0.0 or float(np.abs(r).max()) <= atol_inf
        ):
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise NumericError(
        f"potential solve did not converge: residual {np.sqrt(rs):.3e} "
        f"(target {rtol * bnorm:.3e})"
    )


def hodge_decompose(
    g: NetFlowGraph,
    *,
    rtol: float = CG_RTOL,
    maxiter: int = CG_MAXITER,
    method: str = "auto",
) -> HodgeResult:
    """Split the net flow into gradient and circular parts.

    Potentials solve the Laplacian system per connected component of
    the link graph, mean-zero within each component; isolated nodes
    get φ = 0.  The circular remainder is checked to be divergence-
    free relative to the largest net flow.
    """
    if method not in ("auto", "dense", "cg"):
        raise DataError(f"unknown solve method {method!r}")
    n = len(g.nodes)
    phi = np.zeros(n)
    b = g.F.sum(axis=1)
    # the iterative solver must land below the divergence check, with
    # headroom for the rounding incurred when F_grad is formed
    atol_inf = 0.5 * DIVERGENCE_TOL * (float(np.abs(g.F).max()) if n else 0.0)
    for comp in _components(g.w):
        if len(comp) == 1:
            continue
        idx = np.asarray(comp)
        w_c = g.w[np.ix_(idx, idx)]
        L = np.diag(w_c.sum(axis=1)) - w_c
        if method == "dense" or (method == "auto" and len(comp) < DENSE_SOLVE_LIMIT):
            sol = _solve_dense(L, b[idx])
        else:
            sol = _solve_cg(sparse.csr_matrix(L), b[idx], rtol, maxiter, atol_inf)
        phi[idx] = sol - sol.mean()

    F_grad = g.w * (phi[:, None] - phi[None, :])
    F_circ = g.F - F_grad
    residual = float(np.abs(F_circ.sum(axis=1)).max()) if n else 0.0
    scale = float(np.abs(g.F).max()) if n else 0.0
    if scale > 0 and residual > DIVERGENCE_TOL * scale:
        raise NumericError(
            f"circular flow is not divergence-free: residual {residual:.3e} "
            f"exceeds {DIVERGENCE_TOL:.0e} x {scale:.3e}"
        )
    return HodgeResult(
        nodes=g.nodes,
        phi={u: float(phi[i]) for i, u in enumerate(g.nodes)},
        F_grad=F_grad,
        F_circ=F_circ,
        residual_norm=residual,
    )


@dataclass(frozen=True)
class ClassHistogram:
    counts: tuple[int, ...]
    edges: tuple[float, ...]
    mean: float | None
    n: int


def potential_distribution(
    result: HodgeResult, bowtie: BowTieResult, bins: int = 50
) -> dict[str, ClassHistogram]:
    """Histogram the potentials separately per bow-tie class.

    All classes share one set of bin edges so the histograms overlay
    directly; classes without members get empty histograms.
    """
    if set(result.phi) != set(bowtie.assignment):
        raise DataError("potential and bow-tie results cover different nodes")
    values = np.asarray([result.phi[u] for u in result.nodes])
    edges = (
        np.histogram_bin_edges(values, bins=bins)
        if len(values)
        else np.histogram_bin_edges([0.0], bins=bins)
    )
    out: dict[str, ClassHistogram] = {}
    for cls in CLASSES:
        members = [result.phi[u] for u in result.nodes if bowtie.assignment[u] == cls]
        counts, _ = np.histogram(members, bins=edges)
        out[cls] = ClassHistogram(
            counts=tuple(int(c) for c in counts),
            edges=tuple(float(e) for e in edges),
            mean=float(np.mean(members)) if members else None,
            n=len(members),
        )
    return out
