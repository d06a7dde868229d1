"""NumPy/SciPy implementations of the hot kernels.

Same call signatures and numerical semantics as the compiled extension
(`_speedups`); selection happens in the package ``__init__``.  All
matrix arguments are C-contiguous float64, sparse matrices arrive as
raw CSR triples (``indptr``, ``indices``, ``data``).
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

BACKEND = "python"


def _gather_xi(indptr, indices, S, D):
    """Entries of S @ D at the nonzero positions of a CSR pattern."""
    rows = np.repeat(np.arange(S.shape[0]), np.diff(indptr))
    return np.einsum("ek,ek->e", S[rows], D[:, indices].T)


def kl_step(indptr, indices, data, S, D, eps):
    """One multiplicative update pass (S first, then D), in place."""
    n, k = S.shape
    m = D.shape[1]
    xi = _gather_xi(indptr, indices, S, D)
    ratio = sparse.csr_matrix(
        (data / np.maximum(xi, eps), indices, indptr), shape=(n, m)
    )
    S *= (ratio @ D.T) / np.maximum(D.sum(axis=1), eps)[None, :]

    xi = _gather_xi(indptr, indices, S, D)
    ratio = sparse.csr_matrix(
        (data / np.maximum(xi, eps), indices, indptr), shape=(n, m)
    )
    D *= (ratio.T @ S).T / np.maximum(S.sum(axis=0), eps)[:, None]


def kl_objective(indptr, indices, data, S, D, eps):
    """Generalized KL divergence between the CSR matrix and S @ D."""
    xi = _gather_xi(indptr, indices, S, D)
    entropy = float(np.dot(data, np.log(data / np.maximum(xi, eps))))
    return entropy - float(data.sum()) + float(S.sum(axis=0) @ D.sum(axis=1))


def union_pairs(parent, size, left, right):
    """Union the index pairs (left[i], right[i]) in place.

    Path halving on the way up, union by size at the roots.
    """
    for a, b in zip(left.tolist(), right.tolist()):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]


def find_roots(parent):
    """Root of every element, by repeated pointer jumping."""
    roots = parent.copy()
    while True:
        hop = roots[roots]
        if np.array_equal(hop, roots):
            return roots
        roots = hop
