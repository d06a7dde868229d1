# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: sparse KL-NMF sweeps and union-find batches.

Mirrors the numpy fallback exactly; the loops release the GIL so
multiple fits can run on threads.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log

cnp.import_array()

BACKEND = "compiled"


cdef inline double _xi_at(const double[:, ::1] S, const double[:, ::1] D,
                          Py_ssize_t s, Py_ssize_t d) nogil:
    cdef Py_ssize_t k
    cdef double acc = 0.0
    for k in range(S.shape[1]):
        acc += S[s, k] * D[k, d]
    return acc


def kl_step(const long long[::1] indptr, const long long[::1] indices,
            const double[::1] data, double[:, ::1] S, double[:, ::1] D,
            double eps):
    """One multiplicative update pass (S first, then D), in place."""
    cdef Py_ssize_t n = S.shape[0]
    cdef Py_ssize_t K = S.shape[1]
    cdef Py_ssize_t m = D.shape[1]
    cdef double[:, ::1] num_s = np.zeros((n, K))
    cdef double[:, ::1] num_d = np.zeros((K, m))
    cdef double[::1] denom = np.zeros(K)
    cdef Py_ssize_t s, d, k
    cdef long long e
    cdef double xi, ratio

    with nogil:
        for k in range(K):
            for d in range(m):
                denom[k] += D[k, d]
        for s in range(n):
            for e in range(indptr[s], indptr[s + 1]):
                d = indices[e]
                xi = _xi_at(S, D, s, d)
                if xi < eps:
                    xi = eps
                ratio = data[e] / xi
                for k in range(K):
                    num_s[s, k] += ratio * D[k, d]
        for s in range(n):
            for k in range(K):
                S[s, k] *= num_s[s, k] / (denom[k] if denom[k] > eps else eps)

        for k in range(K):
            denom[k] = 0.0
            for s in range(n):
                denom[k] += S[s, k]
        for s in range(n):
            for e in range(indptr[s], indptr[s + 1]):
                d = indices[e]
                xi = _xi_at(S, D, s, d)
                if xi < eps:
                    xi = eps
                ratio = data[e] / xi
                for k in range(K):
                    num_d[k, d] += ratio * S[s, k]
        for k in range(K):
            for d in range(m):
                D[k, d] *= num_d[k, d] / (denom[k] if denom[k] > eps else eps)


def kl_objective(const long long[::1] indptr, const long long[::1] indices,
                 const double[::1] data, const double[:, ::1] S,
                 const double[:, ::1] D, double eps):
    """Generalized KL divergence between the CSR matrix and S @ D."""
    cdef Py_ssize_t n = S.shape[0]
    cdef Py_ssize_t K = S.shape[1]
    cdef Py_ssize_t m = D.shape[1]
    cdef Py_ssize_t s, d, k
    cdef long long e
    cdef double xi, total = 0.0, entropy = 0.0, cross = 0.0
    cdef double col, row

    with nogil:
        for s in range(n):
            for e in range(indptr[s], indptr[s + 1]):
                d = indices[e]
                xi = _xi_at(S, D, s, d)
                if xi < eps:
                    xi = eps
                entropy += data[e] * log(data[e] / xi)
                total += data[e]
        for k in range(K):
            col = 0.0
            for s in range(n):
                col += S[s, k]
            row = 0.0
            for d in range(m):
                row += D[k, d]
            cross += col * row
    return entropy - total + cross


def union_pairs(long long[::1] parent, long long[::1] size,
                const long long[::1] left, const long long[::1] right):
    """Union the index pairs (left[i], right[i]) in place.

    Path halving on the way up, union by size at the roots.
    """
    cdef Py_ssize_t i
    cdef long long a, b, tmp

    with nogil:
        for i in range(left.shape[0]):
            a = left[i]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            b = right[i]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a == b:
                continue
            if size[a] < size[b]:
                tmp = a
                a = b
                b = tmp
            parent[b] = a
            size[a] += size[b]


def find_roots(const long long[::1] parent):
    """Root of every element, fully path-compressed copy."""
    cdef Py_ssize_t n = parent.shape[0]
    roots_arr = np.array(parent, dtype=np.int64)
    cdef long long[::1] roots = roots_arr
    cdef Py_ssize_t i
    cdef long long r, j, nxt

    with nogil:
        for i in range(n):
            r = i
            while roots[r] != r:
                r = roots[r]
            j = i
            while roots[j] != r:
                nxt = roots[j]
                roots[j] = r
                j = nxt
    return roots_arr
