"""KL-divergence non-negative matrix factorization of flow matrices.

X ≈ S·D with S (N×K) and D (K×N) non-negative, fitted by multiplicative
updates on the generalized KL objective.  Factors are initialized with
a non-negative double SVD whose zeros are replaced by the matrix mean
(exact zeros are absorbing under multiplicative updates), optionally
perturbed by a seeded jitter for Monte Carlo restarts.  After fitting,
components carry L1-normalized shapes and weights r_k and are stored
in descending-r order, which fixes the scaling/permutation freedom.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import gammaln

from . import _kernels
from .errors import DataError, NumericError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 2000
EPS = 1e-12

# Slack for the per-step monotonicity warning.
_MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class NmfModel:
    """Fitted factorization with r-ordered components.

    ``S`` is rows-by-components, ``D`` components-by-columns; ``r``
    holds the component weights (descending, summing to 1).  Labels
    name the rows (sources) and columns (destinations); for square
    flow matrices the two coincide.
    """

    K: int
    S: np.ndarray
    D: np.ndarray
    r: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    kl_final: float
    iterations: int
    seed: int

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.col_labels

    def node_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.col_labels)}


def _nndsvd_average(X: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Non-negative double SVD init, zeros filled with the matrix mean."""
    U, sig, Vt = np.linalg.svd(X, full_matrices=False)
    n, m = X.shape
    S = np.zeros((n, K))
    D = np.zeros((K, m))
    S[:, 0] = np.sqrt(sig[0]) * np.abs(U[:, 0])
    D[0, :] = np.sqrt(sig[0]) * np.abs(Vt[0, :])
    for k in range(1, K):
        u, v = U[:, k], Vt[k, :]
        up, un = np.maximum(u, 0), np.maximum(-u, 0)
        vp, vn = np.maximum(v, 0), np.maximum(-v, 0)
        up_n, un_n = np.linalg.norm(up), np.linalg.norm(un)
        vp_n, vn_n = np.linalg.norm(vp), np.linalg.norm(vn)
        pos, neg = up_n * vp_n, un_n * vn_n
        if pos >= neg:
            if pos > 0:
                S[:, k] = np.sqrt(sig[k] * pos) / up_n * up
                D[k, :] = np.sqrt(sig[k] * pos) / vp_n * vp
        elif neg > 0:
            S[:, k] = np.sqrt(sig[k] * neg) / un_n * un
            D[k, :] = np.sqrt(sig[k] * neg) / vn_n * vn
    fill = X.mean()
    S[S <= 0] = fill
    D[D <= 0] = fill
    return S, D


def _order_components(S, D, r):
    """Descending r; ties broken toward the lexicographically larger
    normalized destination row."""
    rows = D / np.maximum(D.sum(axis=1), EPS)[:, None]
    order = sorted(
        range(len(r)), key=lambda k: (-r[k], tuple(-rows[k]))
    )
    return S[:, order], D[order, :], r[order]


def nmf_fit(
    X: np.ndarray,
    K: int,
    seed: int = 0,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    eps: float = EPS,
    jitter: float = 0.0,
    row_labels: tuple[str, ...] | None = None,
    col_labels: tuple[str, ...] | None = None,
    kernels=None,
) -> NmfModel:
    """Factorize a non-negative matrix by multiplicative KL updates.

    Stops when the relative objective decrease falls below ``tol`` or
    after ``max_iter`` sweeps.  ``jitter`` > 0 multiplies the initial
    factors by seeded uniform noise in [1−jitter, 1+jitter], which is
    what makes distinct seeds produce distinct restarts; at the default
    0 the fit is deterministic regardless of seed.  A non-increasing
    objective is expected and violations are logged, never masked.
    """
    impl = kernels if kernels is not None else _kernels
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2:
        raise DataError("input matrix must be 2-dimensional")
    if np.any(X < 0):
        raise DataError("input matrix has negative entries")
    if not np.any(X > 0):
        raise DataError("input matrix is all zero")
    n, m = X.shape
    if not 1 <= K <= min(n, m):
        raise DataError(f"K={K} outside valid range 1..{min(n, m)}")
    if not 0 <= jitter < 1:
        raise DataError(f"jitter {jitter} outside [0, 1)")

    S, D = _nndsvd_average(X, K)
    if jitter > 0:
        rng = np.random.default_rng(seed)
        S = S * rng.uniform(1 - jitter, 1 + jitter, size=S.shape)
        D = D * rng.uniform(1 - jitter, 1 + jitter, size=D.shape)
    S = np.ascontiguousarray(S)
    D = np.ascontiguousarray(D)

    csr = sparse.csr_matrix(X)
    indptr = np.ascontiguousarray(csr.indptr, dtype=np.int64)
    indices = np.ascontiguousarray(csr.indices, dtype=np.int64)
    data = np.ascontiguousarray(csr.data, dtype=np.float64)

    obj = impl.kl_objective(indptr, indices, data, S, D, eps)
    iterations = 0
    for _ in range(max_iter):
        impl.kl_step(indptr, indices, data, S, D, eps)
        iterations += 1
        new_obj = impl.kl_objective(indptr, indices, data, S, D, eps)
        if new_obj > obj + _MONOTONE_SLACK * max(1.0, abs(obj)):
            log.warning(
                "objective increased at sweep %d: %.12g -> %.12g",
                iterations, obj, new_obj,
            )
        decrease = obj - new_obj
        obj = new_obj
        if decrease < tol * max(abs(obj), 1e-300):
            break

    sums = S.sum(axis=0) * D.sum(axis=1)
    total = sums.sum()
    if total <= 0:
        raise NumericError("factorization collapsed to zero")
    r = sums / total
    S, D, r = _order_components(S, D, r)

    if row_labels is None:
        row_labels = tuple(str(i) for i in range(n))
    if col_labels is None:
        col_labels = tuple(str(j) for j in range(m))
    if len(row_labels) != n or len(col_labels) != m:
        raise DataError("label lengths do not match the matrix shape")
    return NmfModel(
        K=K,
        S=np.ascontiguousarray(S),
        D=np.ascontiguousarray(D),
        r=r,
        row_labels=tuple(row_labels),
        col_labels=tuple(col_labels),
        kl_final=float(obj),
        iterations=iterations,
        seed=seed,
    )


def normalize(model: NmfModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """L1-normalized factors and component weights (S̃, D̃, r).

    Columns of S̃ and rows of D̃ each sum to 1; r_k is the share of
    mass S_k·D_k.  A component whose factor collapsed to zero cannot
    be normalized.
    """
    S_k = model.S.sum(axis=0)
    D_k = model.D.sum(axis=1)
    if np.any(S_k <= 0) or np.any(D_k <= 0):
        k = int(np.argmin(np.minimum(S_k, D_k))) + 1
        raise NumericError(
            f"component {k} has zero mass; refit with smaller K"
        )
    S_tilde = model.S / S_k[None, :]
    D_tilde = model.D / D_k[:, None]
    r = S_k * D_k / float(S_k @ D_k)
    return S_tilde, D_tilde, r


def joint_probability(model: NmfModel) -> np.ndarray:
    """p_sd = Σ_k r_k S̃_sk D̃_kd; sums to 1 over all cells."""
    S_tilde, D_tilde, r = normalize(model)
    return (S_tilde * r[None, :]) @ D_tilde


def ihh(shares: np.ndarray) -> float:
    """Inverse Herfindahl-Hirschman index: effective count 1/Σx².

    Uniform shares over N entries give N; a one-hot vector gives 1.
    """
    x = np.asarray(shares, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DataError("shares must be a non-empty vector")
    if np.any(x < 0):
        raise DataError("shares must be non-negative")
    total = float(x.sum())
    if abs(total - 1.0) > 1e-9:
        raise DataError(f"shares sum to {total!r}, not 1")
    denom = float(x @ x)
    if denom == 0.0:
        raise DataError("zero share vector")
    return 1.0 / denom


def expand_user(model: NmfModel, user: str, role: str) -> np.ndarray:
    """Length-K expansion coefficients of one user's flows.

    Source role: S_sk·D_k (the user's row of X decomposes over the
    normalized destination rows with these weights); destination role:
    D_kd·S_k over the normalized source columns.
    """
    if role == "source":
        try:
            s = model.row_labels.index(user)
        except ValueError:
            raise DataError(f"unknown user {user!r}") from None
        return model.S[s, :] * model.D.sum(axis=1)
    if role == "destination":
        try:
            d = model.col_labels.index(user)
        except ValueError:
            raise DataError(f"unknown user {user!r}") from None
        return model.D[:, d] * model.S.sum(axis=0)
    raise DataError(f"unknown role {role!r} (expected source or destination)")


def component_matrix(model: NmfModel, k: int) -> np.ndarray:
    """Rank-1 share matrix S̃_·k D̃_k· of component k (1-based); sums to 1."""
    if not 1 <= k <= model.K:
        raise DataError(f"component {k} out of range 1..{model.K}")
    S_tilde, D_tilde, _ = normalize(model)
    return np.outer(S_tilde[:, k - 1], D_tilde[k - 1, :])


def _aligned_vectors(models, basis):
    if basis == "D":
        labels = [m.col_labels for m in models]
        mats = []
        for m in models:
            _, D_tilde, _ = normalize(m)
            mats.append(D_tilde)
    elif basis == "S":
        labels = [m.row_labels for m in models]
        mats = []
        for m in models:
            S_tilde, _, _ = normalize(m)
            mats.append(S_tilde.T)
    else:
        raise DataError(f"unknown basis {basis!r} (expected D or S)")
    universe = sorted(set(labels[0]) | set(labels[1]))
    pos = {u: i for i, u in enumerate(universe)}
    aligned = []
    for lab, mat in zip(labels, mats):
        out = np.zeros((mat.shape[0], len(universe)))
        cols = [pos[u] for u in lab]
        out[:, cols] = mat
        aligned.append(out)
    return aligned


def cosine_similarity_matrix(
    a: NmfModel, b: NmfModel, basis: str = "D"
) -> np.ndarray:
    """Pairwise cosine similarity of component vectors across two models.

    Vectors are aligned on the union of user-ids (absent users
    contribute zeros); rows/columns follow each model's descending-r
    component order.  A zero vector has similarity 0 with everything.
    """
    va, vb = _aligned_vectors((a, b), basis)
    na = np.linalg.norm(va, axis=1)
    nb = np.linalg.norm(vb, axis=1)
    dots = va @ vb.T
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = dots / np.outer(na, nb)
    sims[~np.isfinite(sims)] = 0.0
    return sims


def poisson_loglik_gap(X: np.ndarray, model: NmfModel, strict: bool = True) -> float:
    """Log-likelihood gap between the saturated model and the fit.

    Each cell is scored as an independent Poisson count under its own
    value and under ξ = (S·D); the summed difference equals the KL
    objective, which downstream checks exploit as a consistency test.
    In strict mode non-integer entries are rejected.
    """
    X = np.asarray(X, dtype=np.float64)
    if strict and not np.all(X == np.round(X)):
        raise DataError("count matrix has non-integer entries")
    if np.any(X < 0):
        raise DataError("count matrix has negative entries")
    xi = model.S @ model.D
    lgamma = gammaln(X + 1.0)
    safe_x = np.where(X > 0, X, 1.0)
    ll_saturated = X * np.log(safe_x) - X - lgamma
    ll_fit = X * np.log(np.maximum(xi, EPS)) - xi - lgamma
    return float((ll_saturated - ll_fit).sum())
