"""Factorization correctness: monotonicity, identities, recovery."""

import numpy as np
import pytest
from scipy import sparse
from scipy.special import gammaln

from cryptoflow import (
    DataError,
    NmfModel,
    NumericError,
    component_matrix,
    cosine_similarity_matrix,
    expand_user,
    ihh,
    joint_probability,
    nmf_fit,
    normalize,
    poisson_loglik_gap,
)
from cryptoflow import _kernels
from cryptoflow.nmf import _nndsvd_average

from helpers import random_counts


def objective_trace(X, K, sweeps, eps=1e-12):
    """Objective after every multiplicative sweep from the standard init."""
    S, D = _nndsvd_average(np.asarray(X, dtype=np.float64), K)
    S = np.ascontiguousarray(S)
    D = np.ascontiguousarray(D)
    csr = sparse.csr_matrix(np.asarray(X, dtype=np.float64))
    indptr = np.ascontiguousarray(csr.indptr, dtype=np.int64)
    indices = np.ascontiguousarray(csr.indices, dtype=np.int64)
    data = np.ascontiguousarray(csr.data, dtype=np.float64)
    trace = [_kernels.kl_objective(indptr, indices, data, S, D, eps)]
    for _ in range(sweeps):
        _kernels.kl_step(indptr, indices, data, S, D, eps)
        trace.append(_kernels.kl_objective(indptr, indices, data, S, D, eps))
    return trace


def manual_kl(X, model, eps=1e-12):
    """Direct dense KL objective: sum x log(x/xi) - x + xi."""
    xi = model.S @ model.D
    X = np.asarray(X, dtype=float)
    mask = X > 0
    ratio = np.zeros_like(X)
    ratio[mask] = X[mask] * np.log(X[mask] / np.maximum(xi[mask], eps))
    return float(ratio.sum() - X.sum() + xi.sum())


class TestMonotonicity:
    @pytest.mark.parametrize("seed", range(8))
    def test_objective_never_increases(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 60))
        m = int(rng.integers(5, 60))
        K = int(rng.integers(1, min(n, m, 10) + 1))
        X = random_counts(rng, n, m)
        trace = objective_trace(X, K, sweeps=60)
        for before, after in zip(trace, trace[1:]):
            assert after <= before + 1e-12 * max(1.0, abs(before))

    def test_max_iter_prefixes_agree(self):
        rng = np.random.default_rng(123)
        X = random_counts(rng, 25, 20)
        finals = [
            nmf_fit(X, 4, max_iter=t, tol=0.0).kl_final for t in (1, 3, 10, 40)
        ]
        assert finals == sorted(finals, reverse=True)


class TestRankOne:
    def test_exact_recovery(self):
        u = np.array([4.0, 2.0, 1.0, 3.0])
        v = np.array([1.0, 5.0, 2.0])
        model = nmf_fit(np.outer(u, v), 1)
        assert model.kl_final <= 1e-8
        S_tilde, D_tilde, r = normalize(model)
        assert np.allclose(S_tilde[:, 0], u / u.sum(), atol=1e-6)
        assert np.allclose(D_tilde[0, :], v / v.sum(), atol=1e-6)
        assert r[0] == pytest.approx(1.0, abs=1e-12)

    def test_block_diagonal_separates(self):
        u1, v1 = np.array([3.0, 1.0]), np.array([2.0, 4.0, 1.0])
        u2, v2 = np.array([1.0, 2.0, 5.0]), np.array([1.0, 3.0])
        X = np.zeros((5, 5))
        X[:2, :3] = np.outer(u1, v1)
        X[2:, 3:] = np.outer(u2, v2)
        model = nmf_fit(X, 2)
        assert model.kl_final <= 1e-8
        _, D_tilde, _ = normalize(model)
        # each component's destination profile stays inside one block
        for k in range(2):
            left, right = D_tilde[k, :3].sum(), D_tilde[k, 3:].sum()
            assert min(left, right) <= 1e-6
            assert max(left, right) == pytest.approx(1.0, abs=1e-6)


class TestNormalizationIdentities:
    @pytest.mark.parametrize("seed", range(5))
    def test_l1_identities(self, seed):
        rng = np.random.default_rng(40 + seed)
        X = random_counts(rng, 30, 25)
        model = nmf_fit(X, 5)
        S_tilde, D_tilde, r = normalize(model)
        assert np.abs(S_tilde.sum(axis=0) - 1.0).max() <= 1e-12
        assert np.abs(D_tilde.sum(axis=1) - 1.0).max() <= 1e-12
        assert abs(r.sum() - 1.0) <= 1e-12
        assert np.allclose(r, model.r, rtol=1e-12, atol=1e-15)

    def test_joint_probability_sums_to_one(self):
        rng = np.random.default_rng(50)
        X = random_counts(rng, 20, 20)
        model = nmf_fit(X, 4)
        joint = joint_probability(model)
        assert joint.shape == X.shape
        assert joint.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(joint >= 0)

    def test_components_ordered_by_descending_weight(self):
        rng = np.random.default_rng(60)
        X = random_counts(rng, 30, 30)
        model = nmf_fit(X, 6)
        assert np.all(np.diff(model.r) <= 1e-15)

    def test_zero_mass_component_rejected(self):
        model = NmfModel(
            K=2,
            S=np.array([[1.0, 0.0], [2.0, 0.0]]),
            D=np.array([[1.0, 1.0], [1.0, 1.0]]),
            r=np.array([1.0, 0.0]),
            row_labels=("a", "b"),
            col_labels=("c", "d"),
            kl_final=0.0,
            iterations=0,
            seed=0,
        )
        with pytest.raises(NumericError, match="zero mass"):
            normalize(model)


class TestDeterminismAndJitter:
    def test_same_seed_same_model(self):
        rng = np.random.default_rng(70)
        X = random_counts(rng, 15, 15)
        a = nmf_fit(X, 3, seed=9, jitter=0.02)
        b = nmf_fit(X, 3, seed=9, jitter=0.02)
        assert np.array_equal(a.S, b.S)
        assert np.array_equal(a.D, b.D)
        assert a.kl_final == b.kl_final

    def test_zero_jitter_ignores_seed(self):
        rng = np.random.default_rng(71)
        X = random_counts(rng, 15, 15)
        assert np.array_equal(nmf_fit(X, 3, seed=1).S, nmf_fit(X, 3, seed=2).S)

    def test_jitter_differentiates_seeds(self):
        rng = np.random.default_rng(72)
        X = random_counts(rng, 15, 15)
        a = nmf_fit(X, 3, seed=1, jitter=0.05, max_iter=5, tol=0.0)
        b = nmf_fit(X, 3, seed=2, jitter=0.05, max_iter=5, tol=0.0)
        assert not np.array_equal(a.S, b.S)

    def test_iterations_capped(self):
        rng = np.random.default_rng(73)
        X = random_counts(rng, 20, 20)
        model = nmf_fit(X, 4, max_iter=7, tol=0.0)
        assert model.iterations == 7


class TestValidation:
    def test_negative_entries(self):
        with pytest.raises(DataError, match="negative"):
            nmf_fit(np.array([[1.0, -1.0], [0.0, 2.0]]), 1)

    def test_all_zero(self):
        with pytest.raises(DataError, match="all zero"):
            nmf_fit(np.zeros((3, 3)), 1)

    def test_wrong_dimensions(self):
        with pytest.raises(DataError, match="2-dimensional"):
            nmf_fit(np.ones(4), 1)

    @pytest.mark.parametrize("K", [0, 4])
    def test_k_out_of_range(self, K):
        with pytest.raises(DataError, match="outside valid range"):
            nmf_fit(np.ones((3, 3)), K)

    @pytest.mark.parametrize("jitter", [-0.1, 1.0])
    def test_bad_jitter(self, jitter):
        with pytest.raises(DataError, match="jitter"):
            nmf_fit(np.ones((3, 3)), 2, jitter=jitter)

    def test_label_length_mismatch(self):
        with pytest.raises(DataError, match="label lengths"):
            nmf_fit(np.ones((3, 3)), 2, row_labels=("a",))


class TestKlAgainstDenseComputation:
    @pytest.mark.parametrize("seed", range(5))
    def test_reported_objective_matches(self, seed):
        rng = np.random.default_rng(80 + seed)
        X = random_counts(rng, 25, 18)
        model = nmf_fit(X, 4)
        want = manual_kl(X, model)
        assert model.kl_final == pytest.approx(want, rel=1e-9, abs=1e-9)


class TestPoissonGap:
    @pytest.mark.parametrize("seed", range(5))
    def test_gap_equals_kl(self, seed):
        rng = np.random.default_rng(90 + seed)
        X = random_counts(rng, 30, 22)
        model = nmf_fit(X, 5)
        gap = poisson_loglik_gap(X, model)
        assert gap == pytest.approx(model.kl_final, rel=1e-9)

    def test_two_path_gammaln_identity(self):
        rng = np.random.default_rng(95)
        X = random_counts(rng, 12, 12)
        model = nmf_fit(X, 3)
        xi = model.S @ model.D
        direct = 0.0
        for s in range(X.shape[0]):
            for d in range(X.shape[1]):
                x, m = X[s, d], max(xi[s, d], 1e-12)
                sat = x * np.log(x) - x - gammaln(x + 1) if x > 0 else -gammaln(1.0)
                fit = x * np.log(m) - xi[s, d] - gammaln(x + 1)
                direct += sat - fit
        assert poisson_loglik_gap(X, model) == pytest.approx(direct, rel=1e-12)

    def test_strict_rejects_fractional_counts(self):
        rng = np.random.default_rng(96)
        X = random_counts(rng, 6, 6) + 0.5
        model = nmf_fit(X, 2)
        with pytest.raises(DataError, match="non-integer"):
            poisson_loglik_gap(X, model)
        assert poisson_loglik_gap(X, model, strict=False) > 0


class TestIhh:
    def test_uniform_gives_count(self):
        assert ihh(np.full(8, 1 / 8)) == 8.0
        assert ihh(np.full(64, 1 / 64)) == 64.0

    def test_one_hot_gives_one(self):
        assert ihh(np.array([0.0, 1.0, 0.0])) == 1.0

    def test_bounds_on_random_simplex(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            n = int(rng.integers(1, 40))
            x = rng.dirichlet(np.full(n, 0.5))
            v = ihh(x / x.sum())
            assert 1.0 <= v <= n

    @pytest.mark.parametrize(
        "bad",
        [np.array([]), np.array([[0.5, 0.5]]), np.array([0.9, 0.2]),
         np.array([-0.5, 1.5]), np.array([0.0, 0.0])],
    )
    def test_validation(self, bad):
        with pytest.raises(DataError):
            ihh(bad)


class TestUserExpansion:
    def model(self):
        rng = np.random.default_rng(100)
        X = random_counts(rng, 10, 8)
        return nmf_fit(
            X,
            3,
            row_labels=tuple(f"src{i}" for i in range(10)),
            col_labels=tuple(f"dst{j}" for j in range(8)),
        )

    def test_source_expansion(self):
        model = self.model()
        got = expand_user(model, "src3", "source")
        assert np.allclose(got, model.S[3, :] * model.D.sum(axis=1))

    def test_destination_expansion(self):
        model = self.model()
        got = expand_user(model, "dst5", "destination")
        assert np.allclose(got, model.D[:, 5] * model.S.sum(axis=0))

    def test_expansion_reconstructs_row_mass(self):
        model = self.model()
        _, D_tilde, _ = normalize(model)
        coeffs = expand_user(model, "src3", "source")
        assert np.allclose(coeffs @ D_tilde, (model.S @ model.D)[3, :], atol=1e-10)

    def test_unknown_user_or_role(self):
        model = self.model()
        with pytest.raises(DataError, match="unknown user"):
            expand_user(model, "nobody", "source")
        with pytest.raises(DataError, match="unknown role"):
            expand_user(model, "src3", "sideways")


class TestComponentMatrix:
    def test_rank_one_share_matrix(self):
        rng = np.random.default_rng(110)
        X = random_counts(rng, 9, 9)
        model = nmf_fit(X, 3)
        S_tilde, D_tilde, _ = normalize(model)
        for k in (1, 2, 3):
            M = component_matrix(model, k)
            assert np.allclose(M, np.outer(S_tilde[:, k - 1], D_tilde[k - 1]))
            assert M.sum() == pytest.approx(1.0, abs=1e-12)

    def test_one_based_bounds(self):
        rng = np.random.default_rng(111)
        model = nmf_fit(random_counts(rng, 6, 6), 2)
        for bad in (0, 3):
            with pytest.raises(DataError, match="out of range"):
                component_matrix(model, bad)


class TestCosineSimilarity:
    def test_self_similarity_unit_diagonal(self):
        rng = np.random.default_rng(120)
        model = nmf_fit(random_counts(rng, 12, 12), 4)
        sims = cosine_similarity_matrix(model, model)
        assert np.abs(np.diag(sims) - 1.0).max() <= 1e-12
        assert sims.shape == (4, 4)

    def test_oracle_double_loop(self):
        rng = np.random.default_rng(121)
        a = nmf_fit(random_counts(rng, 12, 10), 3)
        b = nmf_fit(random_counts(rng, 12, 10), 4)
        sims = cosine_similarity_matrix(a, b)
        _, da, _ = normalize(a)
        _, db, _ = normalize(b)
        for i in range(3):
            for j in range(4):
                want = float(
                    da[i] @ db[j] / (np.linalg.norm(da[i]) * np.linalg.norm(db[j]))
                )
                assert sims[i, j] == pytest.approx(want, abs=1e-12)

    def test_alignment_on_label_union(self):
        rng = np.random.default_rng(122)
        Xa, Xb = random_counts(rng, 6, 4), random_counts(rng, 6, 4)
        a = nmf_fit(Xa, 2, col_labels=("p", "q", "r", "s"))
        b = nmf_fit(Xb, 2, col_labels=("r", "s", "t", "u"))
        sims = cosine_similarity_matrix(a, b)
        _, da, _ = normalize(a)
        _, db, _ = normalize(b)
        # only the shared labels r, s can contribute to the dot product
        want = float(
            da[0, 2:] @ db[0, :2] / (np.linalg.norm(da[0]) * np.linalg.norm(db[0]))
        )
        assert sims[0, 0] == pytest.approx(want, abs=1e-12)

    def test_source_basis(self):
        rng = np.random.default_rng(123)
        model = nmf_fit(random_counts(rng, 8, 8), 3)
        sims = cosine_similarity_matrix(model, model, basis="S")
        assert np.abs(np.diag(sims) - 1.0).max() <= 1e-12

    def test_unknown_basis(self):
        rng = np.random.default_rng(124)
        model = nmf_fit(random_counts(rng, 5, 5), 2)
        with pytest.raises(DataError, match="unknown basis"):
            cosine_similarity_matrix(model, model, basis="Q")
