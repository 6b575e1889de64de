import numpy as np
import pytest
import scipy.sparse as sp

from contact_split import linalg
from contact_split.exceptions import DimensionMismatch, SingularMatrix
from contact_split.problems import gen_spring_chain


def spd(n, rng):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


class TestSparseTypes:
    def test_sparse_sym_accepts_symmetric(self):
        K = linalg.sparse_sym(np.array([[2.0, -1.0], [-1.0, 2.0]]))
        assert sp.isspmatrix_csr(K) or sp.issparse(K)
        assert K.shape == (2, 2)

    def test_sparse_sym_rejects_unsymmetric(self):
        with pytest.raises(ValueError):
            linalg.sparse_sym(np.array([[2.0, -1.0], [0.0, 2.0]]))

    def test_sparse_rect_sorted_no_duplicates(self):
        B = linalg.sparse_rect(sp.coo_matrix(([1.0, 2.0, -1.0], ([0, 0, 0], [2, 2, 0])), shape=(1, 3)))
        assert B.has_sorted_indices
        np.testing.assert_array_equal(B.indices, [0, 2])
        np.testing.assert_array_equal(B.data, [-1.0, 3.0])


class TestFactorize:
    def test_identity(self):
        f = linalg.factorize(sp.identity(3, format="csr"))
        b = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(f.solve(b), b)

    def test_diagonal(self):
        f = linalg.factorize(sp.diags([2.0, 4.0]).tocsr())
        np.testing.assert_allclose(linalg.solve_with(f, np.array([2.0, 8.0])), [1.0, 2.0], rtol=0, atol=1e-15)

    def test_identity_solve_with(self):
        f = linalg.factorize(sp.identity(2, format="csr"))
        np.testing.assert_array_equal(linalg.solve_with(f, np.array([5.0, -3.0])), [5.0, -3.0])

    def test_spring_chain_against_dense_elimination(self, rng):
        K = gen_spring_chain(5, 1.0, 1.0, 1.0).K
        b = rng.standard_normal(5)
        x = linalg.factorize(K).solve(b)
        ref = np.linalg.solve(K.toarray(), b)
        assert np.linalg.norm(x - ref) / np.linalg.norm(ref) <= 1e-12

    def test_random_spd(self, rng):
        A = spd(8, rng)
        b = rng.standard_normal(8)
        x = linalg.factorize(sp.csr_matrix(A)).solve(b)
        ref = np.linalg.solve(A, b)
        assert np.linalg.norm(x - ref) / np.linalg.norm(ref) <= 1e-11

    @pytest.mark.parametrize("ordering", ["mmd", "rcm", "natural"])
    def test_orderings_agree(self, ordering, rng):
        K = gen_spring_chain(30, 2.0, 1.0, 1.0).K
        b = rng.standard_normal(30)
        x = linalg.factorize(K, ordering=ordering).solve(b)
        np.testing.assert_allclose(K @ x, b, rtol=1e-11, atol=1e-12)

    def test_residual_over_many_rhs(self, rng):
        A = sp.csr_matrix(spd(20, rng))
        f = linalg.factorize(A)
        for _ in range(100):
            b = rng.standard_normal(20)
            assert np.linalg.norm(A @ f.solve(b) - b) / np.linalg.norm(b) <= 1e-10

    def test_singular_floating_body(self):
        K = sp.csr_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]]))
        with pytest.raises(SingularMatrix):
            linalg.factorize(K)

    def test_indefinite_rejected(self):
        with pytest.raises(SingularMatrix):
            linalg.factorize(sp.diags([1.0, -3.0]).tocsr())

    def test_pivots_of_spd_are_positive(self, rng):
        f = linalg.factorize(sp.csr_matrix(spd(6, rng)))
        assert np.all(f.pivots > 0)

    def test_dimension_mismatch(self):
        f = linalg.factorize(sp.identity(3, format="csr"))
        with pytest.raises(DimensionMismatch):
            linalg.solve_with(f, np.ones(2))


class TestSpmv:
    def test_identity(self):
        np.testing.assert_array_equal(linalg.spmv(sp.identity(2, format="csr"), np.array([3.0, 4.0])), [3.0, 4.0])

    def test_pair_gap(self):
        B = sp.csr_matrix(np.array([[1.0, -1.0]]))
        np.testing.assert_array_equal(linalg.spmv(B, np.array([2.0, 5.0])), [-3.0])

    def test_pair_forces(self):
        B = sp.csr_matrix(np.array([[1.0, -1.0]]))
        np.testing.assert_array_equal(linalg.spmv(B, np.array([7.0]), transpose=True), [7.0, -7.0])

    def test_adjoint_identity(self, rng):
        B = sp.random(5, 9, density=0.4, random_state=3, format="csr")
        x, y = rng.standard_normal(9), rng.standard_normal(5)
        lhs = np.dot(linalg.spmv(B, x), y)
        rhs = np.dot(x, linalg.spmv(B, y, transpose=True))
        assert abs(lhs - rhs) <= 1e-13 * max(abs(lhs), 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            linalg.spmv(sp.identity(2, format="csr"), np.ones(3))


class TestEigenEstimates:
    def test_diagonal(self):
        assert linalg.min_eigenvalue_estimate(sp.diags([2.0, 5.0, 9.0]).tocsr()) == pytest.approx(2.0, abs=2e-6)

    def test_two_by_two(self):
        K = sp.csr_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
        assert linalg.min_eigenvalue_estimate(K) == pytest.approx(1.0, abs=1e-6)

    def test_spring_chain_against_eigh(self):
        K = gen_spring_chain(10, 1.0, 1.0, 1.0).K
        ref = np.linalg.eigvalsh(K.toarray())[0]
        assert abs(linalg.min_eigenvalue_estimate(K) - ref) / ref <= 1e-5

    def test_below_rayleigh_quotients(self, rng):
        K = sp.csr_matrix(spd(12, rng))
        mu = linalg.min_eigenvalue_estimate(K, tol=1e-10)
        for _ in range(50):
            x = rng.standard_normal(12)
            assert mu <= x @ (K @ x) / (x @ x) * (1 + 1e-9)

    def test_seed_is_deterministic(self, rng):
        K = sp.csr_matrix(spd(12, rng))
        assert linalg.min_eigenvalue_estimate(K, seed=7) == linalg.min_eigenvalue_estimate(K, seed=7)

    def test_spectral_norm_identity(self):
        assert linalg.spectral_norm_estimate(sp.identity(4, format="csr")) == pytest.approx(1.0, abs=1e-12)

    def test_spectral_norm_diagonal(self):
        B = sp.csr_matrix(np.array([[3.0, 0.0], [0.0, 4.0]]))
        assert linalg.spectral_norm_estimate(B) == pytest.approx(4.0, abs=4e-6)

    def test_spectral_norm_pair_row(self):
        B = sp.csr_matrix(np.array([[1.0, -1.0]]))
        assert linalg.spectral_norm_estimate(B) == pytest.approx(np.sqrt(2.0), abs=1e-6)


class TestMatrixMarket:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        A = sp.random(6, 4, density=0.5, random_state=1, format="csr")
        A.data = rng.standard_normal(A.nnz) * 1e-7
        linalg.write_mtx(tmp_path / "A.mtx", A)
        B = linalg.read_mtx(tmp_path / "A.mtx")
        assert (A != B).nnz == 0
        np.testing.assert_array_equal(A.toarray(), B.toarray())

    def test_one_based_indices(self, tmp_path):
        linalg.write_mtx(tmp_path / "I.mtx", sp.identity(2, format="csr"))
        lines = (tmp_path / "I.mtx").read_text().splitlines()
        assert lines[0].startswith("%%MatrixMarket matrix coordinate real")
        body = [l for l in lines if not l.startswith("%")]
        assert body[0].split() == ["2", "2", "2"]
        assert body[1].split()[:2] == ["1", "1"]

    def test_vector_roundtrip(self, tmp_path, rng):
        x = rng.standard_normal(7) * 1e-3
        linalg.write_vec(tmp_path / "x.vec", x)
        np.testing.assert_array_equal(linalg.read_vec(tmp_path / "x.vec"), x)
