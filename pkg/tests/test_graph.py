import numpy as np
import pytest
import scipy.sparse as sp

from adaptrix.errors import ArgumentError
from adaptrix.graph import adaptive_adjacency, export_weights_csv, symmetrize, weighted_adjacency
from adaptrix.neighbors import build_neighbor_table


def brute_knn_sets(x, k_star):
    d = np.linalg.norm(x[:, None] - x[None], axis=-1)
    np.fill_diagonal(d, np.inf)
    return [set(np.argsort(d[i], kind="stable")[: k_star[i]]) for i in range(len(x))]


class TestAdjacency:
    def test_fixed_k_rows(self):
        x = np.random.default_rng(0).standard_normal((40, 3))
        A = adaptive_adjacency(build_neighbor_table(x, 6), np.full(40, 6))
        assert np.all(np.diff(A.indptr) == 6)

    def test_collinear(self):
        x = np.array([[0.0], [1.0], [3.0]])
        A = adaptive_adjacency(build_neighbor_table(x, 1), [1, 1, 1]).toarray()
        np.testing.assert_array_equal(A, [[0, 1, 0], [1, 0, 0], [0, 1, 0]])

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((120, 4))
        k_star = rng.integers(1, 15, 120)
        A = adaptive_adjacency(build_neighbor_table(x, 15), k_star)
        for i, expected in enumerate(brute_knn_sets(x, k_star)):
            assert set(A[i].indices) == expected

    def test_storage_contract(self):
        x = np.random.default_rng(2).standard_normal((60, 2))
        A = adaptive_adjacency(build_neighbor_table(x, 8), np.arange(60) % 8 + 1)
        assert A.has_sorted_indices
        assert np.all(A.diagonal() == 0)
        C = A.tocoo()
        assert len(set(zip(C.row, C.col))) == A.nnz
        assert np.all(np.isfinite(A.data))

    def test_rejects_bad_k_star(self):
        table = build_neighbor_table(np.random.default_rng(3).standard_normal((10, 2)), 3)
        for bad in ([1] * 9, [0] + [1] * 9, [4] * 10, [1.5] * 10):
            with pytest.raises(ArgumentError):
                adaptive_adjacency(table, np.array(bad))

    def test_weight_alignment(self):
        x = np.array([[0.0], [1.0], [3.0]])
        W = weighted_adjacency(build_neighbor_table(x, 2), [2, 1, 1], [[0.25, 0.75], [1.0], [2.0]])
        assert W[0, 1] == 0.25 and W[0, 2] == 0.75 and W[2, 1] == 2.0


class TestSymmetrize:
    @pytest.mark.parametrize("mode", ["or", "and", "mean"])
    def test_symmetric_01_unchanged(self, mode):
        A = sp.csr_matrix(np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float))
        assert (symmetrize(A, mode) != A).nnz == 0

    def test_or(self):
        A = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=float))
        np.testing.assert_array_equal(symmetrize(A, "or").toarray(), [[0, 1], [1, 0]])

    def test_and_drops_one_sided(self):
        A = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=float))
        assert symmetrize(A, "and").nnz == 0

    def test_fuzzy_union(self):
        A = sp.csr_matrix(np.array([[0, 0.6], [0.5, 0]]))
        S = symmetrize(A, "fuzzy_union").toarray()
        assert S[0, 1] == S[1, 0] == pytest.approx(0.8, abs=1e-15)

    @pytest.mark.parametrize("mode", ["or", "and", "mean", "fuzzy_union"])
    def test_exact_symmetry_and_range(self, mode):
        rng = np.random.default_rng(4)
        A = sp.random(50, 50, density=0.1, random_state=5, format="csr")
        A.setdiag(0)
        A.eliminate_zeros()
        S = symmetrize(A, mode)
        assert (S != S.T).nnz == 0
        assert S.data.min() >= 0 and S.data.max() <= 1
        if mode == "fuzzy_union":
            dense = A.toarray()
            assert np.all(S.toarray() >= np.maximum(dense, dense.T) - 1e-15)
        del rng

    def test_unknown_mode(self):
        with pytest.raises(ArgumentError):
            symmetrize(sp.identity(2, format="csr"), "max")


def test_export_weights_csv(tmp_path):
    W = sp.csr_matrix(np.array([[0, 0.5, 0.5], [1.0, 0, 0], [0, 0.25, 0]]))
    path = tmp_path / "w.csv"
    export_weights_csv(path, W)
    assert path.read_text().splitlines() == ["0,1,0.5", "0,2,0.5", "1,0,1.0", "2,1,0.25"]
