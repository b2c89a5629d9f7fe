import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pnmftopics.count_matrix import (
    CountMatrix,
    MatrixMarketError,
    col_sums,
    from_triplets,
    read_matrix_market,
    row_sums,
    total,
    write_matrix_market,
)


def mm(text):
    return read_matrix_market(io.StringIO(text))


class TestFromTriplets:
    def test_full(self):
        X = from_triplets(2, 2, [(0, 0, 1), (0, 1, 2), (1, 0, 3), (1, 1, 4)])
        np.testing.assert_array_equal(X.toarray(), [[1, 2], [3, 4]])
        assert X.nnz == 4

    def test_duplicates_summed(self):
        X = from_triplets(2, 2, [(0, 0, 1), (0, 0, 2)])
        np.testing.assert_array_equal(X.toarray(), [[3, 0], [0, 0]])
        assert X.nnz == 1

    def test_zero_dropped(self):
        X = from_triplets(2, 2, [(0, 0, 0)])
        assert X.nnz == 0
        assert X.entries() == []

    def test_out_of_bounds_reports_triplet(self):
        with pytest.raises(IndexError, match=r"\(2, 0, 1\)"):
            from_triplets(2, 2, [(0, 0, 1), (2, 0, 1)])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            from_triplets(2, 2, [(0, 0, -1)])


class TestSums:
    @pytest.mark.parametrize(
        "dense, t, c",
        [
            ([[1, 2], [3, 4]], [3, 7], [4, 6]),
            ([[0, 0], [0, 0]], [0, 0], [0, 0]),
            ([[0, 5]], [5], [0, 5]),
        ],
    )
    def test_examples(self, dense, t, c):
        X = CountMatrix.from_dense(dense)
        np.testing.assert_array_equal(row_sums(X), t)
        np.testing.assert_array_equal(col_sums(X), c)
        assert total(X) == sum(t)
        assert row_sums(X).dtype == np.int64


class TestMatrixMarket:
    def test_read_example(self):
        X = mm("%%MatrixMarket matrix coordinate integer general\n% comment\n2 2 3\n1 1 1\n2 1 3\n2 2 4\n")
        np.testing.assert_array_equal(X.toarray(), [[1, 0], [3, 4]])

    def test_empty(self):
        X = mm("%%MatrixMarket matrix coordinate integer general\n0 0 0\n")
        assert X.shape == (0, 0) and X.nnz == 0

    def test_index_overflow_names_line(self):
        with pytest.raises(MatrixMarketError, match="line 3"):
            mm("%%MatrixMarket matrix coordinate integer general\n2 2 1\n3 1 1\n")

    def test_real_integral_values(self):
        X = mm("%%MatrixMarket matrix coordinate real general\n1 2 2\n1 1 2.0\n1 2 5\n")
        np.testing.assert_array_equal(X.toarray(), [[2, 5]])

    def test_real_non_integral(self):
        with pytest.raises(MatrixMarketError, match="line 3"):
            mm("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.5\n")

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "not a banner\n1 1 0\n",
            "%%MatrixMarket matrix array integer general\n1 1\n1\n",
            "%%MatrixMarket matrix coordinate integer symmetric\n1 1 0\n",
            "%%MatrixMarket matrix coordinate integer general\n",
            "%%MatrixMarket matrix coordinate integer general\n1 1 2\n1 1 1\n",
        ],
    )
    def test_malformed(self, text):
        with pytest.raises(MatrixMarketError):
            mm(text)

    def test_write_banner(self, tmp_path):
        X = CountMatrix.from_dense([[1, 0], [0, 7]])
        path = tmp_path / "x.mtx"
        write_matrix_market(X, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "%%MatrixMarket matrix coordinate integer general"
        assert lines[1] == "2 2 2"
        assert lines[2:] == ["1 1 1", "2 2 7"]


sparse_matrices = st.tuples(
    st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.0, 1.0)
)


@settings(max_examples=60, deadline=None)
@given(sparse_matrices)
def test_round_trip(args):
    n, m, seed, density = args
    rng = np.random.default_rng(seed)
    dense = rng.poisson(4, (n, m)) * (rng.random((n, m)) < density)
    X = CountMatrix.from_dense(dense)
    buf = io.StringIO()
    write_matrix_market(X, buf)
    buf.seek(0)
    Y = read_matrix_market(buf)
    assert Y.shape == X.shape
    assert Y.entries() == X.entries()


@settings(max_examples=60, deadline=None)
@given(sparse_matrices)
def test_row_and_column_views_agree(args):
    n, m, seed, density = args
    rng = np.random.default_rng(seed)
    dense = rng.poisson(4, (n, m)) * (rng.random((n, m)) < density)
    X = CountMatrix.from_dense(dense)
    by_row = sorted((i, int(j), int(x)) for i in range(X.n) for j, x in zip(*X.row(i)))
    by_col = sorted((int(i), j, int(x)) for j in range(X.m) for i, x in zip(*X.col(j)))
    assert by_row == by_col == X.entries()
    assert X.total() == X.row_sums().sum() == X.col_sums().sum()
    np.testing.assert_array_equal(X.row_values, X.csr.data)
    np.testing.assert_array_equal(X.col_values, sp.csr_matrix(X.csr.T).data)


def test_drop_empty():
    X = CountMatrix.from_dense([[0, 0, 0], [1, 0, 2], [0, 0, 0]])
    Y, rows, cols = X.drop_empty()
    np.testing.assert_array_equal(rows, [1])
    np.testing.assert_array_equal(cols, [0, 2])
    np.testing.assert_array_equal(Y.toarray(), [[1, 2]])
