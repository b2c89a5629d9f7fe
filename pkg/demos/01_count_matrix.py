"""Sparse count matrices: build, inspect, write and read Matrix Market files."""

import io

from pnmftopics import CountMatrix, read_matrix_market, write_matrix_market

# duplicate triplets are summed; zeros are never stored
X = CountMatrix.from_triplets(3, 4, [(0, 1, 2), (0, 1, 1), (2, 3, 5), (1, 0, 1)])
print("shape", X.shape, "nnz", X.nnz, "total", X.total())
print("row sums", X.row_sums(), "column sums", X.col_sums())

# row 0 as (column indices, counts); the transposed copy gives columns cheaply
print("row 0", X.row(0), "column 3", X.col(3))

buf = io.StringIO()
write_matrix_market(X, buf, comment="three documents, four terms")
print(buf.getvalue())
buf.seek(0)
assert read_matrix_market(buf) == X

# empty documents and terms are dropped before fitting
sub, rows, cols = CountMatrix.from_dense([[0, 0, 0], [1, 0, 2]]).drop_empty()
print("kept rows", rows, "kept columns", cols, "->", sub.shape)
