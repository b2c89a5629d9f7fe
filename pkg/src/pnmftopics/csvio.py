"""Dense matrix CSV files: a ``# rows cols`` header, then one row per line.

Values are written with 17 significant digits so that a write/read round
trip reproduces every float64 exactly.
"""

import numpy as np


def write_matrix_csv(path, A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    lines = [f"# {A.shape[0]} {A.shape[1]}"]
    lines.extend(",".join(f"{v:.17g}" for v in row) for row in A)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '# rows cols' header")
        try:
            nrow, ncol = (int(x) for x in header[1:].split())
        except ValueError:
            raise ValueError(f"{path}: malformed header {header!r}") from None
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            vals = line.split(",")
            if len(vals) != ncol:
                raise ValueError(f"{path}, line {lineno}: expected {ncol} values, got {len(vals)}")
            rows.append([float(v) for v in vals])
    if len(rows) != nrow:
        raise ValueError(f"{path}: expected {nrow} rows, got {len(rows)}")
    return np.array(rows, dtype=np.float64).reshape(nrow, ncol)


def read_vector_csv(path):
    return read_matrix_csv(path).ravel()
