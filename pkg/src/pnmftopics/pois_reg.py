"""Additive Poisson regression: y_i ~ Poisson(mu_i), mu_i = sum_k a_ik b_k.

This is the subproblem solved for every row of L and every row of F. The
kernels below work on a *sparse slice*: only the rows of A where y_i > 0 are
visited, and rows with y_i = 0 enter solely through the column sums of the
full A. The same kernels are used by the single-problem API in this module
and by the block updates in :mod:`pnmftopics.engine`.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

#: positivity guard for mu inside logs and divisions
MU_GUARD = 1e-15
#: lower bound applied to updated coefficients
PARAM_FLOOR = 1e-15

EM, CD = 0, 1
_METHODS = {"em": EM, "cd": CD}


class NonFiniteLossError(FloatingPointError):
    pass


def method_code(method):
    if isinstance(method, (int, np.integer)) and method in (EM, CD):
        return int(method)
    try:
        return _METHODS[str(method).lower()]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected 'em' or 'cd'") from None


# Kernels. Arguments shared by all of them:
#   A       fixed design (full matrix; only rows listed in idx are read)
#   idx     rows of A with y > 0
#   y       the nonzero observations, aligned with idx
#   colsum  column sums of the full A
#   b       coefficients (length K)
#   c, d    prior adjustments: the objective gains sum_k d_k b_k - c_k log b_k.
#           Both are zero for maximum likelihood.


@njit(cache=True, nogil=True)
def _compute_mu(A, idx, b, mu):
    K = b.shape[0]
    for r in range(idx.shape[0]):
        row = idx[r]
        s = 0.0
        for k in range(K):
            s += A[row, k] * b[k]
        mu[r] = s


@njit(cache=True, nogil=True)
def _em_step(A, idx, y, colsum, b, c, d, pi, z):
    """One EM update of b in place, via the multinomial mixture form.

    With u = colsum, s = sum_k b_k u_k, a*_ik = a_ik / u_k and
    b*_k = b_k u_k / s, the E step is p_ik = a*_ik b*_k / pi_i and the
    expected counts are z_k = sum_i y_i p_ik; the M step is
    b_k = (z_k + c_k) / (u_k + d_k). For c = d = 0 this is b_k = t b*_k / u_k
    with t = sum_i y_i. ``z`` is a (3, K) scratch array.
    """
    K = b.shape[0]
    bstar = z[1]
    inv_u = z[2]
    s = 0.0
    for k in range(K):
        if colsum[k] > 0.0:
            s += b[k] * colsum[k]
    for k in range(K):
        z[0, k] = 0.0
        if colsum[k] > 0.0 and s > 0.0:
            bstar[k] = b[k] * colsum[k] / s
            inv_u[k] = 1.0 / colsum[k]
        else:
            bstar[k] = 0.0
            inv_u[k] = 0.0
    if s > 0.0:
        floor_pi = MU_GUARD / s
        for r in range(idx.shape[0]):
            row = idx[r]
            p = 0.0
            for k in range(K):
                p += A[row, k] * inv_u[k] * bstar[k]
            pi[r] = max(p, floor_pi)
        for r in range(idx.shape[0]):
            row = idx[r]
            w = y[r] / pi[r]
            for k in range(K):
                z[0, k] += w * A[row, k] * inv_u[k] * bstar[k]
    for k in range(K):
        den = colsum[k] + d[k]
        if den > 0.0 and (colsum[k] > 0.0 or d[k] > 0.0):
            b[k] = (z[0, k] + c[k]) / den


@njit(cache=True, nogil=True)
def _cd_sweep(A, idx, y, colsum, b, c, d, mu, floor):
    """One cyclic pass of projected Newton steps over k = 0..K-1, in place.

    ``mu`` must hold A[idx] @ b on entry; it is kept current after every
    coordinate so later coordinates see the refreshed rates.
    """
    K = b.shape[0]
    nr = idx.shape[0]
    for k in range(K):
        g = colsum[k] + d[k]
        h = 0.0
        for r in range(nr):
            a = A[idx[r], k]
            if a != 0.0:
                m = max(mu[r], MU_GUARD)
                q = y[r] * a / m
                g -= q
                h += q * a / m
        if c[k] != 0.0:
            bk = max(b[k], MU_GUARD)
            g -= c[k] / bk
            h += c[k] / (bk * bk)
        old = b[k]
        if h > 0.0:
            new = old - g / h
            if new < floor:
                new = floor
        elif g > 0.0:
            new = floor
        else:
            new = old
        delta = new - old
        if delta != 0.0:
            for r in range(nr):
                mu[r] += A[idx[r], k] * delta
            b[k] = new


@njit(cache=True, nogil=True)
def _fit_inplace(A, idx, y, colsum, b, c, d, method, num_inner, floor, work, z):
    if method == 0:
        for _ in range(num_inner):
            _em_step(A, idx, y, colsum, b, c, d, work, z)
    else:
        _em_step(A, idx, y, colsum, b, c, d, work, z)
        _compute_mu(A, idx, b, work)
        for _ in range(num_inner):
            _cd_sweep(A, idx, y, colsum, b, c, d, work, floor)


@njit(cache=True, nogil=True)
def _update_rows(indptr, indices, values, A, colsum, B, C, d, method, num_inner,
                 floor, start, stop):
    """Solve the subproblems for target rows start..stop-1 of B, in place.

    Row i of B is fit against row i of the sparse matrix given by
    (indptr, indices, values) with design A. C holds per-row prior terms.
    """
    K = B.shape[1]
    maxlen = 0
    for i in range(start, stop):
        maxlen = max(maxlen, indptr[i + 1] - indptr[i])
    work = np.empty(maxlen, dtype=np.float64)
    z = np.empty((3, K), dtype=np.float64)
    for i in range(start, stop):
        lo = indptr[i]
        hi = indptr[i + 1]
        _fit_inplace(A, indices[lo:hi], values[lo:hi], colsum, B[i], C[i], d,
                     method, num_inner, floor, work[: hi - lo], z)


@dataclass(frozen=True)
class PoisRegProblem:
    """One additive Poisson regression problem in sparse-slice form.

    ``A_nz`` holds the rows of the design where y > 0, ``y_nz`` the matching
    observations, and ``colsum`` the column sums of the *full* design.
    """

    A_nz: np.ndarray
    y_nz: np.ndarray
    colsum: np.ndarray

    def __post_init__(self):
        A = np.ascontiguousarray(self.A_nz, dtype=np.float64)
        if A.ndim != 2:
            raise ValueError("A must be 2-d")
        y = np.ascontiguousarray(self.y_nz, dtype=np.float64).ravel()
        colsum = np.ascontiguousarray(self.colsum, dtype=np.float64).ravel()
        if A.shape[0] != y.shape[0] or colsum.shape[0] != A.shape[1]:
            raise ValueError("inconsistent shapes for A, y and column sums")
        if np.any(A < 0) or np.any(y < 0) or np.any(colsum < 0):
            raise ValueError("A, y and column sums must be non-negative")
        object.__setattr__(self, "A_nz", A)
        object.__setattr__(self, "y_nz", y)
        object.__setattr__(self, "colsum", colsum)
        object.__setattr__(self, "_idx", np.arange(A.shape[0], dtype=np.int64))

    @classmethod
    def from_dense(cls, A, y):
        A = np.ascontiguousarray(A, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if A.ndim != 2 or A.shape[0] != y.shape[0]:
            raise ValueError("A must be 2-d with one row per observation")
        nz = np.flatnonzero(y > 0)
        return cls(A[nz], y[nz], A.sum(axis=0))

    @property
    def K(self):
        return self.A_nz.shape[1]

    @property
    def zero_columns(self):
        return np.flatnonzero(self.colsum <= 0)


def _coef(problem, b):
    b = np.array(b, dtype=np.float64).ravel()
    if b.shape[0] != problem.K:
        raise ValueError(f"expected {problem.K} coefficients, got {b.shape[0]}")
    if np.any(b < 0):
        raise ValueError("coefficients must be non-negative")
    return b


def _prior_terms(K, c=None, d=None):
    c = np.zeros(K) if c is None else np.broadcast_to(np.asarray(c, float), (K,)).copy()
    d = np.zeros(K) if d is None else np.broadcast_to(np.asarray(d, float), (K,)).copy()
    return c, d


def pois_reg_loss(problem, b):
    """Negative log-likelihood sum_i mu_i - y_i log mu_i (constants dropped)."""
    b = _coef(problem, b)
    mu = np.maximum(problem.A_nz @ b, MU_GUARD)
    loss = float(problem.colsum @ b - problem.y_nz @ np.log(mu))
    if not np.isfinite(loss):
        raise NonFiniteLossError("Poisson regression loss is not finite")
    return loss


def pois_reg_grad(problem, b):
    """Return (g, h): gradient and diagonal of the Hessian of the loss."""
    b = _coef(problem, b)
    mu = np.maximum(problem.A_nz @ b, MU_GUARD)
    q = problem.y_nz / mu
    g = problem.colsum - problem.A_nz.T @ q
    h = (problem.A_nz ** 2).T @ (q / mu)
    return g, h


def em_update(problem, b, c=None, d=None):
    """One EM step. Columns of A with zero sum keep their coefficient."""
    b = _coef(problem, b)
    c, d = _prior_terms(problem.K, c, d)
    work = np.empty(problem.y_nz.shape[0])
    z = np.empty((3, problem.K))
    _em_step(problem.A_nz, problem._idx, problem.y_nz, problem.colsum, b, c, d, work, z)
    return b


def em_update_direct(problem, b):
    """EM step written directly as b_k * (sum_i a_ik y_i / mu_i) / sum_i a_ik.

    Kept as an independent check of :func:`em_update`.
    """
    b = _coef(problem, b)
    mu = np.maximum(problem.A_nz @ b, MU_GUARD)
    out = b.copy()
    ok = problem.colsum > 0
    out[ok] = b[ok] * (problem.A_nz.T @ (problem.y_nz / mu))[ok] / problem.colsum[ok]
    return out


def cd_update(problem, b, floor=PARAM_FLOOR, c=None, d=None):
    """One sweep of coordinate-wise Newton steps (full step, projected)."""
    b = _coef(problem, b)
    c, d = _prior_terms(problem.K, c, d)
    mu = np.empty(problem.y_nz.shape[0])
    _compute_mu(problem.A_nz, problem._idx, b, mu)
    _cd_sweep(problem.A_nz, problem._idx, problem.y_nz, problem.colsum, b, c, d, mu, floor)
    return b


def fit_pois_reg(problem, b0, method="em", num_inner=4, floor=PARAM_FLOOR, c=None, d=None):
    """Approximately solve the regression from ``b0``.

    EM runs ``num_inner`` EM steps; CD runs one EM step followed by
    ``num_inner`` coordinate descent sweeps. The solve is deliberately
    incomplete; call with a large ``num_inner`` for an accurate solution.
    """
    if num_inner < 1:
        raise ValueError("num_inner must be at least 1")
    code = method_code(method)
    b = _coef(problem, b0)
    c, d = _prior_terms(problem.K, c, d)
    work = np.empty(problem.y_nz.shape[0])
    z = np.empty((3, problem.K))
    _fit_inplace(problem.A_nz, problem._idx, problem.y_nz, problem.colsum, b, c, d,
                 code, int(num_inner), float(floor), work, z)
    return b


def pois_reg_kkt(problem, b):
    """Complementarity-aware stationarity residuals |min(b_k, g_k)|."""
    b = _coef(problem, b)
    g, _ = pois_reg_grad(problem, b)
    return np.abs(np.minimum(b, g))
