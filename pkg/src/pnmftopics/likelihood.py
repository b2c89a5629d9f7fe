"""Likelihoods of the Poisson NMF and multinomial topic models.

All evaluations visit only the nonzeros of X; the sum over all (i, j) of the
Poisson rates is computed as (column sums of L) . (column sums of F).
"""

import numpy as np
from numba import njit
from scipy.special import gammaln

from .pois_reg import MU_GUARD, NonFiniteLossError

#: probabilities are floored here before taking logs
PI_FLOOR = 1e-15


@njit(cache=True, nogil=True)
def _rates_nz(indptr, indices, L, F, out):
    K = L.shape[1]
    for i in range(indptr.shape[0] - 1):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            s = 0.0
            for k in range(K):
                s += L[i, k] * F[j, k]
            out[p] = s


def rates_nz(X, L, F):
    """lambda_ij = (L F^T)_ij at the nonzeros of X, in row-major order."""
    L, F = _check_factors(X, L, F)
    out = np.empty(X.nnz)
    _rates_nz(X.row_indptr, X.row_indices, L, F, out)
    return out


def _check_factors(X, L, F):
    L = np.ascontiguousarray(L, dtype=np.float64)
    F = np.ascontiguousarray(F, dtype=np.float64)
    if L.ndim != 2 or F.ndim != 2:
        raise ValueError("L and F must be 2-d")
    if L.shape[0] != X.n or F.shape[0] != X.m or L.shape[1] != F.shape[1]:
        raise ValueError(
            f"factor shapes {L.shape} and {F.shape} do not match a {X.n}x{X.m} matrix"
        )
    return L, F


def _raise_nonfinite(X, terms):
    bad = np.flatnonzero(~np.isfinite(terms))
    if bad.size:
        p = int(bad[0])
        i = int(np.searchsorted(X.row_indptr, p, side="right") - 1)
        j = int(X.row_indices[p])
        raise NonFiniteLossError(f"non-finite likelihood term at (i, j) = ({i}, {j})")
    raise NonFiniteLossError("non-finite likelihood")


def pnmf_loss(X, L, F):
    """sum_ij lambda_ij - x_ij log lambda_ij, with lambda = L F^T."""
    L, F = _check_factors(X, L, F)
    lam = np.empty(X.nnz)
    _rates_nz(X.row_indptr, X.row_indices, L, F, lam)
    terms = X.row_values * np.log(np.maximum(lam, MU_GUARD))
    loss = float(L.sum(axis=0) @ F.sum(axis=0) - terms.sum())
    if not np.isfinite(loss):
        _raise_nonfinite(X, terms)
    return loss


def pnmf_loglik(X, L, F):
    """Full Poisson log-likelihood log p(X | L, F)."""
    return -pnmf_loss(X, L, F) - X.log_factorial_sum


def topic_loglik(X, Lstar, Fstar):
    """Multinomial topic model log-likelihood with Pi = L* F*^T."""
    Lstar, Fstar = _check_factors(X, Lstar, Fstar)
    pi = np.empty(X.nnz)
    _rates_nz(X.row_indptr, X.row_indices, Lstar, Fstar, pi)
    t = X.row_sums().astype(np.float64)
    terms = X.row_values * np.log(np.maximum(pi, PI_FLOOR))
    ll = float(gammaln(t + 1.0).sum() - X.log_factorial_sum + terms.sum())
    if not np.isfinite(ll):
        _raise_nonfinite(X, terms)
    return ll


def poisson_logpmf(t, s):
    """log Poisson(t; s) elementwise, with the 0 log 0 = 0 convention."""
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logs = np.where(t > 0, t * np.log(s), 0.0)
    return logs - s - gammaln(t + 1.0)
