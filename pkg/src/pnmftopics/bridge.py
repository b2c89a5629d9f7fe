"""Mapping between Poisson NMF factors and multinomial topic model parameters.

The forward map takes (L, F) to (L*, F*, s, u)::

    u_k   = sum_j f_jk
    f*_jk = f_jk / u_k
    s_i   = sum_k l_ik u_k
    l*_ik = l_ik u_k / s_i

and its inverse is f_jk = u_k f*_jk, l_ik = s_i l*_ik / u_k. The Poisson NMF
likelihood factors into the topic model likelihood times independent
Poisson(t_i; s_i) terms for the document sizes, so maximum likelihood (and,
with gamma priors on F, MAP) estimates carry over in both directions.
"""

from dataclasses import dataclass

import numpy as np

from .likelihood import pnmf_loglik, poisson_logpmf, topic_loglik

__all__ = [
    "TopicFit",
    "pnmf_to_topic",
    "topic_to_pnmf",
    "topic_loglik",
    "lemma1_terms",
    "check_lemma1",
    "recover_topic_mle",
    "recover_pnmf_mle",
    "map_scale",
    "recover_pnmf_map",
    "topic_map_kkt",
]


@dataclass
class TopicFit:
    """Topic proportions ``Lstar`` (n x K), term frequencies ``Fstar`` (m x K),
    document intensities ``s`` (n) and factor scales ``u`` (K)."""

    Lstar: np.ndarray
    Fstar: np.ndarray
    s: np.ndarray
    u: np.ndarray

    @property
    def K(self):
        return self.Lstar.shape[1]

    @property
    def Pi(self):
        return self.Lstar @ self.Fstar.T

    def validate(self, tol=1e-10):
        """Raise ValueError if the sum-to-one or positivity constraints fail."""
        if np.any(self.Lstar < 0) or np.any(self.Fstar < 0):
            raise ValueError("topic model parameters must be non-negative")
        if np.any(self.u <= 0):
            raise ValueError(f"u must be positive (column {int(np.argmin(self.u))})")
        if np.any(self.s <= 0):
            raise ValueError(f"s must be positive (row {int(np.argmin(self.s))})")
        rows = np.abs(self.Lstar.sum(axis=1) - 1)
        if rows.size and rows.max() > tol:
            raise ValueError(f"row {int(np.argmax(rows))} of Lstar does not sum to one")
        cols = np.abs(self.Fstar.sum(axis=0) - 1)
        if cols.size and cols.max() > tol:
            raise ValueError(f"column {int(np.argmax(cols))} of Fstar does not sum to one")
        return self


def pnmf_to_topic(L, F):
    L = np.asarray(L, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if L.ndim != 2 or F.ndim != 2 or L.shape[1] != F.shape[1]:
        raise ValueError("L and F must be 2-d with the same number of columns")
    u = F.sum(axis=0)
    bad = np.flatnonzero(~(u > 0))
    if bad.size:
        raise ValueError(f"column {int(bad[0])} of F has zero sum")
    Fstar = F / u
    Lu = L * u
    s = Lu.sum(axis=1)
    bad = np.flatnonzero(~(s > 0))
    if bad.size:
        raise ValueError(f"row {int(bad[0])} of L gives s = 0")
    Lstar = Lu / s[:, None]
    return TopicFit(Lstar, Fstar, s, u)


def topic_to_pnmf(fit):
    u = np.asarray(fit.u, dtype=np.float64)
    bad = np.flatnonzero(~(u > 0))
    if bad.size:
        raise ValueError(f"u[{int(bad[0])}] must be positive")
    F = fit.Fstar * u
    L = fit.Lstar * (np.asarray(fit.s, dtype=np.float64)[:, None] / u)
    return L, F


def lemma1_terms(X, L, F):
    """Return (pnmf_loglik, topic_loglik, sum_i log Poisson(t_i; s_i))."""
    fit = pnmf_to_topic(L, F)
    t = X.row_sums()
    return (
        pnmf_loglik(X, L, F),
        topic_loglik(X, fit.Lstar, fit.Fstar),
        float(poisson_logpmf(t, fit.s).sum()),
    )


def check_lemma1(X, L, F):
    """Absolute gap in the likelihood factorization; zero up to rounding."""
    pnmf, topic, pois = lemma1_terms(X, L, F)
    return abs(pnmf - topic - pois)


def recover_topic_mle(L, F):
    return pnmf_to_topic(L, F)


def recover_pnmf_mle(fit, t, u_choice):
    """Poisson NMF MLE from a topic model MLE, with s = t and any u > 0."""
    t = np.asarray(t, dtype=np.float64)
    if t.shape[0] != fit.Lstar.shape[0]:
        raise ValueError("document sizes do not match the number of rows of Lstar")
    if np.any(t <= 0):
        raise ValueError(f"document {int(np.argmin(t))} is empty; drop it first")
    u = np.broadcast_to(np.asarray(u_choice, dtype=np.float64), (fit.K,)).copy()
    return topic_to_pnmf(TopicFit(fit.Lstar, fit.Fstar, t, u))


def _prior_arrays(alpha, beta, m, K):
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (m, K))
    beta = np.broadcast_to(np.asarray(beta, dtype=np.float64), (K,))
    if np.any(alpha <= 1):
        j, k = np.argwhere(alpha <= 1)[0]
        raise ValueError(
            f"alpha[{j}, {k}] = {alpha[j, k]} but the MAP correspondence needs alpha > 1"
        )
    if np.any(beta <= 0):
        raise ValueError("beta must be positive")
    return alpha, beta


def map_scale(alpha, beta, m, K):
    """u_k = sum_j (alpha_jk - 1) / beta_k."""
    alpha, beta = _prior_arrays(alpha, beta, m, K)
    return (alpha - 1).sum(axis=0) / beta


def recover_pnmf_map(fit, t, alpha, beta):
    """Poisson NMF MAP estimate (gamma prior on F) from a topic model MAP."""
    m, K = fit.Fstar.shape
    return recover_pnmf_mle(fit, t, map_scale(alpha, beta, m, K))


def topic_map_kkt(X, fit, alpha=None):
    """Stationarity residuals of a topic model (MAP) fit on the simplex.

    The multiplier of each sum-to-one constraint is eliminated in closed
    form; residuals are scaled by it, so they are dimensionless. Without
    ``alpha`` the MLE conditions are checked. Returns (res_L, res_F, max).
    """
    Lstar, Fstar = fit.Lstar, fit.Fstar
    m, K = Fstar.shape
    csr = X.csr
    coo = csr.tocoo()
    pi = np.einsum("pk,pk->p", Lstar[coo.row], Fstar[coo.col])
    w = coo.data / np.maximum(pi, 1e-15)
    # sum_j x_ij f*_jk / pi_ij and sum_i x_ij l*_ik / pi_ij
    W = csr.copy().astype(np.float64)
    W.data = w
    gl = W @ Fstar
    gf = W.T @ Lstar
    t = X.row_sums().astype(np.float64)
    res_L = np.abs(np.minimum(Lstar, 1.0 - gl / t[:, None]))
    if alpha is not None:
        a1 = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (m, K)) - 1.0
        gf = gf + a1 / np.maximum(Fstar, 1e-300)
    nu = (Fstar * gf).sum(axis=0)
    res_F = np.abs(np.minimum(Fstar, 1.0 - gf / nu))
    return res_L, res_F, float(max(res_L.max(initial=0.0), res_F.max(initial=0.0)))
