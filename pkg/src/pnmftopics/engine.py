"""Alternating Poisson regression for Poisson NMF.

Each outer iteration refits every row of L against the rows of X (F fixed),
then every row of F against the columns of X (L fixed). Each row is an
independent additive Poisson regression, solved approximately with a few EM
or coordinate descent steps. After the two block updates the factors are
rescaled, and optionally an extrapolated iterate is tried.
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional

import numpy as np

from . import pois_reg
from .bridge import pnmf_to_topic
from .likelihood import pnmf_loglik, pnmf_loss, rates_nz, topic_loglik
from .pois_reg import PARAM_FLOOR, NonFiniteLossError, method_code

log = logging.getLogger(__name__)

THREADS_ENV = "PNMFTOPICS_THREADS"


def default_threads():
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class PnmfFit:
    L: np.ndarray
    F: np.ndarray

    @property
    def K(self):
        return self.L.shape[1]

    def copy(self):
        return PnmfFit(self.L.copy(), self.F.copy())

    @property
    def rates(self):
        return self.L @ self.F.T


@dataclass(frozen=True)
class GammaPrior:
    """Independent f_jk ~ Gamma(alpha_jk, beta_k) (shape, inverse scale)."""

    alpha: object
    beta: object

    def arrays(self, m, K):
        alpha = np.broadcast_to(np.asarray(self.alpha, dtype=np.float64), (m, K))
        beta = np.broadcast_to(np.asarray(self.beta, dtype=np.float64), (K,))
        if np.any(alpha <= 1):
            raise ValueError("gamma prior shape alpha must exceed 1")
        if np.any(beta <= 0):
            raise ValueError("gamma prior inverse scale beta must be positive")
        return np.ascontiguousarray(alpha), np.ascontiguousarray(beta)

    def penalty(self, F):
        """-log prior density of F, up to a constant."""
        alpha, beta = self.arrays(*F.shape)
        return float((beta * F).sum() - ((alpha - 1) * np.log(np.maximum(F, 1e-300))).sum())


@dataclass
class FitConfig:
    K: int
    method: str = "cd"
    extrapolate: bool = False
    num_outer: int = 1000
    num_inner: int = 4
    init: str = "random"
    seed: int = 1
    prewarm: int = 20
    tol_loglik: float = 1e-8
    tol_kkt: float = 1e-3
    param_floor: float = PARAM_FLOOR
    prior: Optional[GammaPrior] = None
    threads: int = 1
    beta0: float = 0.5
    beta_max: float = 0.99
    gamma: float = 1.05
    eta: float = 1.5

    def validate(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.num_inner < 1:
            raise ValueError("num_inner must be at least 1")
        if self.num_outer < 0 or self.prewarm < 0:
            raise ValueError("iteration counts must be non-negative")
        method_code(self.method)
        if self.init not in ("random", "provided"):
            raise ValueError("init must be 'random' or 'provided'")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if not (0 <= self.beta0 <= self.beta_max < 1):
            raise ValueError("need 0 <= beta0 <= beta_max < 1")
        if self.gamma < 1 or self.eta <= 1:
            raise ValueError("need gamma >= 1 and eta > 1")
        return self


@dataclass
class ProgressRecord:
    iter: int
    elapsed: float
    pnmf_loglik: float
    topic_loglik: float
    loss: float
    max_kkt: float
    extrapolated: bool
    beta: float
    # objective of the plain (non-extrapolated) iterate of this iteration
    plain_objective: float = float("nan")
    objective: float = float("nan")


@dataclass
class ExtrapolationState:
    beta: float = 0.5
    beta_max: float = 0.99
    gamma: float = 1.05
    eta: float = 1.5
    accepted: bool = False
    plain_objective: float = float("nan")
    objective: float = float("nan")


class FitOutcome(NamedTuple):
    fit: PnmfFit
    progress: List[ProgressRecord]
    stop_reason: str


# ---------------------------------------------------------------------------
# block updates


def _run_rows(kernel_args, nrows, threads, executor):
    if threads <= 1 or executor is None or nrows < 2:
        pois_reg._update_rows(*kernel_args, 0, nrows)
        return
    nchunks = min(nrows, 4 * threads)
    bounds = np.linspace(0, nrows, nchunks + 1).astype(np.int64)
    futures = [
        executor.submit(pois_reg._update_rows, *kernel_args, int(lo), int(hi))
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    for fut in futures:
        fut.result()


def update_block(X, fixed, target, which, method="cd", num_inner=4, prior=None,
                 floor=PARAM_FLOOR, threads=1, executor=None):
    """Refit every row of ``target`` with ``fixed`` as the design.

    ``which`` is ``"L"`` (rows of X, design F) or ``"F"`` (columns of X,
    design L). The gamma prior, if given, applies only when updating F.
    Returns a new array; the floor is not applied here.
    """
    fixed = np.ascontiguousarray(fixed, dtype=np.float64)
    B = np.array(target, dtype=np.float64, order="C")
    K = B.shape[1]
    if which == "L":
        indptr, indices, values = X.row_indptr, X.row_indices, X.row_values
        expect = (X.n, X.m)
    elif which == "F":
        indptr, indices, values = X.col_indptr, X.col_indices, X.col_values
        expect = (X.m, X.n)
    else:
        raise ValueError("which must be 'L' or 'F'")
    if B.shape[0] != expect[0] or fixed.shape != (expect[1], K):
        raise ValueError("factor shapes do not match X")
    if prior is not None and which == "F":
        alpha, beta = prior.arrays(X.m, K)
        C = np.ascontiguousarray(alpha - 1.0)
        d = beta
    else:
        C = np.zeros_like(B)
        d = np.zeros(K)
    colsum = fixed.sum(axis=0)
    args = (indptr, indices, values, fixed, colsum, B, C, d,
            method_code(method), int(num_inner), float(floor))
    _run_rows(args, B.shape[0], threads, executor)
    return B


def rescale(L, F):
    """Balance column means of L and F without changing L F^T.

    Returns (L, F, skipped) where ``skipped`` lists columns with a zero mean.
    """
    L = np.array(L, dtype=np.float64)
    F = np.array(F, dtype=np.float64)
    ml = L.mean(axis=0)
    mf = F.mean(axis=0)
    ok = (ml > 0) & (mf > 0)
    dk = np.ones(L.shape[1])
    dk[ok] = np.sqrt(mf[ok] / ml[ok])
    L *= dk
    F /= dk
    return L, F, np.flatnonzero(~ok)


# ---------------------------------------------------------------------------
# diagnostics


def kkt_residuals(X, L, F, prior=None):
    """Gradients of the loss and the max complementarity residual.

    Returns (Gamma, Omega, max_kkt): Gamma = (1 - U) F and Omega = (1 - U)^T L
    with u_ij = x_ij / lambda_ij, plus the gradient of the negative log prior
    on F when ``prior`` is given. The residual of a parameter p with gradient
    g is |min(p, g)|.
    """
    L = np.ascontiguousarray(L, dtype=np.float64)
    F = np.ascontiguousarray(F, dtype=np.float64)
    lam = rates_nz(X, L, F)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = X.row_values / lam
    if not np.all(np.isfinite(u)):
        p = int(np.flatnonzero(~np.isfinite(u))[0])
        i = int(np.searchsorted(X.row_indptr, p, side="right") - 1)
        raise NonFiniteLossError(f"zero rate at nonzero (i, j) = ({i}, {int(X.row_indices[p])})")
    U = X.csr.astype(np.float64)
    U.data = u
    Gamma = F.sum(axis=0)[None, :] - U @ F
    Omega = L.sum(axis=0)[None, :] - U.T @ L
    if prior is not None:
        alpha, beta = prior.arrays(*F.shape)
        Omega = Omega + beta - (alpha - 1) / F
    res = max(
        np.abs(np.minimum(L, Gamma)).max(initial=0.0),
        np.abs(np.minimum(F, Omega)).max(initial=0.0),
    )
    return Gamma, Omega, float(res)


def objective(X, L, F, prior=None):
    """Loss plus the negative log prior on F (when a prior is used)."""
    value = pnmf_loss(X, L, F)
    if prior is not None:
        value += prior.penalty(F)
    return value


# ---------------------------------------------------------------------------
# extrapolation


def extrapolate_step(current, previous, state, X, prior=None, floor=PARAM_FLOOR):
    """Try current + beta (current - previous); keep it only if it helps.

    ``current`` is the iterate just produced by the block updates and
    ``previous`` the one produced in the preceding outer iteration.
    """
    plain_obj = objective(X, current.L, current.F, prior)
    beta = state.beta
    if beta > 0:
        cand = PnmfFit(
            np.maximum(floor, current.L + beta * (current.L - previous.L)),
            np.maximum(floor, current.F + beta * (current.F - previous.F)),
        )
        try:
            cand_obj = objective(X, cand.L, cand.F, prior)
        except NonFiniteLossError:
            cand_obj = np.inf
    else:
        cand, cand_obj = current, plain_obj
    if beta == 0 or cand_obj <= plain_obj:
        new_state = replace(state, beta=min(state.beta_max, state.gamma * beta),
                            accepted=True, plain_objective=plain_obj, objective=cand_obj)
        return cand, new_state
    new_state = replace(state, beta=beta / state.eta, accepted=False,
                        plain_objective=plain_obj, objective=plain_obj)
    return current, new_state


# ---------------------------------------------------------------------------
# fitting


def _outer_update(X, fit, method, num_inner, prior, floor, threads, executor, do_rescale=True):
    L = update_block(X, fit.F, fit.L, "L", method, num_inner, None, floor, threads, executor)
    np.maximum(L, floor, out=L)
    F = update_block(X, L, fit.F, "F", method, num_inner, prior, floor, threads, executor)
    np.maximum(F, floor, out=F)
    if do_rescale:
        L, F, _ = rescale(L, F)
    return PnmfFit(L, F)


def random_init(X, K, seed):
    """Uniform (0, 1] factors scaled so that mean(L F^T) = mean(X)."""
    if K < 1:
        raise ValueError("K must be at least 1")
    rng = np.random.Generator(np.random.Philox(seed))
    L = 1.0 - rng.random((X.n, K))
    F = 1.0 - rng.random((X.m, K))
    target = X.total() / (X.n * X.m)
    current = (L.sum(axis=0) @ F.sum(axis=0)) / (X.n * X.m)
    c = np.sqrt(target / current)
    return PnmfFit(L * c, F * c)


def init_fit(X, K, seed=1, prewarm=0, prior=None, floor=PARAM_FLOOR, threads=1):
    """Seeded random initialization followed by ``prewarm`` EM iterations."""
    fit = random_init(X, K, seed)
    if prewarm:
        fit = run_prewarm(X, fit, prewarm, prior=prior, floor=floor, threads=threads)
    return fit


def run_prewarm(X, fit, iters, prior=None, floor=PARAM_FLOOR, threads=1, num_inner=4):
    with _executor(threads) as ex:
        for _ in range(iters):
            fit = _outer_update(X, fit, "em", num_inner, prior, floor, threads, ex,
                                do_rescale=prior is None)
    return fit


class _executor:
    def __init__(self, threads):
        self.pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def __enter__(self):
        return self.pool

    def __exit__(self, *exc):
        if self.pool is not None:
            self.pool.shutdown()


def _record(X, fit, it, elapsed, prior, extrapolated, beta, plain_obj):
    loss = pnmf_loss(X, fit.L, fit.F)
    topic = pnmf_to_topic(fit.L, fit.F)
    obj = loss + (prior.penalty(fit.F) if prior is not None else 0.0)
    _, _, max_kkt = kkt_residuals(X, fit.L, fit.F, prior)
    return ProgressRecord(
        iter=it,
        elapsed=elapsed,
        pnmf_loglik=-loss - X.log_factorial_sum,
        topic_loglik=topic_loglik(X, topic.Lstar, topic.Fstar),
        loss=loss,
        max_kkt=max_kkt,
        extrapolated=extrapolated,
        beta=beta,
        plain_objective=obj if np.isnan(plain_obj) else plain_obj,
        objective=obj,
    )


def fit_pnmf(X, config, init=None, callback=None):
    """Fit Poisson NMF by alternating Poisson regression.

    Parameters
    ----------
    X : CountMatrix
    config : FitConfig
    init : PnmfFit, optional
        Starting point. Required when ``config.init == "provided"``; the
        prewarm phase is skipped in that case.
    callback : callable, optional
        Called with each ProgressRecord.

    Returns
    -------
    FitOutcome
        ``(fit, progress, stop_reason)``; stop_reason is one of
        ``"num_outer"``, ``"tol_loglik"``, ``"tol_kkt"`` or ``"nonfinite"``.
    """
    config.validate()
    if X.nnz == 0:
        raise ValueError("cannot fit an empty count matrix")
    K, floor, prior = config.K, config.param_floor, config.prior
    if config.init == "provided" or init is not None:
        if init is None:
            raise ValueError("init='provided' requires an initial fit")
        if init.L.shape != (X.n, K) or init.F.shape != (X.m, K):
            raise ValueError("initial factors do not match X and K")
        fit = PnmfFit(np.maximum(floor, np.array(init.L, dtype=np.float64)),
                      np.maximum(floor, np.array(init.F, dtype=np.float64)))
    else:
        fit = init_fit(X, K, config.seed, config.prewarm, prior, floor, config.threads)

    do_rescale = prior is None
    state = ExtrapolationState(config.beta0, config.beta_max, config.gamma, config.eta)
    progress = []
    prev_ll = pnmf_loglik(X, fit.L, fit.F)
    prev_plain = fit
    stop = "num_outer"
    start = time.monotonic()
    last = start
    with _executor(config.threads) as ex:
        for it in range(1, config.num_outer + 1):
            try:
                plain = _outer_update(X, fit, config.method, config.num_inner, prior,
                                      floor, config.threads, ex, do_rescale)
                extrapolated, plain_obj = False, float("nan")
                new = plain
                if config.extrapolate:
                    new, state = extrapolate_step(plain, prev_plain, state, X, prior, floor)
                    extrapolated = new is not plain
                    plain_obj = state.plain_objective
                now = time.monotonic()
                # strictly increasing timestamps even on coarse clocks
                elapsed = max(now - start, (last - start) + 1e-9)
                last = start + elapsed
                rec = _record(X, new, it, elapsed, prior, extrapolated,
                              state.beta if config.extrapolate else 0.0, plain_obj)
            except NonFiniteLossError as err:
                log.error("iteration %d: %s; returning the last valid iterate", it, err)
                stop = "nonfinite"
                break
            if not (np.isfinite(rec.loss) and np.isfinite(rec.max_kkt)):
                log.error("iteration %d: non-finite diagnostics", it)
                stop = "nonfinite"
                break
            prev_plain = plain
            fit = new
            progress.append(rec)
            if callback is not None:
                callback(rec)
            change = abs(rec.pnmf_loglik - prev_ll) / max(abs(prev_ll), 1e-300)
            prev_ll = rec.pnmf_loglik
            if rec.max_kkt < config.tol_kkt:
                stop = "tol_kkt"
                break
            if change < config.tol_loglik:
                stop = "tol_loglik"
                break
    return FitOutcome(fit, progress, stop)
