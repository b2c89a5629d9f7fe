"""Synthetic corpora from a correlated (logistic normal) topic model.

Document i draws eta_i ~ N(mu, Sigma) and topic proportions
l*_i = softmax(eta_i); topics f*_k ~ Dirichlet(conc * 1_m); the counts of
document i are Multinomial(t_i, L* F*^T row i). Presets ``"A"`` and ``"B"``
give the two 6-topic covariance structures used in the EM-versus-CD
comparison: in A all topics are negatively correlated, so most documents are
dominated by one topic; B adds a strong positive correlation between topics
5 and 6.
"""

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .bridge import TopicFit
from .count_matrix import CountMatrix, write_matrix_market
from .csvio import write_matrix_csv


def preset_sigma(scenario):
    scenario = str(scenario).upper()
    if scenario not in ("A", "B"):
        raise ValueError(f"unknown scenario {scenario!r}; expected 'A' or 'B'")
    S = np.full((6, 6), -2.0)
    np.fill_diagonal(S, 11.0)
    if scenario == "B":
        S[4, 5] = S[5, 4] = 8.0
    return S


@dataclass
class SimSpec:
    n: int = 100
    m: int = 400
    K: int = 6
    mu: list = None
    Sigma: list = None
    doc_size: tuple = (50, 150)
    word_freq_conc: float = 1.0
    seed: int = 1
    scenario: str = field(default=None)

    def __post_init__(self):
        if self.Sigma is None:
            self.Sigma = preset_sigma(self.scenario or "A")
        self.Sigma = np.asarray(self.Sigma, dtype=np.float64)
        if self.mu is None:
            self.mu = np.zeros(self.K)
        self.mu = np.asarray(self.mu, dtype=np.float64).ravel()
        self.doc_size = tuple(int(x) for x in np.atleast_1d(self.doc_size))
        if len(self.doc_size) == 1:
            self.doc_size = self.doc_size * 2
        self.validate()

    @classmethod
    def scenario_spec(cls, scenario, seed=1, **kw):
        return cls(Sigma=preset_sigma(scenario), scenario=str(scenario).upper(), seed=seed, **kw)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "doc_size" in d:
            d["doc_size"] = tuple(d["doc_size"])
        return cls(**d)

    def validate(self):
        if min(self.n, self.m, self.K) < 1:
            raise ValueError("n, m and K must be at least 1")
        if self.Sigma.shape != (self.K, self.K) or self.mu.shape != (self.K,):
            raise ValueError("mu and Sigma must match K")
        if not np.allclose(self.Sigma, self.Sigma.T):
            raise ValueError("Sigma must be symmetric")
        lo, hi = self.doc_size
        if lo < 1 or hi < lo:
            raise ValueError("doc_size must be a range lo..hi with 1 <= lo <= hi")
        if self.word_freq_conc <= 0:
            raise ValueError("word_freq_conc must be positive")

    def to_dict(self):
        d = asdict(self)
        d["mu"] = self.mu.tolist()
        d["Sigma"] = self.Sigma.tolist()
        d["doc_size"] = list(self.doc_size)
        return d


@dataclass
class SimOutput:
    X: CountMatrix
    true_fit: TopicFit
    spec: SimSpec


def _sqrt_cov(Sigma):
    try:
        return np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        pass
    # singular but PSD (e.g. Sigma = 0): an exact symmetric square root, so
    # no jitter noise leaks into the draws
    w, V = np.linalg.eigh(Sigma)
    if w.min() < -1e-10 * max(1.0, abs(w).max()):
        raise ValueError("Sigma is not positive semidefinite")
    return V * np.sqrt(np.clip(w, 0, None))


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.Philox(seed_or_rng))


def softmax_rows(eta):
    e = np.exp(eta - eta.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def logistic_normal_proportions(mu, Sigma, n, seed):
    """n x K topic proportions with softmax(N(mu, Sigma)) rows."""
    mu = np.asarray(mu, dtype=np.float64).ravel()
    Sigma = np.asarray(Sigma, dtype=np.float64)
    root = _sqrt_cov(Sigma)
    rng = _rng(seed)
    eta = mu + rng.standard_normal((n, mu.shape[0])) @ root.T
    return softmax_rows(eta)


def simulate_corpus(spec):
    """Draw F*, then L*, then document sizes, then counts, from one stream."""
    spec.validate()
    rng = _rng(spec.seed)
    Fstar = rng.dirichlet(np.full(spec.m, spec.word_freq_conc), size=spec.K).T
    Fstar /= Fstar.sum(axis=0)
    Lstar = logistic_normal_proportions(spec.mu, spec.Sigma, spec.n, rng)
    lo, hi = spec.doc_size
    t = rng.integers(lo, hi + 1, size=spec.n)
    Pi = Lstar @ Fstar.T
    Pi /= Pi.sum(axis=1, keepdims=True)
    counts = np.vstack([rng.multinomial(t[i], Pi[i]) for i in range(spec.n)])
    X = CountMatrix.from_dense(counts)
    truth = TopicFit(Lstar, Fstar, t.astype(np.float64), np.ones(spec.K))
    return SimOutput(X, truth, spec)


def write_simulation(sim, outdir):
    """Write X.mtx, ground-truth CSVs and a JSON sidecar; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = {
        "X": os.path.join(outdir, "X.mtx"),
        "Lstar": os.path.join(outdir, "Lstar_true.csv"),
        "Fstar": os.path.join(outdir, "Fstar_true.csv"),
        "sidecar": os.path.join(outdir, "simulation.json"),
    }
    write_matrix_market(sim.X, paths["X"], comment=f"simulated corpus, seed {sim.spec.seed}")
    write_matrix_csv(paths["Lstar"], sim.true_fit.Lstar)
    write_matrix_csv(paths["Fstar"], sim.true_fit.Fstar)
    sidecar = {
        "spec": sim.spec.to_dict(),
        "seed": sim.spec.seed,
        "files": {k: os.path.basename(v) for k, v in paths.items() if k != "sidecar"},
    }
    with open(paths["sidecar"], "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
    return paths
