"""Fit a topic model by Poisson NMF, then map the factors to topic proportions.

The Poisson NMF likelihood factors into the multinomial topic model
likelihood times Poisson terms for the document sizes, so the mapped
maximum likelihood fit has s_i equal to the document sizes.
"""

import numpy as np

from pnmftopics import FitConfig, SimSpec, check_lemma1, fit_pnmf, pnmf_to_topic, simulate_corpus

sim = simulate_corpus(SimSpec.scenario_spec("A", seed=1))
X = sim.X

cfg = FitConfig(K=6, method="cd", extrapolate=True, tol_kkt=1e-4, tol_loglik=0)
out = fit_pnmf(X, cfg, callback=lambda r: r.iter % 25 == 0 and print(
    f"iter {r.iter:4d}  loglik {r.pnmf_loglik:.4f}  kkt {r.max_kkt:.1e}  beta {r.beta:.2f}"))
print("stopped:", out.stop_reason, "after", len(out.progress), "iterations")

topic = pnmf_to_topic(out.fit.L, out.fit.F)
t = X.row_sums()
print("max |s - t| / t:", np.max(np.abs(topic.s - t) / t))
print("likelihood identity residual:", check_lemma1(X, out.fit.L, out.fit.F))

# match fitted topics to the true ones by term-frequency correlation
C = np.corrcoef(topic.Fstar.T, sim.true_fit.Fstar.T)[:6, 6:]
print("best correlation with a true topic:", np.round(C.max(axis=1), 3))
