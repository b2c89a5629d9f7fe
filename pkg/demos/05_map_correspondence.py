"""MAP estimates carry over between the two models.

With a Gamma(alpha, beta) prior on F the Poisson NMF MAP fit maps to a
topic model MAP fit, and back again with u_k = sum_j (alpha_jk - 1) / beta_k.
Choosing alpha = 2 and beta = m makes u_k = 1.
"""

import numpy as np

from pnmftopics import FitConfig, GammaPrior, SimSpec, fit_pnmf, kkt_residuals, simulate_corpus
from pnmftopics.bridge import map_scale, pnmf_to_topic, recover_pnmf_map, topic_map_kkt

Sigma = np.full((3, 3), -1.0) + 5.0 * np.eye(3)
X, _, _ = simulate_corpus(SimSpec(n=50, m=100, K=3, Sigma=Sigma, seed=10)).X.drop_empty()
alpha, beta = 2.0, float(X.m)
prior = GammaPrior(alpha, beta)

out = fit_pnmf(X, FitConfig(K=3, prior=prior, num_outer=5000, tol_kkt=1e-6, tol_loglik=0))
print("PNMF MAP kkt:", kkt_residuals(X, out.fit.L, out.fit.F, prior)[2])

topic = pnmf_to_topic(out.fit.L, out.fit.F)
print("u from the fit:", topic.u, " u from the prior:", map_scale(alpha, beta, X.m, 3))
print("topic MAP kkt:", topic_map_kkt(X, topic, alpha)[2])
print("topic MLE kkt (expected to be large):", topic_map_kkt(X, topic)[2])

L, F = recover_pnmf_map(topic, X.row_sums(), alpha, beta)
print("recovered PNMF MAP kkt:", kkt_residuals(X, L, F, prior)[2])
