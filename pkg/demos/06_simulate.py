"""Correlated topic model corpora for the two covariance presets."""

import numpy as np

from pnmftopics import SimSpec, preset_sigma, simulate_corpus
from pnmftopics.simulate import logistic_normal_proportions

for scenario in ("A", "B"):
    P = logistic_normal_proportions(np.zeros(6), preset_sigma(scenario), 10_000, seed=1)
    r = np.corrcoef(P[:, 4], P[:, 5])[0, 1]
    mixed = np.mean((P[:, 4] > 0.2) & (P[:, 5] > 0.2))
    print(f"{scenario}: mean largest proportion {P.max(axis=1).mean():.3f}, "
          f"corr(topic 5, topic 6) {r:+.3f}, docs with both above 0.2 {mixed:.3f}")

sim = simulate_corpus(SimSpec.scenario_spec("B", seed=1))
print("X", sim.X.shape, "nnz", sim.X.nnz, "document sizes", sim.X.row_sums().min(),
      "to", sim.X.row_sums().max())
