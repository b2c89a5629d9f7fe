"""One additive Poisson regression, the subproblem behind every row update.

Minimise sum_i mu_i - y_i log mu_i with mu = A b and b >= 0, by EM and by
coordinate descent, and watch the loss and the KKT residual fall.
"""

import numpy as np

from pnmftopics import PoisRegProblem, fit_pois_reg
from pnmftopics.pois_reg import pois_reg_kkt, pois_reg_loss

rng = np.random.default_rng(0)
A = rng.uniform(0, 1, (200, 4))
b_true = np.array([3.0, 0.0, 1.0, 5.0])
y = rng.poisson(A @ b_true)

# only rows with y > 0 and the column sums of A are needed
prob = PoisRegProblem.from_dense(A, y)
print(f"{len(y)} observations, {len(prob.y_nz)} nonzero")

for method in ("em", "cd"):
    b = np.ones(4)
    print(method)
    for sweep in range(1, 31):
        b = fit_pois_reg(prob, b, method=method, num_inner=1)
        if sweep in (1, 3, 10, 30):
            print(f"  {sweep:3d}  loss {pois_reg_loss(prob, b):.6f}  "
                  f"max kkt {pois_reg_kkt(prob, b).max():.2e}")
    print("  estimate", np.round(b, 3))
