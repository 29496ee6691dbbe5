"""Observation designs and what they do to a graph.

Random dyad and random node sampling never look at the values, so the
likelihood of the observed part is all an estimator needs.  Double
standard sampling observes present edges more often than absent ones:
the observed density is biased and the design is not ignorable.
"""

import math

import numpy as np

from sbmiss import MaskDesign, check_no_isolated_node, rho_hat, sample_mask
from sbmiss.model import params_from_means
from sbmiss.simulate import simulate_observed

rng = np.random.default_rng(1)
n = 200

print("=== random dyad sampling ===")
mask = sample_mask(MaskDesign.random_dyad(0.3), n, rng)
print(f"design rho = 0.3, observed fraction = {rho_hat(mask):.4f}")

print("\n=== random node sampling ===")
mask = sample_mask(MaskDesign.random_node(0.3), n, rng)
print(f"selected nodes: {int(mask.node_selection.sum())} of {n}")
print(f"effective dyad rate = {rho_hat(mask):.4f} "
      f"(theory 1-(1-rho)^2 = {1 - 0.7**2:.4f})")

print("\n=== double standard sampling is not ignorable ===")
params = params_from_means("bernoulli", [0.5, 0.5], [[0.7, 0.2], [0.2, 0.7]])
g, truth = simulate_observed(params, MaskDesign.double_standard(0.2, 0.9), 120, seed=7)
off = ~np.eye(120, dtype=bool)
print(f"full graph density     = {truth.full_values[off].mean():.4f}")
print(f"observed dyad density  = {g.values[g.mask.observed].mean():.4f}  <- inflated")

print("\n=== isolated nodes near the observability threshold ===")
for coef in (6.0, 0.5):
    n_big = 400
    rho = coef * math.log(n_big) / n_big
    bad = sum(
        not check_no_isolated_node(sample_mask(MaskDesign.random_dyad(rho), n_big, rng))
        for _ in range(50)
    )
    print(f"rho = {coef} log(n)/n = {rho:.4f}: {bad}/50 replicates have an isolated node")
