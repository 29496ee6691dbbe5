"""Tour of the three dyad-value families.

Every family is a one-dimensional natural exponential family: the log
partition psi drives everything (mean = psi', variance = psi''), the
inverse mean map turns empirical averages back into natural parameters,
and the KL divergence between two parameters has a two-line closed form.
"""

import numpy as np

from sbmiss import get_family

rng = np.random.default_rng(0)

for name in ("bernoulli", "poisson", "gaussian"):
    fam = get_family(name)
    print(f"\n=== {name} ===")
    a = fam.natural_from_mean(fam.clamp_mean(0.7 if name == "bernoulli" else 2.0))
    print(f"natural parameter for the target mean: a = {a:.4f}")
    print(f"mean(a) = {fam.mean(a):.4f}, variance(a) = {fam.variance(a):.4f}")

    draws = fam.sample(a, rng, size=50_000)
    print(f"sample mean over 50k draws: {draws.mean():.4f} (theory {fam.mean(a):.4f})")
    print(f"sample var  over 50k draws: {draws.var():.4f} (theory {fam.variance(a):.4f})")

    b = fam.natural_from_mean(fam.clamp_mean(0.3 if name == "bernoulli" else 1.0))
    print(f"KL(a, b) = {float(fam.kl(a, b)):.4f}, KL(a, a) = {float(fam.kl(a, a)):.4f}")

# The clamp interval keeps estimates away from the boundary: a Bernoulli
# cell whose observed dyads are all ones still gets a finite parameter.
fam = get_family("bernoulli")
saturated = fam.natural_from_mean(fam.clamp_mean(1.0))
print(f"\nall-ones Bernoulli cell maps to a = {saturated:.2f}; "
      f"clipped into {fam.clamp_interval} -> {float(fam.clamp_natural(saturated)):.2f}")
