"""
Noise schedules and the Bernoulli kernels
=========================================

Every bit drifts toward a fair coin.  After t steps a clean bit z0 is
Bernoulli(k_t z0 + b_t), and the linear and cosine schedules differ only in
how fast k_t falls from 1 to 0.
"""

import numpy as np

from bld import oracle
from bld.kernel import bayes_posterior_params, reverse_mixture_params
from bld.schedule import build_schedule

# The linear schedule with four steps, row by row.
print(build_schedule("linear", 4).to_csv())

# Cosine keeps more signal early and removes it faster near the end.
lin, cos = build_schedule("linear", 16), build_schedule("cosine", 16)
for t in (0, 4, 8, 12, 16):
    print(f"t={t:2d}  linear k={lin.k[t]:.3f}  cosine k={cos.k[t]:.3f}")

# Composing the one-step 2x2 transition matrices reproduces the marginal.
s = build_schedule("linear", 4)
print("\nP(z_2 = 1 | z_0 = 1) from matrix products:", oracle.compose_marginal(s, 2)[1, 1])

# The posterior over z_{t-1} when both z_t and z_0 are known.
one = np.array([1])
print("P(z_1 = 1 | z_2 = 1, z_0 = 1) =", bayes_posterior_params(one, one, 2, s)[0], "(35/36)")

# With only a belief about z_0 the reverse step mixes the two posteriors.
for p in (0.0, 0.25, 0.5, 0.75, 1.0):
    fast = reverse_mixture_params(one, np.array([p]), 2, s)[0]
    print(f"p(z0=1)={p:.2f}  P(z_1=1 | z_2=1)={fast:.6f}  enumeration={oracle.exact_reverse(1, p, 2, s):.6f}")
