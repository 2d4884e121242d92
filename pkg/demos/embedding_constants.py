"""
Hoelder exponent, Morrey constant and the sup estimate
======================================================

"""

import numpy as np

from gasketvar.embedding import BRANCH_SMALL, constants, kappa, morrey_ratios
from gasketvar.energy import energy
from gasketvar.gasket import build_level
from gasketvar.verify import random_harmonic

# sigma shrinks as N grows; the Morrey constant is 2N+3.
for N in range(2, 7):
    c = constants(N)
    print(f"N={N}: sigma={c.sigma:.6f}  2N+3={c.morrey_constant}")

# A small positive weight inflates kappa; at 1/(2N+3)^2 it blows up.
for l1 in (0.0, 1 / 324, 1 / 162, 1 / 100, 1 / 82):
    print(f"integral |alpha| = {l1:.5f}  ->  kappa = {kappa(3, BRANCH_SMALL, l1):.4f}")

# Random functions that are harmonic above a coarse level: compare the
# Hoelder ratio and max|u| against 9 sqrt(W).
rng = np.random.default_rng(1)
L = build_level(3, 4)
vals, coarse = random_harmonic(3, 4, 200, rng)
ratio = morrey_ratios(vals, L)
root = np.sqrt([energy(v, L) for v in vals])
print("largest ratio / (9 sqrt W):", np.max(ratio / (9 * root)))
print("largest max|u| / (9 sqrt W):", np.max(np.abs(vals).max(axis=1) / (9 * root)))
