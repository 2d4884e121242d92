"""
Building gasket levels and extending functions harmonically
===========================================================

"""

import numpy as np

from gasketvar.energy import DiscreteFunction, energy, extend_to, harmonic_extension
from gasketvar.gasket import build_level

# A level V_m of the N-corner gasket is built from integer barycentric keys,
# so vertices shared by neighbouring cells are merged exactly.
for m in range(6):
    L = build_level(3, m)
    print(f"m={m}: {L.n_vertices:5d} vertices, {L.edges.shape[0]:5d} edges, measure sums to {L.measure.sum():.15f}")

# The N=2 gasket is just the unit interval with a dyadic grid.
print(np.sort(build_level(2, 3).coords[:, 0]))

# Harmonic extension: put 1 on one corner of the triangle, 0 on the others,
# and look at the three new midpoint values.
L0 = build_level(3, 0)
u = np.zeros(3)
u[L0.boundary[0]] = 1.0
ext = harmonic_extension(DiscreteFunction(L0, u))
print("midpoint values:", np.round(np.sort(ext.values)[::-1][1:4], 12))

# The renormalized energy does not change under harmonic extension.
rng = np.random.default_rng(0)
L = build_level(3, 2)
f = DiscreteFunction(L, rng.standard_normal(L.n_vertices))
for k in range(2, 7):
    g = extend_to(f, k)
    print(f"W_{k} = {energy(g):.12f}")
