"""
The N=2 gasket is the interval: comparing with finite differences
=================================================================

"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from gasketvar.problem import ProblemSpec
from gasketvar.solver import two_solutions

lam = 1e-4


def centered_difference(n, u):
    # Newton for -u'' = lam (u^3 + 1) on n intervals, started from u
    h = 1.0 / n
    u = u.copy()
    for _ in range(50):
        ui = u[1:-1]
        F = (2 * ui - u[:-2] - u[2:]) / h**2 - lam * (ui**3 + 1)
        J = sp.diags([-np.ones(n - 2) / h**2, 2 / h**2 - 3 * lam * ui**2, -np.ones(n - 2) / h**2], [-1, 0, 1])
        u[1:-1] -= spla.spsolve(J.tocsc(), F)
    return u


# On the interval the renormalized energy is the usual Dirichlet sum and the
# lumped measure is h, so the discrete equations are the centered-difference ones.
for m in (5, 6, 7):
    spec = ProblemSpec.from_dict({"N": 2, "m": m, "f": "-(t^3 + 1)", "lambda": lam, "rho": 1.0})
    rep = two_solutions(spec, with_lambda_star=False)
    order = np.argsort(spec.level.coords[:, 0])
    for s in rep.solutions:
        u = s.values[order].astype(float)
        diff = np.max(np.abs(centered_difference(2**m, u) - u))
        print(f"m={m} {s.method:20s} max u={u.max():10.4f}  difference to FD solve {diff:.1e}")
