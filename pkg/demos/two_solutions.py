"""
Two solutions of the model problem on the triangle gasket
=========================================================

"""

import numpy as np

from gasketvar.problem import ProblemSpec, admissibility
from gasketvar.solver import DiscreteFunctional, lowest_direction, two_solutions

# f(x, t) = -(t^3 + 1), no weight, level 4.
cfg = {"N": 3, "m": 4, "f": "-(t^3 + 1)", "lambda": 1e-4, "rho": 1.0, "ar": {"nu": 3, "r0": 2}}
spec = ProblemSpec.from_dict(cfg)

# Hypotheses, kappa and the admissible lambda range.
rep = admissibility(spec)
print("checks:", [(c.name, c.passed) for c in rep.checks])
print(f"kappa={rep.kappa}  lambda_bound(rho=1)={rep.lambda_bound:.6e}  lambda*={rep.lambda_star.value:.6e}")

# The functional is unbounded below along the lowest eigen-direction.
fn = DiscreteFunctional.from_spec(spec)
u0 = lowest_direction(fn)
for k in range(0, 13, 2):
    print(f"J(2^{k:<2d} u0) = {fn.J(2.0**k * u0): .4e}")

# A small minimizer inside the ball and a large mountain-pass solution.
report = two_solutions(spec)
for s in report.solutions:
    print(f"{s.method:20s} J={s.J: .6e}  |u|_alpha={s.norm_alpha:.4e}  max u={np.max(s.values.astype(float)):.4f}"
          f"  residual={s.residual:.1e}")
