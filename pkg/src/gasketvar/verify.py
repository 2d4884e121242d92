"""Randomized invariant suites behind the ``verify`` subcommand.

Test functions are generated at a random coarser level and carried to the
working level by harmonic extension, so the limit energy W equals W_m.
Every suite returns a :class:`SuiteResult`.  ``run_all(fault_factor=...)``
swaps in a wrong scaling factor for mutation testing.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .embedding import constants, morrey_constant, morrey_ratios
from .energy import prolongation, renormalization
from .gasket import build_level, refinement_map


@dataclass
class SuiteResult:
    name: str
    trials: int
    violations: int
    worst: float  # largest lhs/rhs ratio seen (<= 1 means all satisfied)
    detail: str = ""
    warnings: list = field(default_factory=list)

    @property
    def passed(self):
        return self.violations == 0

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "violations": self.violations,
            "worst_ratio": self.worst,
            "detail": self.detail,
            "warnings": list(self.warnings),
        }


def _energies(values, level, factor):
    d = values[:, level.edges[:, 0]] - values[:, level.edges[:, 1]]
    return factor * np.einsum("ij,ij->i", d, d)


class _Hierarchy:
    """Levels 0..m with prolongation operators, built once per suite run."""

    def __init__(self, N, m):
        self.levels = [build_level(N, 0)]
        self.P = []
        for k in range(1, m + 1):
            P, fine = prolongation(self.levels[-1], build_level(N, k))
            self.levels.append(fine)
            self.P.append(P)

    def lift(self, values, start):
        """values (trials, n_start) on level ``start`` -> top level."""
        out = values
        for P in self.P[start:]:
            out = (P @ out.T).T
        return out


def random_harmonic(N, m, trials, rng, zero_boundary=True, hierarchy=None):
    """``trials`` random functions on V_m, harmonic beyond a random coarse level.

    Coarse levels are drawn from 1..m-1 (0 when m <= 1).  Returns (values,
    coarse_levels); values has shape (trials, |V_m|).
    """
    H = hierarchy or _Hierarchy(N, m)
    top = H.levels[m]
    out = np.zeros((trials, top.n_vertices))
    lo, hi = (1, m - 1) if m >= 2 else (0, 0)
    coarse = rng.integers(lo, hi + 1, size=trials)
    for c in np.unique(coarse):
        sel = np.flatnonzero(coarse == c)
        lev = H.levels[c]
        v = rng.standard_normal((sel.size, lev.n_vertices))
        v *= rng.lognormal(0.0, 1.0, size=(sel.size, 1))
        if zero_boundary:
            v[:, lev.boundary] = 0.0
        out[sel] = H.lift(v, c)
    return out, coarse


def _empty(name, trials):
    msg = f"{name}: trials=0, nothing checked (vacuous pass)"
    warnings.warn(msg, stacklevel=3)
    return SuiteResult(name, 0, 0, 0.0, "vacuous", [msg])


def morrey_suite(N, m, trials=1000, seed=0, renormalization_factor=None, hierarchy=None):
    """Hoelder ratio <= (2N+3) sqrt(W) and max|u| <= (2N+3) sqrt(W)."""
    name = "morrey-sup"
    if trials == 0:
        return _empty(name, trials)
    rng = np.random.default_rng(seed)
    H = hierarchy or _Hierarchy(N, m)
    level = H.levels[m]
    factor = renormalization(N, m) if renormalization_factor is None else renormalization_factor
    c = morrey_constant(N)
    vals, _ = random_harmonic(N, m, trials, rng, hierarchy=H)
    # half the trials keep nonzero boundary data for the Hoelder part
    free, _ = random_harmonic(N, m, trials, rng, zero_boundary=False, hierarchy=H)
    worst, bad = 0.0, 0
    for batch, sup_too in ((vals, True), (free, False)):
        root = np.sqrt(_energies(batch, level, factor))
        ratio = morrey_ratios(batch, level)
        bound = c * root
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(bound > 0, ratio / bound, np.where(ratio > 0, np.inf, 0.0))
        worst = max(worst, float(np.max(q)))
        bad += int(np.sum(ratio > bound * (1 + 1e-12)))
        if sup_too:
            sup = np.max(np.abs(batch), axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                qs = np.where(bound > 0, sup / bound, np.where(sup > 0, np.inf, 0.0))
            worst = max(worst, float(np.max(qs)))
            bad += int(np.sum(sup > bound * (1 + 1e-12)))
    return SuiteResult(name, 2 * trials, bad, worst, f"N={N}, m={m}, constant {c}")


def extension_suite(N, m, trials=200, seed=0, renormalization_factor=None, depth=5, tol=1e-9):
    """W is unchanged by repeated harmonic extension, and grows under perturbation.

    ``renormalization_factor`` is a callable k -> factor at level k; the
    default is ((N+2)/N)^k.
    """
    name = "harmonic-extension"
    if trials == 0:
        return _empty(name, trials)
    rng = np.random.default_rng(seed)
    r = renormalization_factor or (lambda k: renormalization(N, k))
    top = m + depth
    H = _Hierarchy(N, top)
    base = H.levels[m]
    v = rng.standard_normal((trials, base.n_vertices))
    W0 = _energies(v, base, r(m))
    cur, worst = v, 0.0
    failed = np.zeros(trials, dtype=bool)
    for k in range(m, top):
        cur = (H.P[k] @ cur.T).T
        Wk = _energies(cur, H.levels[k + 1], r(k + 1))
        rel = np.abs(Wk - W0) / np.maximum(np.abs(W0), 1e-300)
        worst = max(worst, float(np.max(rel)) / tol)
        failed |= rel > tol
    # monotonicity: any other extension has at least the harmonic energy
    fine = H.levels[m + 1]
    ext = (H.P[m] @ v.T).T
    new = _new_vertices(H.levels[m], fine)
    pert = ext + rng.standard_normal(ext.shape) * new
    Wh = _energies(ext, fine, r(m + 1))
    Wp = _energies(pert, fine, r(m + 1))
    failed |= Wp < Wh * (1 - 1e-12)
    bad = int(np.sum(failed))
    return SuiteResult(name, trials, bad, worst, f"N={N}, m={m}, {depth} extensions, tol {tol:g}")


def _new_vertices(coarse, fine):
    mask = np.ones(fine.n_vertices, dtype=bool)
    mask[refinement_map(coarse, fine)] = False
    return mask


def norm_equivalence_suite(N, m, alpha, trials=500, seed=0):
    """Two-sided bounds between ||u||^2 = W(u) and ||u||_alpha^2 for constant alpha."""
    name = f"norm-equivalence(alpha={alpha:g})"
    if trials == 0:
        return _empty(name, trials)
    rng = np.random.default_rng(seed)
    H = _Hierarchy(N, m)
    level = H.levels[m]
    c2 = morrey_constant(N) ** 2
    l1 = abs(alpha)  # measure has total mass 1
    if alpha <= 0:
        lo, hi = 1.0, 1.0 + c2 * l1
    elif c2 * l1 < 1:
        lo, hi = 1.0 - c2 * l1, 2.0
    else:
        raise ValueError(f"alpha = {alpha:g} violates both admissibility branches")
    u, _ = random_harmonic(N, m, trials, rng, hierarchy=H)
    W = _energies(u, level, renormalization(N, m))
    Wa = W - alpha * (u * u) @ level.measure
    ok_lo = Wa >= lo * W * (1 - 1e-12)
    ok_hi = Wa <= hi * W * (1 + 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        worst = float(np.nanmax(np.concatenate([lo * W / Wa, Wa / (hi * W)])))
    return SuiteResult(name, trials, int(np.sum(~(ok_lo & ok_hi))), worst,
                       f"{lo:.9g} W <= W_alpha <= {hi:.9g} W")


def constants_table(Ns):
    rows = []
    for N in Ns:
        k = constants(N)
        rows.append({"N": N, "sigma": k.sigma, "morrey_constant": k.morrey_constant, "kappa": k.kappa})
    return rows


def run_all(N, m, trials=1000, seed=0, fault_factor=None):
    """Run every suite.  ``fault_factor`` replaces (N+2)/N in the renormalization."""
    if fault_factor is None:
        factor_m, factor = None, None
    else:
        factor_m = fault_factor**m
        factor = lambda k: fault_factor**k  # noqa: E731
    ext_m = max(0, min(m, 3))
    return [
        morrey_suite(N, m, trials, seed, renormalization_factor=factor_m),
        extension_suite(N, ext_m, max(1, trials // 5) if trials else 0, seed + 1, renormalization_factor=factor),
        norm_equivalence_suite(N, m, -1.0, trials // 2, seed + 2),
        norm_equivalence_suite(N, m, 0.5 / morrey_constant(N) ** 2, trials // 2, seed + 3),
    ]

