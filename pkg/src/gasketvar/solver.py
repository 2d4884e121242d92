"""Discrete energy functional J_lambda and the two-solution pipeline.

All iterates are full vertex arrays with exact zeros on the boundary; the
linear algebra runs on the interior block.  Gradient-type steps use the
metric of the alpha-norm, B = A - diag(mu * alpha) on interior vertices, so
step sizes do not degrade under refinement.

Iterates and gradients are carried in extended precision (``np.longdouble``)
while linear solves run in double: for small lambda the Hessian norm is of
order 1e6 and one double ulp of u already moves the gradient by ~1e-8, so a
1e-8 residual is out of reach in plain float64 at levels m >= 5.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import DiscreteFunction, assemble
from .problem import HypothesisFailure, admissibility

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
STEP_TOL = 1e-10
DISTINCT_TOL = 1e-3
PATH_NODES = 33
MAX_SWEEPS = 500


class SolverError(RuntimeError):
    """Numerical failure (as opposed to a failed hypothesis)."""


class BoundaryStuck(SolverError):
    """Projected descent ended on the sphere of the constraint ball."""

    def __init__(self, message, u):
        super().__init__(message)
        self.u = u


class SingularJacobian(SolverError):
    pass


class DiscreteFunctional:
    """J(u) = W_m(u)/(2 lam) - sum mu alpha u^2 / (2 lam) + sum mu F(x, u)."""

    def __init__(self, form, alpha, f, lam):
        if not lam > 0:
            raise ValueError("lambda must be positive")
        self.form = form
        self.level = form.level
        self.alpha = alpha
        self.f = f
        self.lam = float(lam)
        self.X = self.level.coords
        self.mu = self.level.measure.astype(np.longdouble)
        self.a = np.asarray(alpha.values, dtype=np.longdouble)
        self.I = self.level.interior
        self.n = self.level.n_vertices
        self.A = form.stiffness.astype(np.longdouble)
        self.B = form.interior_block(alpha.values)
        self._lu = None
        self._lu_A = None

    @classmethod
    def from_spec(cls, spec, form=None):
        return cls(form or assemble(spec.level), spec.alpha, spec.f, spec.lam)

    def with_lambda(self, lam):
        return DiscreteFunctional(self.form, self.alpha, self.f, lam)

    # -- helpers
    def embed(self, v):
        u = np.zeros(self.n, dtype=np.longdouble)
        u[self.I] = v
        return u

    def zero(self):
        return np.zeros(self.n, dtype=np.longdouble)

    @property
    def lu(self):
        if self._lu is None:
            self._lu = spla.splu(self.B.tocsc())
        return self._lu

    def riesz(self, g_int):
        """B^{-1} g on interior vertices (g may be (k,) or (k, p))."""
        return self.lu.solve(np.asarray(g_int, dtype=float))

    def norm_sq(self, u):
        u = np.asarray(u, dtype=np.longdouble)
        return float(u @ (self.A @ u) - np.dot(self.mu * self.a, u * u))

    def norm_alpha(self, u):
        return math.sqrt(max(self.norm_sq(u), 0.0))

    # -- functional
    def J(self, u):
        u = np.asarray(u, dtype=np.longdouble)
        quad = u @ (self.A @ u) - np.dot(self.mu * self.a, u * u)
        return float(quad / (2 * self.lam) + np.dot(self.mu, self.f.F(self.X, u)))

    def gradient(self, u):
        """Nodal components of the derivative; boundary entries are 0."""
        u = np.asarray(u, dtype=np.longdouble)
        g = (self.A @ u - self.mu * self.a * u) / self.lam + self.mu * self.f.f(self.X, u)
        g[self.level.boundary] = 0.0
        return g

    def hessian(self, u):
        """Interior Hessian B/lam + diag(mu f_t(x, u))."""
        d = (self.mu * self.f.dfdt(self.X, u))[self.I].astype(float)
        return (self.B / self.lam + sp.diags(d)).tocsc()

    def residual(self, u):
        """Euclidean norm of the gradient divided by sqrt(#vertices)."""
        return float(np.linalg.norm(self.gradient(u)) / math.sqrt(self.n))

    def dual_residual(self, u):
        """Energy-dual size sqrt(r . A_int^{-1} r) of the gradient."""
        if self._lu_A is None:
            idx = self.I
            self._lu_A = spla.splu(self.form.stiffness[idx][:, idx].tocsc())
        r = self.gradient(u)[self.I].astype(float)
        return float(math.sqrt(max(r @ self._lu_A.solve(r), 0.0)))

    def weak_form(self, u):
        """W(u, phi_x) - sum mu alpha u phi_x + lam sum mu f(u) phi_x at interior x."""
        return self.lam * self.gradient(u)[self.I]


@dataclass
class Solution:
    u: DiscreteFunction
    residual: float
    J: float
    norm_alpha: float
    in_ball: bool | None
    method: str
    log: list = field(default_factory=list, repr=False)

    @property
    def values(self):
        return self.u.values

    def to_dict(self):
        return {
            "method": self.method,
            "residual": self.residual,
            "J": self.J,
            "norm_alpha": self.norm_alpha,
            "in_ball": self.in_ball,
            "sup_norm": float(np.max(np.abs(self.values))),
            "iterations": len(self.log),
        }


def polish(fn, u, max_iter=4):
    """Extra Newton steps past the tolerance, kept while the residual halves.

    Brings a converged iterate down to the extended-precision floor so that
    level-to-level comparisons are not dominated by solver tolerance.
    """
    u = np.array(u, dtype=np.longdouble)
    res = fn.residual(u)
    for _ in range(max_iter):
        if res == 0.0:
            break
        g = fn.gradient(u)[fn.I].astype(float)
        try:
            step = spla.spsolve(fn.hessian(u), g)
        except RuntimeError:
            break
        if not np.all(np.isfinite(step)):
            break
        trial = u - fn.embed(step)
        r1 = fn.residual(trial)
        if not r1 < 0.5 * res:
            break
        u, res = trial, r1
    return u


def _solution(fn, u, method, rho=None, history=()):
    u = polish(fn, u)
    na = fn.norm_alpha(u)
    in_ball = None if rho is None else bool(na < math.sqrt(rho))
    return Solution(DiscreteFunction(fn.level, u), fn.residual(u), fn.J(u), na, in_ball, method, list(history))


def sup_distance(u, v):
    return float(np.max(np.abs(np.asarray(u, dtype=np.longdouble) - np.asarray(v, dtype=np.longdouble))))


# -- Newton --------------------------------------------------------------------


def _deflation(fn, u, known, power=2, shift=1.0):
    """Multiplier M(u) and grad log M for M = prod (1/|u-u_k|^p + shift)."""
    M = 1.0
    w = np.zeros(fn.I.size)
    for k in known:
        dv = (u - k)[fn.I].astype(float)
        Bd = fn.B @ dv
        d2 = max(float(dv @ Bd), 1e-300)
        inv = d2 ** (-power / 2)
        M *= inv + shift
        # d/du log(d^-p + s) = -p d^(-p-2) B dv / (d^-p + s)
        w += -power * inv / d2 * Bd / (inv + shift)
    return M, w


def newton(fn, u, tol=RESIDUAL_TOL, max_iter=60, known=(), step_tol=STEP_TOL):
    """Damped Newton on the gradient, optionally deflating ``known`` roots.

    Returns (u, converged, history).
    """
    u = np.array(u, dtype=np.longdouble)
    u[fn.level.boundary] = 0.0
    history = []
    known = [np.asarray(k, dtype=np.longdouble) for k in known]

    def merit(v):
        r = float(np.linalg.norm(fn.gradient(v))) / math.sqrt(fn.n)
        if not known:
            return r, r
        return _deflation(fn, v, known)[0] * r, r

    m0, res = merit(u)
    for it in range(max_iter):
        history.append({"phase": "newton", "iter": it, "residual": res})
        if res < tol and all(sup_distance(u, k) > DISTINCT_TOL for k in known):
            return u, True, history
        g = fn.gradient(u)[fn.I].astype(float)
        with warnings.catch_warnings():
            warnings.simplefilter("error", category=spla.MatrixRankWarning)
            try:
                step = -spla.spsolve(fn.hessian(u), g)
            except (RuntimeError, spla.MatrixRankWarning) as err:
                raise SingularJacobian(str(err)) from err
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("non-finite Newton step")
        if known:
            _, w = _deflation(fn, u, known)
            denom = 1.0 - float(w @ step)
            if abs(denom) < 1e-14:
                raise SingularJacobian("deflated Jacobian is singular")
            step = step / denom
        full = fn.embed(step)
        s = 1.0
        trial = u + full
        m1, r1 = merit(trial)
        while not (np.isfinite(m1) and m1 < m0) and s > 1.0 / 1024:
            s *= 0.5
            trial = u + s * full
            m1, r1 = merit(trial)
        if not np.isfinite(m1):
            return u, False, history
        moved = float(s * np.max(np.abs(full)))
        u, m0, res = trial, m1, r1
        if moved <= step_tol * (1 + float(np.max(np.abs(u)))) and res >= tol:
            # stagnated without meeting the tolerance
            history.append({"phase": "newton", "iter": it + 1, "residual": res, "stalled": True})
            return u, False, history
    converged = res < tol and all(sup_distance(u, k) > DISTINCT_TOL for k in known)
    history.append({"phase": "newton", "iter": max_iter, "residual": res})
    return u, converged, history


# -- first solution: constrained minimization ----------------------------------


def solve_local_min(fn, rho, tol=RESIDUAL_TOL, step_tol=STEP_TOL, max_iter=2000, armijo=1e-4):
    """Projected gradient descent from 0 inside {||u||_alpha <= sqrt(rho)}.

    Steps follow the alpha-norm gradient with backtracking; the projection is
    the radial rescaling onto the ball (exact in that norm).  An interior
    limit is polished by Newton.  Raises BoundaryStuck if the limit sits on
    the sphere.
    """
    radius = math.sqrt(rho)

    def project(v):
        na = fn.norm_alpha(v)
        return v * (radius / na) if na > radius else v

    u = fn.zero()
    Ju = fn.J(u)
    history = [{"phase": "pg", "iter": 0, "J": Ju, "residual": fn.residual(u)}]
    for it in range(1, max_iter + 1):
        g = fn.gradient(u)
        d = fn.embed(fn.lam * fn.riesz(g[fn.I]))
        s = 1.0
        while True:
            trial = project(u - s * d)
            Jt = fn.J(trial)
            if Jt <= Ju + armijo * float(g @ (trial - u)) or s < 1e-14:
                break
            s *= 0.5
        if Jt > Ju:
            break  # no descent possible at machine precision
        move = fn.norm_alpha(trial - u)
        u, Ju = trial, Jt
        res = fn.residual(u)
        history.append({"phase": "pg", "iter": it, "J": Ju, "residual": res, "step": s})
        if res < tol or move <= step_tol * max(1.0, fn.norm_alpha(u)):
            break

    na = fn.norm_alpha(u)
    if na >= radius * (1 - 1e-9):
        raise BoundaryStuck(
            f"descent ended on the sphere ||u||_alpha = {na:.6g}; lambda is too large for this rho", u
        )
    if fn.residual(u) >= tol:
        v, ok, hist = newton(fn, u, tol=tol)
        history.extend(hist)
        if ok and fn.norm_alpha(v) < radius:
            u = v
        else:
            raise SolverError(f"local minimizer did not reach residual {tol:g} (got {fn.residual(u):.3g})")
    return _solution(fn, u, "projected-gradient", rho, history)


# -- second solution: mountain pass ---------------------------------------------


def lowest_direction(fn):
    """Lowest eigenvector of A on interior vertices, positive mass, ||.||_alpha = 1."""
    idx = fn.I
    Aint = fn.form.stiffness[idx][:, idx]
    try:
        if idx.size <= 1500:
            _, vecs = sla.eigh(Aint.toarray(), subset_by_index=[0, 0])
            v = vecs[:, 0]
        else:
            _, vecs = spla.eigsh(Aint.tocsc(), k=1, sigma=0.0, which="LM")
            v = vecs[:, 0]
    except (np.linalg.LinAlgError, spla.ArpackError):
        v = fn.riesz(fn.level.measure[idx])
    if v.sum() < 0:
        v = -v
    u = fn.embed(v)
    return u / fn.norm_alpha(u)


def _reparametrize(nodes, fn):
    """Equal alpha-norm spacing along a polyline, endpoints fixed."""
    k = len(nodes)
    if k <= 2:
        return nodes
    seg = np.array([fn.norm_alpha(nodes[i + 1] - nodes[i]) for i in range(k - 1)])
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] == 0:
        return nodes
    target = np.linspace(0, arc[-1], k)
    out = [nodes[0]]
    for s in target[1:-1]:
        j = min(np.searchsorted(arc, s, side="right") - 1, k - 2)
        w = 0.0 if seg[j] == 0 else (s - arc[j]) / seg[j]
        out.append((1 - w) * nodes[j] + w * nodes[j + 1])
    out.append(nodes[-1])
    return out


def mountain_pass_path(fn, u1, direction=None, n_nodes=PATH_NODES, max_sweeps=MAX_SWEEPS,
                       step=0.3, cap=0.5, tol=1e-6):
    """Climbing-string deformation of the segment from u1 to a low endpoint e.

    Returns (climbing node, path nodes, history).  The climbing node ascends
    along the path tangent and descends across it; the sub-strings on either
    side are re-spaced separately so it is never moved by re-parametrization.
    """
    u0 = lowest_direction(fn) if direction is None else direction
    J1 = fn.J(u1)
    t = 1.0
    while fn.J(t * u0) >= J1:
        t *= 2.0
        if t > 2.0**80:
            raise SolverError("could not find a path endpoint below J(u1)")
    e = t * u0
    nodes = [u1 + (i / (n_nodes - 1)) * (e - u1) for i in range(n_nodes)]
    history = [{"phase": "endpoint", "t": t, "J_e": fn.J(e)}]

    c = 1
    for sweep in range(max_sweeps):
        Js = np.array([fn.J(v) for v in nodes])
        c = 1 + int(np.argmax(Js[1:-1]))
        G = np.stack([fn.gradient(v)[fn.I].astype(float) for v in nodes[1:-1]], axis=1)
        D = fn.lam * fn.riesz(G)  # alpha-norm gradients, one column per node
        tau = (nodes[c + 1] - nodes[c - 1])[fn.I].astype(float)
        tau /= math.sqrt(max(tau @ (fn.B @ tau), 1e-300))
        dc = D[:, c - 1]
        D[:, c - 1] = dc - 2 * (dc @ (fn.B @ tau)) * tau
        spacing = fn.norm_alpha(nodes[1] - nodes[0]) if c > 1 else fn.norm_alpha(nodes[-1] - nodes[-2])
        spacing = max(spacing, 1e-300)
        climb_size = math.sqrt(max(D[:, c - 1] @ (fn.B @ D[:, c - 1]), 0.0))
        history.append({"phase": "string", "sweep": sweep, "J_max": float(Js[c]), "node": c,
                        "climb_gradient": climb_size})
        if climb_size <= tol * max(1.0, fn.norm_alpha(nodes[c])):
            break
        for i in range(1, n_nodes - 1):
            di = D[:, i - 1]
            size = math.sqrt(max(di @ (fn.B @ di), 0.0))
            s = step if size * step <= cap * spacing else cap * spacing / size
            nodes[i] = nodes[i] - s * fn.embed(di)
        nodes = _reparametrize(nodes[: c + 1], fn)[:-1] + _reparametrize(nodes[c:], fn)
    return nodes[c], nodes, history


def solve_mountain_pass(fn, first, rho=None, tol=RESIDUAL_TOL, seed=0, **path_kw):
    """Second critical point between the local minimizer and a low endpoint."""
    u1 = first.values
    top, _, history = mountain_pass_path(fn, u1, **path_kw)
    try:
        u, ok, hist = newton(fn, top, tol=tol)
    except SingularJacobian:
        ok, hist, u = False, [], top
    history.extend(hist)
    if ok and sup_distance(u, u1) > DISTINCT_TOL:
        return _solution(fn, u, "mountain-pass", rho, history)
    log.info("mountain-pass refinement failed or collapsed onto u1; trying deflation")
    try:
        u, ok, hist = newton(fn, top, tol=tol, known=[u1], max_iter=200)
        history.extend(hist)
        if ok:
            return _solution(fn, u, "mountain-pass+deflation", rho, history)
    except SingularJacobian:
        pass
    sol = solve_newton_deflated(fn, [first], rho=rho, tol=tol, seed=seed)
    if sol is None:
        raise SolverError("mountain-pass search did not converge to a second critical point")
    return sol


# -- deflated Newton --------------------------------------------------------------


def solve_newton_deflated(fn, known, rho=None, tol=RESIDUAL_TOL, seed=0, n_starts=32, max_iter=100, scale=None):
    """Deflated Newton from seeded random starts; None if nothing new is found."""
    rng = np.random.default_rng(seed)
    known_vals = [k.values if isinstance(k, Solution) else np.asarray(k, dtype=np.longdouble) for k in known]
    if scale is None:
        norms = [fn.norm_alpha(k) for k in known_vals]
        scale = max(norms + [1.0])
    u0 = lowest_direction(fn)
    for start in range(n_starts):
        noise = fn.embed(fn.riesz(fn.level.measure[fn.I] * rng.standard_normal(fn.I.size)))
        noise /= max(fn.norm_alpha(noise), 1e-300)
        direction = u0 * rng.choice([-1.0, 1.0]) + 0.5 * noise
        direction /= fn.norm_alpha(direction)
        amp = scale * math.exp(rng.uniform(math.log(1e-2), math.log(2.0)))
        try:
            u, ok, hist = newton(fn, amp * direction, tol=tol, known=known_vals, max_iter=max_iter)
        except SingularJacobian:
            continue
        if ok and all(sup_distance(u, k) > DISTINCT_TOL for k in known_vals):
            for h in hist:
                h["start"] = start
            return _solution(fn, u, "deflated-newton", rho, hist)
    return None


# -- orchestration -------------------------------------------------------------


@dataclass
class SolveReport:
    solutions: list
    lam: float
    rho: float
    kappa: float | None
    lambda_bound: float | None
    admissibility: object
    distinctness: float | None
    status: str = "ok"
    messages: list = field(default_factory=list)

    def to_dict(self):
        return {
            "status": self.status,
            "lambda": self.lam,
            "rho": self.rho,
            "kappa": self.kappa,
            "lambda_bound": self.lambda_bound,
            "distinctness": self.distinctness,
            "messages": list(self.messages),
            "admissibility": self.admissibility.to_dict() if self.admissibility is not None else None,
            "solutions": [s.to_dict() for s in self.solutions],
        }


def min_pairwise_distance(solutions):
    vals = [s.values for s in solutions]
    if len(vals) < 2:
        return None
    return min(sup_distance(a, b) for i, a in enumerate(vals) for b in vals[i + 1:])


def two_solutions(spec, rho=None, tol=RESIDUAL_TOL, deflation_sweep=False, seed=0, form=None,
                  with_lambda_star=True, n_starts=32):
    """Admissibility, local minimizer in the ball, mountain-pass solution, report."""
    rho = spec.rho if rho is None else rho
    spec.rho = rho
    report = admissibility(spec, with_lambda_star=with_lambda_star)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures)
        raise HypothesisFailure(f"hypothesis violated: {names}", report)

    messages = []
    if report.lambda_bound is not None and not spec.lam < report.lambda_bound:
        messages.append(
            f"lambda = {spec.lam:g} is not below the certified bound {report.lambda_bound:.6g} for rho = {rho:g}"
        )
    if report.lambda_star is not None and not spec.lam < report.lambda_star.value:
        messages.append(f"lambda = {spec.lam:g} lies outside the certified interval (0, {report.lambda_star.value:.6g})")
    for msg in messages:
        log.warning(msg)

    fn = DiscreteFunctional.from_spec(spec, form)
    first = solve_local_min(fn, rho, tol=tol)
    second = solve_mountain_pass(fn, first, rho=rho, tol=tol, seed=seed)
    solutions = [first, second]
    if deflation_sweep:
        while True:
            extra = solve_newton_deflated(fn, solutions, rho=rho, tol=tol, seed=seed + len(solutions),
                                          n_starts=n_starts)
            if extra is None:
                break
            solutions.append(extra)
    for s in solutions:
        if np.max(np.abs(s.values)) == 0:
            raise SolverError("trivial solution returned although f(x,0) != 0")
    return SolveReport(
        solutions=solutions,
        lam=spec.lam,
        rho=rho,
        kappa=report.kappa,
        lambda_bound=report.lambda_bound,
        admissibility=report,
        distinctness=min_pairwise_distance(solutions),
        status="ok" if not messages else "ok-uncertified",
        messages=messages,
    )
