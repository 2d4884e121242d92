"""Weights, nonlinearities, hypothesis checks and the admissible lambda range."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .embedding import BRANCH_SIGN, BRANCH_SMALL, kappa, morrey_constant
from .gasket import build_level

INADMISSIBLE = "inadmissible"
GRID_POINTS = 4097
GOLDEN = (math.sqrt(5) - 1) / 2


class ConfigError(ValueError):
    """Malformed problem description (exit code 4 territory)."""


class UndefinedBound(ValueError):
    pass


class HypothesisFailure(RuntimeError):
    """A hypothesis check failed; ``report`` names the violated ones."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# -- weight ------------------------------------------------------------------


class Weight:
    """alpha sampled on the vertices of a level.

    Built either from per-vertex values or from an expression in x1..x{N-1}.
    The almost-everywhere sign condition is read as "at every vertex".
    """

    def __init__(self, level, values=None, expression=None):
        self.level = level
        self.expression = expression
        if expression is not None:
            node = ex.parse(expression, ex.coordinate_names(level.N))
            vals = ex.evaluate(node, _coord_env(level.coords))
            values = np.broadcast_to(np.asarray(vals, dtype=float), (level.n_vertices,)).copy()
        if values is None:
            values = np.zeros(level.n_vertices)
        values = np.asarray(values, dtype=float)
        if values.ndim == 0:
            values = np.full(level.n_vertices, float(values))
        if values.shape != (level.n_vertices,):
            raise ConfigError(f"alpha needs {level.n_vertices} vertex values, got {values.shape}")
        self.values = values
        self.l1 = float(np.dot(level.measure, np.abs(values)))

    @classmethod
    def constant(cls, level, c):
        return cls(level, np.full(level.n_vertices, float(c)))

    @property
    def branch(self):
        return check_alpha(self)

    @property
    def kappa(self):
        return kappa(self.level.N, self.branch, self.l1)


def check_alpha(alpha):
    """Classify the weight; alpha == 0 counts as the sign branch."""
    if np.all(alpha.values <= 0):
        return BRANCH_SIGN
    if alpha.l1 < 1.0 / morrey_constant(alpha.level.N) ** 2:
        return BRANCH_SMALL
    return INADMISSIBLE


# -- nonlinearity ------------------------------------------------------------


def _coord_env(X, ndim=1):
    X = np.asarray(X, dtype=float)
    shape = (X.shape[0],) + (1,) * (ndim - 1)
    return {f"x{i + 1}": X[:, i].reshape(shape) for i in range(X.shape[1])}


class Nonlinearity:
    """f(x, t) with potential F(x, t) = int_0^t f(x, s) ds.

    When f is polynomial in t the potential is the exact antiderivative;
    otherwise it falls back to composite Gauss-Legendre quadrature refined
    until successive estimates agree.
    """

    def __init__(self, node, N, text=None, model=None):
        self.node = node
        self.N = N
        self.text = text if text is not None else ex.to_text(node)
        self.model = model
        self.dnode = ex.derivative(node, "t")
        coeffs = ex.polynomial_in(node, "t")
        self.polynomial = coeffs is not None
        self.potential_node = ex.antiderivative_of_polynomial(coeffs, "t") if coeffs else None
        self.x_dependent = any(ex.depends_on(node, x) for x in ex.coordinate_names(N))

    @classmethod
    def parse(cls, text, N):
        return cls(ex.parse(text, ("t",) + ex.coordinate_names(N)), N, text=text)

    @classmethod
    def model_family(cls, N, a_expr="1", p=3, c=1.0):
        """f = -a(x) (t^p + c); p=3, c=1 is the prototype."""
        if int(p) != p or p < 0:
            raise ConfigError(f"model exponent must be a non-negative integer, got {p!r}")
        text = f"-({a_expr})*(t^{int(p)} + ({float(c)!r}))"
        nl = cls.parse(text, N)
        nl.model = {"a_expr": str(a_expr), "p": int(p), "c": float(c)}
        return nl

    def _env(self, X, t):
        t = np.asarray(t, dtype=float)
        env = _coord_env(X, max(t.ndim, 1))
        env["t"] = t
        return env

    def _eval(self, node, X, t):
        t = np.asarray(t, dtype=float)
        val = np.asarray(ex.evaluate(node, self._env(X, t)), dtype=float)
        return np.broadcast_to(val, np.broadcast_shapes(val.shape, t.shape)).copy()

    def f(self, X, t):
        """Values f(x_i, t_i); ``t`` is (n,) or (n, k) with one row per point."""
        return self._eval(self.node, X, t)

    def dfdt(self, X, t):
        return self._eval(self.dnode, X, t)

    def F(self, X, t):
        if self.potential_node is not None:
            return self._eval(self.potential_node, X, t)
        return self._quadrature_potential(X, t)

    def F_quadrature(self, X, t):
        return self._quadrature_potential(X, t)

    def _quadrature_potential(self, X, t, rtol=1e-13, max_panels=2**12):
        t = np.asarray(t, dtype=float)
        nodes, weights = np.polynomial.legendre.leggauss(16)
        nodes = 0.5 * (nodes + 1)
        weights = 0.5 * weights

        def composite(panels):
            total = 0.0
            for p in range(panels):
                tau = (p + nodes) / panels
                for tk, wk in zip(tau, weights):
                    total = total + (wk / panels) * self.f(X, tk * t)
            return t * total

        panels = 1
        prev = composite(panels)
        while panels < max_panels:
            panels *= 2
            cur = composite(panels)
            if np.all(np.abs(cur - prev) <= rtol * (1 + np.abs(cur))):
                return cur
            prev = cur
        return prev


# -- hypothesis checks -------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    witness: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "witness": self.witness}


def check_f0(f, level, atol=1e-14):
    """f(x, 0) must vanish nowhere on the level."""
    vals = f.f(level.coords, np.zeros(level.n_vertices))
    vals = vals + 0.0  # drop negative zeros
    i = int(np.argmin(np.abs(vals)))
    ok = bool(abs(vals[i]) > atol)
    return CheckResult(
        "f0",
        ok,
        "f(x,0) != 0 at every vertex" if ok else f"f(x,0) = {vals[i]:.3g} at vertex {i}, x = {np.round(level.coords[i], 6).tolist()}",
        {"vertex": i, "value": float(vals[i])},
    )


@dataclass(frozen=True)
class ARWitness:
    nu: float
    r0: float
    b1: float
    b2: float

    def to_dict(self):
        return {"nu": self.nu, "r0": self.r0, "b1": self.b1, "b2": self.b2}


def check_ar(f, nu, r0, level, T=None, n_grid=2001):
    """Sample t f <= nu F < 0 on [-T, -r0] u [r0, T] at every vertex.

    On success derive b1, b2 with F(x, t) <= -b1 |t|^nu + b2 for all t.
    """
    if not nu > 2:
        raise ValueError(f"the growth exponent must exceed 2, got nu={nu}")
    if not r0 > 0:
        raise ValueError(f"r0 must be positive, got {r0}")
    T = 10.0 * r0 if T is None else float(T)
    half = np.linspace(r0, T, n_grid)
    grid = np.concatenate([-half[::-1], half])
    X = level.coords
    tt = np.broadcast_to(grid, (level.n_vertices, grid.size))
    fv = f.f(X, tt)
    Fv = f.F(X, tt)
    lhs = tt * fv - nu * Fv
    scale = 1e-12 * (1 + np.abs(tt * fv) + np.abs(nu * Fv))
    grid_info = {"T": T, "points": int(grid.size)}

    if np.any(Fv >= 0):
        i, k = np.unravel_index(np.argmax(Fv), Fv.shape)
        return CheckResult(
            "ar", False, f"F = {Fv[i, k]:.6g} >= 0 at t = {grid[k]:.6g}",
            {"vertex": int(i), "t": float(grid[k]), "F": float(Fv[i, k]), **grid_info},
        ), None
    if np.any(lhs > scale):
        i, k = np.unravel_index(np.argmax(lhs - scale), lhs.shape)
        return CheckResult(
            "ar", False, f"t f - nu F = {lhs[i, k]:.6g} > 0 at t = {grid[k]:.6g}",
            {"vertex": int(i), "t": float(grid[k]), "excess": float(lhs[i, k]), **grid_info},
        ), None

    ends = f.F(X, np.stack([np.full(level.n_vertices, -r0), np.full(level.n_vertices, r0)], axis=1))
    b1 = float(np.min(-ends)) / r0**nu
    inner = np.linspace(-r0, r0, n_grid)
    Fin = f.F(X, np.broadcast_to(inner, (level.n_vertices, inner.size)))
    b2 = float(np.max(np.abs(Fin))) + b1 * r0**nu
    wit = ARWitness(float(nu), float(r0), b1, b2)
    return CheckResult("ar", True, "no violation on grid", {**wit.to_dict(), **grid_info}), wit


def check_f1(f, M0, beta, level, n_grid=GRID_POINTS):
    """max |f| over vertices x [-M0, M0] against M0 / (2 (beta+1) (2N+3)^2)."""
    s = np.linspace(-M0, M0, n_grid)
    vals = np.abs(f.f(level.coords, np.broadcast_to(s, (level.n_vertices, s.size))))
    i, k = np.unravel_index(np.argmax(vals), vals.shape)
    bound = M0 / (2 * (beta + 1) * morrey_constant(level.N) ** 2)
    worst = float(vals[i, k])
    ok = worst <= bound * (1 + 1e-12)
    return CheckResult(
        "f1", bool(ok), f"max|f| = {worst:.6g} vs bound {bound:.6g}",
        {"vertex": int(i), "s": float(s[k]), "max_abs_f": worst, "bound": bound, "points": n_grid},
    )


# -- lambda range --------------------------------------------------------------


def max_abs_potential(f, level, z, n_grid=GRID_POINTS, refine=True):
    """max over vertices and |s| <= z of |F(x, s)|, with the s where it occurs.

    Grid maximum plus bisection-refined zeros of f (stationary points of F).
    """
    if z <= 0:
        return 0.0, 0.0
    # one representative vertex suffices when f ignores position
    X = level.coords if f.x_dependent else level.coords[:1]
    n = X.shape[0]
    s = np.linspace(-z, z, n_grid)
    S = np.broadcast_to(s, (n, n_grid))
    absF = np.abs(f.F(X, S))
    i, k = np.unravel_index(np.argmax(absF), absF.shape)
    best, where = float(absF[i, k]), float(s[k])
    if not refine:
        return best, where

    fv = f.f(X, S)
    rows, cols = np.nonzero(np.sign(fv[:, :-1]) * np.sign(fv[:, 1:]) < 0)
    if rows.size:
        lo, hi = s[cols].copy(), s[cols + 1].copy()
        flo = fv[rows, cols]
        Xr = X[rows]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = f.f(Xr, mid)
            left = np.sign(fm) == np.sign(flo)
            lo = np.where(left, mid, lo)
            flo = np.where(left, fm, flo)
            hi = np.where(left, hi, mid)
        root = 0.5 * (lo + hi)
        vals = np.abs(f.F(Xr, root))
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, where = float(vals[j]), float(root[j])
    return best, where


def lambda_bound(rho, f, kappa_value, level, n_grid=GRID_POINTS):
    """rho / (2 max_{x, |s| <= kappa sqrt(rho)} |F(x, s)|)."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    peak, _ = max_abs_potential(f, level, kappa_value * math.sqrt(rho), n_grid)
    if peak == 0:
        raise UndefinedBound("F vanishes on the whole search box; the bound is undefined")
    return rho / (2 * peak)


def golden_section_max(h, a, b, tol=1e-12, max_iter=500):
    """Maximize a unimodal h on [a, b]."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    hc, hd = h(c), h(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * (1 + abs(a) + abs(b)):
            break
        if hc >= hd:
            b, d, hd = d, c, hc
            c = b - GOLDEN * (b - a)
            hc = h(c)
        else:
            a, c, hc = c, d, hd
            d = a + GOLDEN * (b - a)
            hd = h(d)
    x = 0.5 * (a + b)
    return x, h(x)


@dataclass(frozen=True)
class LambdaStar:
    value: float
    z: float
    kappa: float
    unbounded: bool = False
    diagnostics: str = ""

    def to_dict(self):
        return {"lambda_star": self.value, "z": self.z, "kappa": self.kappa,
                "unbounded": self.unbounded, "diagnostics": self.diagnostics}


def lambda_star(f, kappa_value, level, z_min=2.0**-20, z_max=2.0**20, n_scan=161, n_grid=GRID_POINTS):
    """(1 / 2 kappa^2) sup_z z^2 / max_{x,|s|<=z} |F(x,s)|, searched in log z.

    The bracketing scan uses a coarser s-grid; stationary points of F are
    refined either way, so only the golden-section stage needs the full grid.
    """

    def ratio(logz, points=n_grid):
        z = math.exp(logz)
        peak, _ = max_abs_potential(f, level, z, points)
        return math.inf if peak == 0 else z * z / peak

    grid = np.linspace(math.log(z_min), math.log(z_max), n_scan)
    vals = np.array([ratio(g, min(n_grid, 513)) for g in grid])
    if np.any(np.isinf(vals)):
        k = int(np.argmax(np.isinf(vals)))
        return LambdaStar(math.inf, float(math.exp(grid[k])), kappa_value, True,
                          "F vanishes identically on |s| <= z")
    k = int(np.argmax(vals))
    if k == n_scan - 1 and vals[-1] > vals[-2]:
        return LambdaStar(math.inf, float(z_max), kappa_value, True,
                          f"z^2/max|F| still increasing at z = {z_max:g}; supremum looks unbounded")
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, n_scan - 1)]
    logz, best = golden_section_max(ratio, a, b, tol=1e-10)
    return LambdaStar(best / (2 * kappa_value**2), float(math.exp(logz)), kappa_value)


# -- problem description -----------------------------------------------------


@dataclass
class ProblemSpec:
    N: int
    m: int
    alpha: Weight
    f: Nonlinearity
    lam: float
    rho: float
    ar: dict | None = None
    f1: dict | None = None
    level: object = None
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, cfg, level=None, m=None):
        try:
            N = int(cfg["N"])
            m = int(cfg["m"] if m is None else m)
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"config needs integer N and m ({err})") from err
        level = level if level is not None else build_level(N, m)
        alpha = _parse_alpha(cfg.get("alpha", {"values": 0.0}), level)
        f = _parse_f(cfg.get("f"), N)
        try:
            lam = float(cfg["lambda"])
            rho = float(cfg.get("rho", 1.0))
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"config needs a numeric lambda ({err})") from err
        if not lam > 0 or not rho > 0:
            raise ConfigError("lambda and rho must be positive")
        return cls(N, m, alpha, f, lam, rho, cfg.get("ar"), cfg.get("f1"), level, dict(cfg))


def _parse_alpha(spec, level):
    if isinstance(spec, (int, float)):
        return Weight(level, float(spec))
    if not isinstance(spec, dict):
        raise ConfigError("alpha must be an object with 'expr' or 'values'")
    try:
        if "expr" in spec:
            return Weight(level, expression=str(spec["expr"]))
        if "values" in spec:
            return Weight(level, spec["values"])
    except ex.ExprError as err:
        raise ConfigError(f"alpha: {err}") from err
    raise ConfigError("alpha must give 'expr' or 'values'")


def _parse_f(spec, N):
    if spec is None:
        raise ConfigError("config needs an 'f' entry")
    try:
        if isinstance(spec, str):
            return Nonlinearity.parse(spec, N)
        if "expr" in spec:
            return Nonlinearity.parse(str(spec["expr"]), N)
        if "model" in spec:
            mdl = spec["model"]
            return Nonlinearity.model_family(N, mdl.get("a_expr", "1"), mdl.get("p", 3), mdl.get("c", 1.0))
    except ex.ExprError as err:
        raise ConfigError(f"f: {err}") from err
    raise ConfigError("f must give 'expr' or 'model'")


# -- admissibility -----------------------------------------------------------


@dataclass
class AdmissibilityReport:
    checks: list
    branch: str
    alpha_l1: float
    kappa: float | None = None
    lambda_bound: float | None = None
    lambda_star: LambdaStar | None = None
    ar_witness: ARWitness | None = None
    lam: float | None = None
    rho: float | None = None

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    @property
    def lambda_certified(self):
        return self.lambda_bound is not None and self.lam is not None and self.lam < self.lambda_bound

    @property
    def lambda_below_star(self):
        return self.lambda_star is not None and self.lam is not None and self.lam < self.lambda_star.value

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "alpha_branch": self.branch,
            "alpha_l1": self.alpha_l1,
            "alpha_convention": "sign condition read at every vertex of the working level",
            "kappa": self.kappa,
            "lambda": self.lam,
            "rho": self.rho,
            "lambda_bound": self.lambda_bound,
            "lambda_certified": self.lambda_certified,
            "lambda_star": None if self.lambda_star is None else self.lambda_star.to_dict(),
            "lambda_below_star": self.lambda_below_star,
            "ar_witness": None if self.ar_witness is None else self.ar_witness.to_dict(),
        }


def admissibility(spec, with_lambda_star=True):
    """Run every hypothesis check for ``spec`` and compute kappa and the lambda range."""
    level = spec.level
    branch = check_alpha(spec.alpha)
    checks = [
        CheckResult(
            "alpha",
            branch != INADMISSIBLE,
            f"branch={branch}, integral |alpha| = {spec.alpha.l1:.6g}, threshold 1/(2N+3)^2 = {1 / morrey_constant(spec.N)**2:.6g}",
            {"alpha_l1": spec.alpha.l1},
        ),
        check_f0(spec.f, level),
    ]
    wit = None
    if spec.ar:
        res, wit = check_ar(spec.f, float(spec.ar["nu"]), float(spec.ar["r0"]), level,
                            T=spec.ar.get("T"), n_grid=int(spec.ar.get("points", 2001)))
        checks.append(res)
    if spec.f1:
        checks.append(check_f1(spec.f, float(spec.f1["M0"]), float(spec.f1["beta"]), level))
    report = AdmissibilityReport(checks, branch, spec.alpha.l1, ar_witness=wit, lam=spec.lam, rho=spec.rho)
    if branch == INADMISSIBLE:
        return report
    report.kappa = kappa(spec.N, branch, spec.alpha.l1)
    try:
        report.lambda_bound = lambda_bound(spec.rho, spec.f, report.kappa, level)
    except UndefinedBound:
        report.lambda_bound = None
    if with_lambda_star:
        report.lambda_star = lambda_star(spec.f, report.kappa, level)
    return report
