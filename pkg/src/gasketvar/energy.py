"""Renormalized energy forms W_m, alpha-norms and harmonic extension."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .gasket import GasketLevel, build_level, refinement_map


class InadmissibleWeight(ValueError):
    """Raised when W_m(u) - sum(mu * alpha * u^2) turns negative."""


class LevelMismatch(ValueError):
    pass


def renormalization(N, m):
    return ((N + 2) / N) ** m


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    level: GasketLevel
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.dtype.kind != "f":
            values = values.astype(float)
        if values.shape != (self.level.n_vertices,):
            raise LevelMismatch(
                f"expected {self.level.n_vertices} values, got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def in_h0(self):
        return bool(np.all(self.values[self.level.boundary] == 0.0))

    @classmethod
    def zero_boundary(cls, level, values):
        v = np.array(values, dtype=float)
        v[level.boundary] = 0.0
        return cls(level, v)


@dataclass(frozen=True, eq=False)
class EnergyForm:
    level: GasketLevel
    factor: float
    stiffness: sp.csr_matrix
    mass: sp.dia_matrix

    @property
    def A(self):
        return self.stiffness

    @property
    def M(self):
        return self.mass

    def interior_block(self, weights=None):
        """A restricted to interior vertices, optionally minus diag(mu*weights)."""
        idx = self.level.interior
        B = self.stiffness[idx][:, idx]
        if weights is not None:
            w = self.level.measure[idx] * np.asarray(weights, dtype=float)[idx]
            B = B - sp.diags(w)
        return B.tocsc()


def assemble(level):
    """Stiffness A (u.Au = W_m(u)) and lumped mass M = diag(mu)."""
    n = level.n_vertices
    r = renormalization(level.N, level.m)
    i, j = level.edges[:, 0], level.edges[:, 1]
    w = np.full(i.shape, r)
    off = sp.coo_matrix((np.concatenate([-w, -w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
    deg = np.bincount(np.concatenate([i, j]), weights=np.concatenate([w, w]), minlength=n)
    A = (off + sp.diags(deg)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return EnergyForm(level=level, factor=r, stiffness=A, mass=sp.diags(level.measure))


def _values(u, level=None):
    if isinstance(u, DiscreteFunction):
        if level is not None and u.level is not level:
            if u.level.N != level.N or u.level.m != level.m:
                raise LevelMismatch("function lives on a different level")
        return u.level, u.values
    if level is None:
        raise LevelMismatch("raw arrays need an explicit level")
    return level, np.asarray(u, dtype=float)


def energy(u, level=None):
    """W_m(u) by direct summation over edges."""
    level, v = _values(u, level)
    d = v[level.edges[:, 0]] - v[level.edges[:, 1]]
    return renormalization(level.N, level.m) * float(np.dot(d, d))


def bilinear(u, v, level=None):
    level, a = _values(u, level)
    _, b = _values(v, level)
    da = a[level.edges[:, 0]] - a[level.edges[:, 1]]
    db = b[level.edges[:, 0]] - b[level.edges[:, 1]]
    return renormalization(level.N, level.m) * float(np.dot(da, db))


def integrate(g, level):
    """Vertex quadrature sum_x mu_x g(x)."""
    return float(np.dot(level.measure, np.asarray(g, dtype=float)))


def norm_alpha_squared(u, alpha, level=None):
    level, v = _values(u, level)
    a = np.broadcast_to(np.asarray(alpha, dtype=float), v.shape)
    return energy(v, level) - integrate(a * v * v, level)


def norm_alpha(u, alpha, level=None):
    """sqrt(W_m(u) - sum mu alpha u^2)."""
    sq = norm_alpha_squared(u, alpha, level)
    if sq < 0:
        raise InadmissibleWeight(f"negative radicand {sq:.3e}: weight violates both admissibility branches")
    return float(np.sqrt(sq))


@lru_cache(maxsize=None)
def extension_matrix(N):
    """Harmonic midpoint rule for one cell: (N(N-1)/2, N) matrix.

    Row for the pair (j, k), j < k, gives the energy-minimizing value at the
    midpoint of edge (p_j, p_k) as a combination of corner values.
    """
    pairs = [(j, k) for j in range(N) for k in range(j + 1, N)]
    slot = {p: N + q for q, p in enumerate(pairs)}

    def node(a, b):
        if a == b:
            return a
        return slot[(min(a, b), max(a, b))]

    n = N + len(pairs)
    L = np.zeros((n, n))
    for k in range(N):
        child = [node(j, k) for j in range(N)]
        for a in range(N):
            for b in range(a + 1, N):
                p, q = child[a], child[b]
                L[p, p] += 1
                L[q, q] += 1
                L[p, q] -= 1
                L[q, p] -= 1
    inner = np.arange(N, n)
    outer = np.arange(N)
    return -np.linalg.solve(L[np.ix_(inner, inner)], L[np.ix_(inner, outer)])


def _pairs(N):
    return [(j, k) for j in range(N) for k in range(j + 1, N)]


def prolongation(coarse, fine=None):
    """Sparse P with P @ u_coarse = harmonic extension of u_coarse to ``fine``."""
    N = coarse.N
    if fine is None:
        fine = build_level(N, coarse.m + 1)
    if fine.N != N or fine.m != coarse.m + 1:
        raise LevelMismatch("prolongation needs consecutive levels of the same N")
    idx = refinement_map(coarse, fine)
    E = extension_matrix(N)
    rows, cols, vals = [idx], [np.arange(coarse.n_vertices)], [np.ones(coarse.n_vertices)]
    cells = np.arange(coarse.cells.shape[0])
    for q, (j, k) in enumerate(_pairs(N)):
        # midpoint of (p_j, p_k) is corner j of child k
        target = fine.cells[cells * N + k, j]
        for a in range(N):
            rows.append(target)
            cols.append(coarse.cells[:, a])
            vals.append(np.full(cells.size, E[q, a]))
    P = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fine.n_vertices, coarse.n_vertices),
    ).tocsr()
    return P, fine


def harmonic_extension(u, fine=None):
    """Extend u from level m to m+1 minimizing W_{m+1} cell by cell."""
    coarse = u.level
    N = coarse.N
    if fine is None:
        fine = build_level(N, coarse.m + 1)
    idx = refinement_map(coarse, fine)
    out = np.empty(fine.n_vertices)
    out[idx] = u.values

    E = extension_matrix(N)
    mids = u.values[coarse.cells] @ E.T  # (cells, pairs)
    cells = np.arange(coarse.cells.shape[0])
    for q, (j, k) in enumerate(_pairs(N)):
        out[fine.cells[cells * N + k, j]] = mids[:, q]
    return DiscreteFunction(fine, out)


def extend_to(u, m):
    """Repeated harmonic extension up to level m."""
    while u.level.m < m:
        u = harmonic_extension(u)
    return u
