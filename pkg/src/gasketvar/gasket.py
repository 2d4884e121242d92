"""Finite levels V_m of the N-corner Sierpinski gasket.

Points of V_m are stored as exact integer barycentric keys: a row ``w`` with
``w.sum() == 2**m`` stands for ``sum(w[i] / 2**m * p_i)``.  Deduplication,
ordering and nesting checks all run on these integers, never on coordinates.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

DEFAULT_CELL_BUDGET = 10**7


class GasketError(ValueError):
    pass


class CellBudgetExceeded(GasketError):
    pass


def cell_budget():
    value = os.environ.get("GASKETVAR_CELL_BUDGET")
    return int(value) if value else DEFAULT_CELL_BUDGET


def simplex_corners(N):
    """Regular simplex with unit edges in R^(N-1), first corner at the origin.

    Corner k (k >= 1) is placed by Gram-Schmidt style completion so that the
    layout is canonical: p_1 = 0, p_2 = e_1, p_3 in the (e_1, e_2) half-plane
    with positive second coordinate, and so on.
    """
    if int(N) != N or N < 2:
        raise GasketError(f"need an integer N >= 2, got {N!r}")
    N = int(N)
    d = N - 1
    pts = np.zeros((N, d))
    for k in range(1, N):
        # Equidistant from p_0..p_{k-1}: first k-1 coordinates equal the
        # centroid of those corners, the k-th fills the remaining length.
        centroid = pts[:k].mean(axis=0)
        pts[k, : k - 1] = centroid[: k - 1]
        r2 = np.sum((centroid[: k - 1] - pts[0, : k - 1]) ** 2)
        pts[k, k - 1] = np.sqrt(1.0 - r2)
    return pts


def ifs_map(i, x, corners):
    """Contraction S_i(x) = x/2 + p_i/2 (``i`` is 1-based)."""
    corners = np.asarray(corners, dtype=float)
    N = corners.shape[0]
    if not 1 <= i <= N:
        raise GasketError(f"map index {i} outside 1..{N}")
    return 0.5 * np.asarray(x, dtype=float) + 0.5 * corners[i - 1]


def apply_word(word, x, corners):
    """S_{w_1} o ... o S_{w_m}(x); the last letter acts first."""
    y = np.asarray(x, dtype=float)
    for i in reversed(word):
        y = ifs_map(i, y, corners)
    return y


@dataclass(frozen=True, eq=False)
class GasketLevel:
    """Immutable level-m approximation of the gasket.

    ``cells[c]`` lists the N vertex indices of the cell with word index ``c``;
    words are ordered lexicographically (first letter most significant) so the
    children of cell ``c`` at level m+1 are ``c*N + k``, and column ``j`` of a
    cell is the image of corner p_j.
    """

    N: int
    m: int
    keys: np.ndarray  # (n, N) int64 barycentric numerators, denominator 2**m
    corners: np.ndarray
    cells: np.ndarray  # (N**m, N)
    edges: np.ndarray  # (N**m * N(N-1)/2, 2), i < j
    boundary: np.ndarray  # (N,)
    measure: np.ndarray = field(repr=False)

    @property
    def n_vertices(self):
        return self.keys.shape[0]

    @property
    def coords(self):
        return (self.keys / float(2**self.m)) @ self.corners

    @property
    def interior(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary] = False
        return np.flatnonzero(mask)

    def lifted_keys(self, target_m):
        """Keys re-expressed with denominator 2**target_m (target_m >= m)."""
        if target_m < self.m:
            raise GasketError("can only lift keys to a finer level")
        return self.keys * (2 ** (target_m - self.m))

    def cell_counts(self):
        return np.bincount(self.cells.ravel(), minlength=self.n_vertices)

    def exact_measure(self):
        """Per-vertex weights as Fractions (for exact bookkeeping)."""
        scale = Fraction(1, self.N ** (self.m + 1))
        return [c * scale for c in self.cell_counts().tolist()]


def _cell_keys(N, m):
    """Barycentric keys of every cell corner, shape (N**m, N, N)."""
    keys = np.eye(N, dtype=np.int64)[None, :, :]  # level 0: one cell
    for level in range(1, m + 1):
        half = 2 ** (level - 1)
        # S_i doubles the denominator and adds 2**(level-1) to weight i.
        shift = half * np.eye(N, dtype=np.int64)
        keys = np.concatenate([keys + shift[i] for i in range(N)], axis=0)
    return keys


def build_level(N, m, budget=None):
    """Build V_m with edges, cells, boundary and measure weights."""
    if int(N) != N or N < 2:
        raise GasketError(f"need an integer N >= 2, got {N!r}")
    if int(m) != m or m < 0:
        raise GasketError(f"need an integer level m >= 0, got {m!r}")
    N, m = int(N), int(m)
    budget = cell_budget() if budget is None else budget
    if N**m > budget:
        raise CellBudgetExceeded(f"N**m = {N**m} cells exceeds budget {budget}")
    ck = _cell_keys(N, m)
    flat = ck.reshape(-1, N)
    keys, inverse = np.unique(flat, axis=0, return_inverse=True)
    cells = inverse.reshape(-1, N).astype(np.int64)

    iu, ju = np.triu_indices(N, k=1)
    edges = np.stack([cells[:, iu].ravel(), cells[:, ju].ravel()], axis=1)
    edges = np.sort(edges, axis=1)

    corner_keys = (2**m) * np.eye(N, dtype=np.int64)
    boundary = np.array(
        [np.flatnonzero((keys == row).all(axis=1))[0] for row in corner_keys]
    )

    counts = np.bincount(cells.ravel(), minlength=keys.shape[0])
    measure = counts / float(N ** (m + 1))

    return GasketLevel(
        N=N,
        m=m,
        keys=keys,
        corners=simplex_corners(N),
        cells=cells,
        edges=edges,
        boundary=boundary,
        measure=measure,
    )


def vertex_measures(level):
    """mu_x = (#cells containing x) * N**-m / N."""
    counts = level.cell_counts()
    return counts / float(level.N ** (level.m + 1))


def refinement_map(coarse, fine):
    """Index of every coarse vertex inside ``fine`` (fine.m == coarse.m + 1).

    Uses the word structure: corner k of child k of cell c is corner k of c.
    """
    if fine.N != coarse.N or fine.m != coarse.m + 1:
        raise GasketError("fine level must be exactly one level finer")
    N = coarse.N
    k = np.arange(N)
    child = np.arange(coarse.cells.shape[0])[:, None] * N + k
    idx = np.empty(coarse.n_vertices, dtype=np.int64)
    idx[coarse.cells] = fine.cells[child, k]
    return idx


def to_json_dict(level):
    """Export with the fixed field order N, m, vertices, edges, cells, boundary, measure."""
    return {
        "N": level.N,
        "m": level.m,
        "vertices": level.coords.tolist(),
        "edges": level.edges.tolist(),
        "cells": level.cells.tolist(),
        "boundary": level.boundary.tolist(),
        "measure": level.measure.tolist(),
    }
