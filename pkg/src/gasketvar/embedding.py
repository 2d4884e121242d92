"""Embedding constants and the Hoelder / sup-norm estimates on discrete data."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import DiscreteFunction, energy

BRANCH_SIGN = "nonpositive"  # alpha <= 0 everywhere
BRANCH_SMALL = "small"  # integral of |alpha| below 1/(2N+3)^2

PAIR_ENUMERATION_LIMIT = 20_000


class InadmissibleBranch(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingConstants:
    N: int
    sigma: float
    morrey_constant: int
    kappa: float


def sigma(N):
    """Hoelder exponent log((N+2)/N) / (2 log 2)."""
    return math.log((N + 2) / N) / (2 * math.log(2))


def morrey_constant(N):
    return 2 * N + 3


def kappa(N, branch, alpha_l1=0.0):
    c = morrey_constant(N)
    if branch == BRANCH_SIGN:
        return float(c)
    if branch != BRANCH_SMALL:
        raise InadmissibleBranch(f"unknown weight branch {branch!r}")
    slack = 1.0 - c * c * alpha_l1
    if alpha_l1 < 0 or slack <= 0:
        raise InadmissibleBranch(
            f"integral of |alpha| = {alpha_l1:.6g} is not below 1/(2N+3)^2 = {1 / c**2:.6g}"
        )
    return c / math.sqrt(slack)


def constants(N, branch=BRANCH_SIGN, alpha_l1=0.0):
    return EmbeddingConstants(N, sigma(N), morrey_constant(N), kappa(N, branch, alpha_l1))


def _pair_blocks(n, block):
    for start in range(0, n, block):
        yield start, min(n, start + block)


def morrey_ratios(values, level, rng=None, max_pairs=None):
    """Max over vertex pairs of |u(x)-u(y)| / |x-y|^sigma for a batch of functions.

    ``values`` has shape (k, n) or (n,).  Levels with more than
    ``PAIR_ENUMERATION_LIMIT`` vertices are handled on a random subsample of
    pairs, which can only under-estimate the supremum.
    """
    vals = np.atleast_2d(np.asarray(values, dtype=float))
    X = level.coords
    n = X.shape[0]
    s = sigma(level.N)
    if n > PAIR_ENUMERATION_LIMIT:
        rng = np.random.default_rng(0) if rng is None else rng
        k = max_pairs or 4 * 10**6
        i = rng.integers(0, n, size=k)
        j = rng.integers(0, n, size=k)
        keep = i != j
        i, j = i[keep], j[keep]
        dist = np.linalg.norm(X[i] - X[j], axis=1) ** s
        return np.max(np.abs(vals[:, i] - vals[:, j]) / dist, axis=1)

    out = np.zeros(vals.shape[0])
    block = max(1, 2_000_000 // max(n * vals.shape[0], 1))
    for a, b in _pair_blocks(n, block):
        d = np.linalg.norm(X[a:b, None, :] - X[None, :, :], axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(d > 0, d ** (-s), 0.0)  # (rows, n)
        diff = np.abs(vals[:, a:b, None] - vals[:, None, :])
        out = np.maximum(out, np.max(diff * w[None], axis=(1, 2)))
    return out


def morrey_ratio(u, level=None):
    if isinstance(u, DiscreteFunction):
        level, u = u.level, u.values
    return float(morrey_ratios(u, level)[0])


@dataclass(frozen=True)
class SupCheck:
    holds: bool
    max_abs: float
    bound: float
    witness: int  # vertex index where |u| is largest


def sup_estimate_check(u, level=None):
    """Check max|u| <= (2N+3) sqrt(W_m(u)) for zero-boundary u."""
    if isinstance(u, DiscreteFunction):
        level, u = u.level, u.values
    u = np.asarray(u, dtype=float)
    if np.any(u[level.boundary] != 0):
        raise ValueError("sup estimate needs zero boundary values")
    w = int(np.argmax(np.abs(u)))
    bound = morrey_constant(level.N) * math.sqrt(energy(u, level))
    max_abs = float(abs(u[w]))
    return SupCheck(max_abs <= bound * (1 + 1e-12), max_abs, bound, w)
