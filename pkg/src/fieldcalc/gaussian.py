"""Gaussian reference state: metric, pair-partition moments, b / b* operators.

Weight convention (fixed here, used everywhere): the field at the m points is
a random vector whose covariance matrix is the metric ``g`` itself, and a
source couples through j^x phi_x = sum_x w_x j_x phi_x.  The inverse metric
g^{xy} is the matrix W^-1 g^-1 W^-1 (W = diag(w)), so that

    sum_y w_y g_{xy} g^{yz} = delta_{xz} / w_z,

the discrete delta function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from . import multiindex as mi
from .combinatorics import PAIR_GUARD, SizeLimitError, enumerate_pair_partitions
from .series import (
    BaseSpace,
    SymmetricSeries,
    derivative,
    eval_generating,
    exponential_vector,
    wick_product,
)

__all__ = [
    "SingularMetricError",
    "Metric",
    "metric_inverse",
    "isserlis_moment",
    "gaussian_series",
    "apply_b",
    "apply_b_star",
    "apply_b_upper",
    "bochner_spotcheck",
]

COND_LIMIT = 1e13


class SingularMetricError(np.linalg.LinAlgError):
    pass


def metric_inverse(g, B: BaseSpace) -> np.ndarray:
    """Weighted inverse g^{xy} = W^-1 g^-1 W^-1."""
    g = np.asarray(g, dtype=float)
    if g.shape != (B.m, B.m):
        raise ValueError(f"metric shape {g.shape} does not match m={B.m}")
    if not np.allclose(g, g.T, rtol=0, atol=1e-12):
        raise ValueError("metric must be symmetric")
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMetricError(f"metric is singular (condition number {cond:.3e})")
    winv = 1.0 / B.weights
    return winv[:, None] * np.linalg.inv(g) * winv[None, :]


@dataclass(frozen=True)
class Metric:
    """Symmetric invertible two-point kernel g_{xy} with its weighted inverse."""

    g: np.ndarray
    base: BaseSpace
    g_inv: np.ndarray
    cond: float

    @classmethod
    def from_matrix(cls, g, base: BaseSpace) -> "Metric":
        g = np.array(g, dtype=float)
        inv = metric_inverse(g, base)
        g.setflags(write=False)
        inv.setflags(write=False)
        return cls(g, base, inv, float(np.linalg.cond(g)))

    @property
    def m(self) -> int:
        return self.base.m

    def is_positive_definite(self) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.g) > 0))

    def lower(self, j) -> np.ndarray:
        """j_x = sum_y w_y g_{xy} j^y."""
        return self.g @ (self.base.weights * np.asarray(j, dtype=float))


MetricLike = Union[Metric, np.ndarray, Sequence]


def _matrix(g: MetricLike) -> np.ndarray:
    return g.g if isinstance(g, Metric) else np.asarray(g, dtype=float)


@lru_cache(maxsize=None)
def _pairing_array(n: int) -> np.ndarray:
    pairs = [p.pairs for p in enumerate_pair_partitions(n)]
    return np.array(pairs, dtype=np.intp).reshape(len(pairs), n // 2, 2)


def _isserlis_pairings(g: np.ndarray, X: tuple) -> float:
    n = len(X)
    if n > PAIR_GUARD:
        raise SizeLimitError(f"pair-partition sum at order {n} exceeds guard {PAIR_GUARD}")
    if n == 0:
        return 1.0
    P = _pairing_array(n)
    x = np.asarray(X, dtype=np.intp)
    vals = g[x[P[:, :, 0]], x[P[:, :, 1]]]
    return math.fsum(vals.prod(axis=1))


def _isserlis_table(g: np.ndarray, n_max: int) -> dict:
    # G(x0 + R) = sum over x' in R of mult_R(x') g[x0, x'] G(R - x'), bottom up
    m = g.shape[0]
    G: dict = {(): 1.0}
    for n in range(2, n_max + 1, 2):
        for X in mi.indices(m, n):
            x0, rest = X[0], X[1:]
            total = 0.0
            for xp, c in sorted(mi.multiplicities(rest).items()):
                total += c * g[x0, xp] * G[mi.remove(rest, xp)]
            G[X] = total
    return G


def isserlis_moment(g: MetricLike, X, method: str = "recursive") -> float:
    """Gaussian moment E[phi_X]: sum over pair partitions of the positions of X.

    ``method="pairings"`` sums the pair partitions explicitly (subject to the
    pair-partition size guard); ``"recursive"`` uses the equivalent recursion
    that peels off the partner of the first position.
    """
    g = _matrix(g)
    X = mi.canonical(X)
    if len(X) % 2:
        return 0.0
    if method == "pairings":
        return _isserlis_pairings(g, X)
    if method != "recursive":
        raise ValueError(f"unknown method {method!r}")
    return _isserlis_sub(g, X)


def _isserlis_sub(g: np.ndarray, X: tuple, memo=None) -> float:
    if memo is None:
        memo = {}
    if not X:
        return 1.0
    if X in memo:
        return memo[X]
    x0, rest = X[0], X[1:]
    total = 0.0
    for xp, c in sorted(mi.multiplicities(rest).items()):
        total += c * g[x0, xp] * _isserlis_sub(g, mi.remove(rest, xp), memo)
    memo[X] = total
    return total


def gaussian_series(g: MetricLike, mean=None, n_max: int = 4, check_pd: bool = True) -> SymmetricSeries:
    """Moments of the Gaussian state with covariance g and mean ``mean``, to n_max.

    The covariance may be singular (g = 0 gives a deterministic field), but
    with ``check_pd`` it must be positive semidefinite.

    With a mean, phi = mean + xi and the moments mix mean powers with centred
    pair sums: G = exp^mean <> G_centred.
    """
    gm = _matrix(g)
    if check_pd:
        ev = np.linalg.eigvalsh(gm)
        if ev[0] < -1e-12 * max(1.0, float(np.max(np.abs(ev)))):
            raise ValueError("Gaussian state needs a positive semidefinite covariance")
    m = gm.shape[0]
    centred = SymmetricSeries(m, n_max, _isserlis_table(gm, n_max))
    if mean is None:
        return centred
    mean = np.asarray(mean, dtype=float)
    if not np.any(mean):
        return centred
    return wick_product(exponential_vector(mean, n_max), centred)


def apply_b(x: int, F: SymmetricSeries) -> SymmetricSeries:
    """(b_x F)_X = F_{X + {x}}."""
    return derivative(F, x)


def apply_b_star(g: MetricLike, x: int, F: SymmetricSeries) -> SymmetricSeries:
    """(b*_x F)_X = sum over positions x' of X of g_{x x'} F_{X - {x'}}; raises n_max by one."""
    gm = _matrix(g)
    n = F.n_max + 1
    out = {}
    for X in mi.indices_upto(F.m, n):
        if not X:
            continue
        out[X] = sum(c * gm[x, xp] * F[mi.remove(X, xp)] for xp, c in sorted(mi.multiplicities(X).items()))
    return SymmetricSeries(F.m, n, out)


def apply_b_upper(metric: Metric, x: int, F: SymmetricSeries) -> SymmetricSeries:
    """b^x = g^{xy} b_y, contracted with the weights."""
    w = metric.base.weights
    out = SymmetricSeries.zero(F.m, F.n_max - 1)
    for y in range(F.m):
        c = w[y] * metric.g_inv[x, y]
        if c != 0.0:
            out = out + c * derivative(F, y)
    return out


def bochner_spotcheck(G: SymmetricSeries, sources, B: BaseSpace) -> float:
    """Smallest eigenvalue of M_nm = Z_G(j_n + j_m) for real sources.

    Only as good as G's truncation: a genuine state gives a nonnegative value
    once the truncation has converged for the given sources.
    """
    js = [np.asarray(j, dtype=float) for j in sources]
    N = len(js)
    M = np.empty((N, N))
    for a in range(N):
        for b in range(a, N):
            M[a, b] = M[b, a] = eval_generating(G, js[a] + js[b], B)
    return float(np.linalg.eigvalsh(M)[0])
