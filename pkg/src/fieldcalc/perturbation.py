"""Interacting states E[A] = E_g[A e^V] / Xi, expanded without diagrams.

Every quantity is a contraction of the vertex sum

    Part(V)_Y = sum over partitions of Y into at most n_max blocks of prod v(blocks)

against Gaussian moments.  Two independent routes produce the same numbers:

* ``"wick"``: Part(V) = sum_{n <= n_max} V^{<>n} / n! from Wick powers, and the
  Gaussian moments from the pair-peeling recursion;
* ``"enumeration"``: Part(V) and Pair(g) summed over explicitly enumerated
  partitions and pair partitions (bounded by the enumeration guards).

Truncation is by vertex count ``n_max`` (powers of the coupling).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import multiindex as mi
from .combinatorics import PAIR_GUARD, PARTITION_GUARD, SizeLimitError, enumerate_partitions
from .gaussian import Metric, gaussian_series, isserlis_moment
from .series import (
    BaseSpace,
    SymmetricSeries,
    TruncationError,
    compose,
    exp_series,
    log_series,
    pairing,
)

__all__ = [
    "ORDER_GUARD",
    "Interaction",
    "ModelSpec",
    "part_series",
    "pair_series",
    "expect_exp",
    "partition_function",
    "interacting_moments",
    "moments_to_cumulants",
    "cumulants_to_moments",
    "ds_residual",
    "ds_max_residual",
]

# largest moment order the Wick route will build (n_max * d + N_max)
ORDER_GUARD = 24

STRATEGIES = ("wick", "enumeration")


@dataclass(frozen=True)
class Interaction:
    """V(phi) = coupling * sum_X V^X phi_X dX, with V^X stored in ``V``."""

    V: SymmetricSeries
    coupling: float = 1.0

    def __post_init__(self):
        if self.V.const != 0.0:
            raise ValueError("interaction must have V(empty) = 0")

    @property
    def degree(self) -> int:
        return max(self.V.max_order(), 0)

    @property
    def vertex(self) -> SymmetricSeries:
        """Coupling folded into the coefficients."""
        return self.coupling * self.V


@dataclass(frozen=True)
class ModelSpec:
    base: BaseSpace
    metric: Metric
    interaction: Interaction
    n_max: int = 2
    N_max: int = 4

    def __post_init__(self):
        m = self.base.m
        if self.metric.m != m or self.interaction.V.m != m:
            raise ValueError("base space, metric and interaction disagree on m")
        if self.n_max < 0 or self.N_max < 0:
            raise ValueError("truncation orders must be >= 0")

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def vertex_order(self) -> int:
        """Largest order reached by n_max vertices."""
        return self.n_max * self.interaction.degree

    def with_truncation(self, n_max: Optional[int] = None, N_max: Optional[int] = None) -> "ModelSpec":
        return ModelSpec(
            self.base,
            self.metric,
            self.interaction,
            self.n_max if n_max is None else n_max,
            self.N_max if N_max is None else N_max,
        )


def _extend(V: SymmetricSeries, order: int) -> SymmetricSeries:
    return SymmetricSeries(V.m, order, {k: v for k, v in V.items() if len(k) <= order})


@lru_cache(maxsize=64)
def _restricted_partitions(n: int, max_blocks: int, max_block_size: int) -> tuple:
    return tuple(p.blocks for p in enumerate_partitions(n, max_blocks, max_block_size))


def part_series(V: SymmetricSeries, max_blocks: int, order: int) -> SymmetricSeries:
    """Part(V)_X restricted to at most ``max_blocks`` blocks, by explicit enumeration."""
    if V.const != 0.0:
        raise ValueError("Part(V) needs V(empty) = 0")
    if order > PARTITION_GUARD:
        raise SizeLimitError(f"Part(V) at order {order} exceeds guard {PARTITION_GUARD}")
    d = max(V.max_order(), 1)
    out = {}
    for X in mi.indices_upto(V.m, order):
        blocks_list = _restricted_partitions(len(X), max_blocks, d)
        terms = []
        for blocks in blocks_list:
            t = 1.0
            for b in blocks:
                t *= V[tuple(X[i] for i in b)]
                if t == 0.0:
                    break
            terms.append(t)
        out[X] = math.fsum(terms)
    return SymmetricSeries(V.m, order, out)


def _vertex_sum_wick(V: SymmetricSeries, n_vertices: int, order: int) -> SymmetricSeries:
    # sum_{n <= n_vertices} V^{<>n} / n!
    return compose([1.0] * (n_vertices + 1), _extend(V, order))


def pair_series(g, order: int) -> SymmetricSeries:
    """Pair(g)_X for every X up to ``order``, by explicit pair-partition sums."""
    gm = g.g if isinstance(g, Metric) else np.asarray(g, dtype=float)
    if order > PAIR_GUARD:
        raise SizeLimitError(f"Pair(g) at order {order} exceeds guard {PAIR_GUARD}")
    m = gm.shape[0]
    out = {X: isserlis_moment(gm, X, method="pairings") for X in mi.indices_upto(m, order) if len(X) % 2 == 0}
    return SymmetricSeries(m, order, out)


def expect_exp(V: SymmetricSeries, G: SymmetricSeries, B: BaseSpace, n_max: int) -> float:
    """E[e^V] truncated at n_max vertices, for any state with moments G.

    Computed as the contraction of the vertex sum Part(V) with G.
    """
    order = min(G.n_max, n_max * max(V.max_order(), 0))
    return pairing(part_series(V, n_max, order), G, B)


def _check_strategy(strategy: str) -> None:
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")


def _ingredients(model: ModelSpec, N: int, strategy: str):
    L = model.vertex_order
    total = L + N
    v = model.interaction.vertex
    if strategy == "wick":
        if total > ORDER_GUARD:
            raise SizeLimitError(f"moment order {total} exceeds guard {ORDER_GUARD}")
        P = _vertex_sum_wick(v, model.n_max, L)
        Gg = gaussian_series(model.metric, None, total, check_pd=False)
    else:
        P = part_series(v, model.n_max, L)
        Gg = pair_series(model.metric, total)
    return P, Gg


def _contract(P: SymmetricSeries, Gg: SymmetricSeries, X: tuple, w: np.ndarray) -> float:
    return math.fsum(
        val * mi.measure(Y, w) * Gg[X + Y] for Y, val in P.items()
    )


def partition_function(model: ModelSpec, strategy: str = "wick") -> float:
    """Xi = E_g[e^V] truncated at n_max vertices: Part(V)^X Pair(g)_X."""
    _check_strategy(strategy)
    P, Gg = _ingredients(model, 0, strategy)
    return _contract(P, Gg, (), model.base.weights)


def interacting_moments(
    model: ModelSpec, N_max: Optional[int] = None, strategy: str = "wick", threads: int = 1
) -> SymmetricSeries:
    """G_X = (1/Xi) Part(V)^Y Pair(g)_{Y+X} for all X up to N_max.

    Numerator and Xi use the same vertex truncation; G(empty) is 1 exactly.
    Per-index contractions are independent; ``threads > 1`` maps them over a
    thread pool with results collected in index order.
    """
    _check_strategy(strategy)
    N = model.N_max if N_max is None else N_max
    P, Gg = _ingredients(model, N, strategy)
    w = model.base.weights
    xi = _contract(P, Gg, (), w)
    if xi == 0.0:
        raise ZeroDivisionError("truncated partition function vanishes")
    keys = list(mi.indices_upto(model.m, N))

    def entry(X):
        return _contract(P, Gg, X, w) / xi

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(entry, keys))
    else:
        vals = [entry(X) for X in keys]
    out = dict(zip(keys, vals))
    out[()] = 1.0
    return SymmetricSeries(model.m, N, out)


def moments_to_cumulants(G: SymmetricSeries) -> SymmetricSeries:
    if G.const != 1.0:
        raise ValueError(f"moments must be normalized, G(empty) = {G.const!r}")
    return log_series(G)


def cumulants_to_moments(K: SymmetricSeries) -> SymmetricSeries:
    if K.const != 0.0:
        raise ValueError(f"cumulants need K(empty) = 0, got {K.const!r}")
    return exp_series(K)


def _vertex_force(v: SymmetricSeries, G: SymmetricSeries, X: tuple, w: np.ndarray) -> np.ndarray:
    # A_y = integral over Y of v^{y+Y} G_{X+Y} dY
    A = np.zeros(v.m)
    terms: dict = {}
    for Z, val in v.items():
        for y in set(Z):
            rest = mi.remove(Z, y)
            terms.setdefault(y, []).append(val * mi.measure(rest, w) * G[X + rest])
    for y, t in terms.items():
        A[y] = math.fsum(t)
    return A


def _required_order(model: ModelSpec, X: tuple) -> int:
    return len(X) + max(1, model.interaction.degree - 1)


def ds_residual(model: ModelSpec, G: SymmetricSeries, X, x: int) -> float:
    """Dyson-Schwinger residual at (X, x):

        G_{X+x} - sum_{x' in X} g_{xx'} G_{X-x'} - sum_y w_y g_{xy} int v^{y+Y} G_{X+Y} dY

    which vanishes for the exact moments of the model.
    """
    X = mi.canonical(X)
    need = _required_order(model, X)
    if G.n_max < need:
        raise TruncationError(f"ds_residual at |X|={len(X)} needs G truncated at order >= {need}, got {G.n_max}")
    g = model.metric.g
    w = model.base.weights
    lhs = G[X + (x,)]
    free = math.fsum(c * g[x, xp] * G[mi.remove(X, xp)] for xp, c in mi.multiplicities(X).items())
    A = _vertex_force(model.interaction.vertex, G, X, w)
    inter = math.fsum(w[y] * g[x, y] * A[y] for y in range(model.m))
    return lhs - free - inter


def ds_max_residual(model: ModelSpec, G: SymmetricSeries, order: int) -> float:
    """max |ds_residual| over all X with |X| <= order and all points x."""
    worst = 0.0
    for X in mi.indices_upto(model.m, order):
        for x in range(model.m):
            worst = max(worst, abs(ds_residual(model, G, X, x)))
    return worst
