"""Tree-level (stationary point) approximation of the generating functional.

The stationary field solves psi_x = j_x + V_x(psi), with the lowered source
j_x = sum_y w_y g_{xy} j^y and

    V_x(psi) = sum_y w_y g_{xy} int v^{y+X} psi_X dX.

Expanding psi in powers of j gives a sum over hierarchies (total partitions):

    psi_x = sum_n 1/n! sum_{H in Hier({1..n})} v_x(H)[j],

where each internal node of H carries one vertex contracted with its children
and lowered by one metric factor, and each leaf carries the lowered source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from . import multiindex as mi
from .combinatorics import HIERARCHY_GUARD, Hierarchy, SizeLimitError, enumerate_hierarchies
from .gaussian import Metric
from .perturbation import ModelSpec
from .series import SymmetricSeries, eval_generating

__all__ = [
    "ConvergenceError",
    "StationaryPoint",
    "WeightedHierarchy",
    "lower_source",
    "vertex_force",
    "picard_solve",
    "hierarchy_weight",
    "weighted_hierarchies",
    "tree_term",
    "tree_expand",
    "stationary_log_z",
]


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, history):
        super().__init__(msg)
        self.history = list(history)


@dataclass(frozen=True)
class WeightedHierarchy:
    hierarchy: Hierarchy
    root: int
    weight: float


@dataclass
class StationaryPoint:
    psi: np.ndarray
    log_z: float
    residual: float
    iterations: int
    history: list = field(default_factory=list)


def lower_source(g: Metric, j) -> np.ndarray:
    """j_x = sum_y w_y g_{xy} j^y."""
    return g.lower(j)


def _force_upper(v: SymmetricSeries, psi: np.ndarray, w: np.ndarray) -> np.ndarray:
    # A_y = int v^{y+X} psi_X dX
    A = np.zeros(v.m)
    for Z, val in v.items():
        for y in set(Z):
            rest = mi.remove(Z, y)
            t = val * mi.measure(rest, w)
            for a in rest:
                t *= psi[a]
            A[y] += t
    return A


def vertex_force(model: ModelSpec, psi) -> np.ndarray:
    """V_x(psi) = sum_y w_y g_{xy} int v^{y+X} psi_X dX."""
    w = model.base.weights
    A = _force_upper(model.interaction.vertex, np.asarray(psi, dtype=float), w)
    return model.metric.g @ (w * A)


def picard_solve(model: ModelSpec, j, tol: float = 1e-14, max_iter: int = 1000):
    """Fixed point of psi -> j_low + V(psi) by Picard iteration.

    Switches to a relaxed update (factor 0.5) when the step size grows twice
    in a row.  Returns (psi, history of max-norm step sizes).
    """
    j_low = lower_source(model.metric, j)
    psi = j_low.copy()
    history: list[float] = []
    damping = 1.0
    rising = 0
    eps_floor = 64 * np.finfo(float).eps
    for it in range(1, max_iter + 1):
        target = j_low + vertex_force(model, psi)
        new = psi + damping * (target - psi)
        step = float(np.max(np.abs(new - psi)))
        if not np.isfinite(step) or step > 1e12:
            raise ConvergenceError(f"Picard iteration diverged at step {it}", history + [step])
        history.append(step)
        psi = new
        if step <= tol or step <= eps_floor * max(1.0, float(np.max(np.abs(psi)))):
            return psi, history
        if len(history) > 1 and step > history[-2]:
            rising += 1
            if rising >= 2 and damping == 1.0:
                damping = 0.5
                rising = 0
        else:
            rising = 0
    raise ConvergenceError(f"no convergence after {max_iter} iterations (last step {history[-1]:.3e})", history)


@lru_cache(maxsize=32)
def _vertex_tensor_cached(key) -> np.ndarray:
    m, k, entries = key
    T = np.zeros((m,) * (k + 1))
    lookup = dict(entries)
    for t in product(range(m), repeat=k + 1):
        T[t] = lookup.get(mi.canonical(t), 0.0)
    return T


def _vertex_tensor(v: SymmetricSeries, k: int) -> np.ndarray:
    entries = tuple((key, val) for key, val in v.items() if len(key) == k + 1)
    return _vertex_tensor_cached((v.m, k, entries))


def _node_vectors(H: Hierarchy, v: SymmetricSeries, g: np.ndarray, w: np.ndarray, j_low: np.ndarray) -> np.ndarray:
    if H.is_leaf:
        return j_low
    kids = [_node_vectors(c, v, g, w, j_low) for c in H.children]
    T = _vertex_tensor(v, len(kids))
    for c in reversed(kids):
        T = T @ (w * c)
    return g @ (w * T)


def hierarchy_weight(model: ModelSpec, H: Hierarchy, j) -> np.ndarray:
    """v_x(H) contracted with the source at every leaf, as a vector over the root x."""
    j_low = lower_source(model.metric, j)
    return _node_vectors(H, model.interaction.vertex, model.metric.g, model.base.weights, j_low)


def weighted_hierarchies(model: ModelSpec, j, n: int):
    """Yield a WeightedHierarchy for every hierarchy on n leaves and every root point."""
    for H in enumerate_hierarchies(n):
        vec = hierarchy_weight(model, H, j)
        for x in range(model.m):
            yield WeightedHierarchy(H, x, float(vec[x]))


def tree_term(model: ModelSpec, j, n: int) -> np.ndarray:
    """Degree-n part of psi in the source: 1/n! times the sum over Hier({1..n})."""
    if n > HIERARCHY_GUARD:
        raise SizeLimitError(f"tree expansion at {n} leaves exceeds guard {HIERARCHY_GUARD}")
    total = np.zeros(model.m)
    terms = [hierarchy_weight(model, H, j) for H in enumerate_hierarchies(n)]
    for x in range(model.m):
        total[x] = math.fsum(t[x] for t in terms)
    return total / math.factorial(n)


def tree_expand(model: ModelSpec, j, max_leaves: int) -> np.ndarray:
    """psi truncated at ``max_leaves`` leaves."""
    if max_leaves > HIERARCHY_GUARD:
        raise SizeLimitError(f"max_leaves={max_leaves} exceeds guard {HIERARCHY_GUARD}")
    psi = np.zeros(model.m)
    for n in range(1, max_leaves + 1):
        psi = psi + tree_term(model, j, n)
    return psi


def stationary_log_z(model: ModelSpec, j, tol: float = 1e-14, max_iter: int = 1000) -> StationaryPoint:
    """log Z(j) at tree level: psi.j + S_0(psi) + V(psi) at the stationary psi.

    S_0(psi) = -1/2 psi_x g^{xy} psi_y (weighted).  The returned residual is
    max_x |j^x - g^{xy} psi_y + int v^{x+X} psi_X dX|.
    """
    j = np.asarray(j, dtype=float)
    psi, history = picard_solve(model, j, tol, max_iter)
    w = model.base.weights
    ginv = model.metric.g_inv
    v = model.interaction.vertex
    wpsi = w * psi
    source = float(np.dot(w * j, psi))
    s0 = -0.5 * float(wpsi @ ginv @ wpsi)
    pot = eval_generating(v, psi, model.base)
    grad = j - ginv @ wpsi + _force_upper(v, psi, w)
    return StationaryPoint(psi, source + s0 + pot, float(np.max(np.abs(grad))), len(history), history)
