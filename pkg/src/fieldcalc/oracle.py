"""Brute-force references, kept free of the canonical-index contraction code.

* Gauss-Hermite quadrature for Gaussian expectations (m <= 3);
* seeded Monte Carlo (PCG64 bit generator, Cholesky draws);
* naive nested loops over ordered tuples for every series contraction;
* ordinary power-series arithmetic in one variable.

Nothing here calls into ``series.wick_product``, ``series.eval_generating`` or
the multiplicity helpers; series values are only read through indexing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .series import BaseSpace, SymmetricSeries

__all__ = [
    "QuadratureRule",
    "gauss_hermite_rule",
    "gh_expectation",
    "gh_expectation_fn",
    "mc_expectation",
    "naive_integral",
    "naive_eval",
    "naive_wick",
    "naive_polynomial",
    "directional_coefficients",
    "scalar_mul",
    "scalar_compose",
    "scalar_log",
    "scalar_inverse",
    "scalar_exp",
    "taylor_coefficients",
    "NAIVE_GUARD",
]

GH_ORDER = 40
NAIVE_GUARD = 2_000_000


@dataclass(frozen=True)
class QuadratureRule:
    """Tensorized Gauss-Hermite nodes (K, m) and weights (K,) for N(0, g)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int


def gauss_hermite_rule(g, order: int = GH_ORDER) -> QuadratureRule:
    g = np.atleast_2d(np.asarray(g, dtype=float))
    m = g.shape[0]
    if m > 3:
        raise ValueError("tensorized quadrature limited to m <= 3")
    z, wz = hermegauss(order)
    wz = wz / math.sqrt(2 * math.pi)
    L = np.linalg.cholesky(g)
    Z = np.array(list(product(z, repeat=m)))
    W = np.array([math.prod(t) for t in product(wz, repeat=m)])
    return QuadratureRule(Z @ L.T, W, order)


def naive_polynomial(coeffs: SymmetricSeries, phi: np.ndarray, B: BaseSpace = None) -> np.ndarray:
    """Evaluate sum_n 1/n! sum_{tuples} c(t) prod_k w_{t_k} phi_{t_k} at each row of phi.

    With ``B=None`` the coefficients are plain monomial coefficients instead:
    sum over canonical X of c(X) prod phi_X.
    """
    phi = np.atleast_2d(phi)
    out = np.zeros(phi.shape[0])
    if B is None:
        for X, c in coeffs.items():
            out += c * np.prod(phi[:, list(X)], axis=1) if X else c
        return out
    w = B.weights
    for n in range(coeffs.n_max + 1):
        acc = np.zeros(phi.shape[0])
        for t in product(range(coeffs.m), repeat=n):
            c = coeffs[t]
            if c:
                acc += c * np.prod(phi[:, list(t)] * w[list(t)], axis=1)
        out += acc / math.factorial(n)
    return out


def gh_expectation(g, poly: SymmetricSeries, order: int = GH_ORDER) -> float:
    """E_g[p(phi)] for the polynomial p(phi) = sum_X poly[X] phi_X (plain monomials)."""
    deg = poly.max_order()
    if deg > 2 * order - 1:
        raise ValueError(f"degree {deg} exceeds exactness limit {2 * order - 1} of order {order}")
    rule = gauss_hermite_rule(g, order)
    return math.fsum(rule.weights * naive_polynomial(poly, rule.nodes))


def gh_expectation_fn(g, f: Callable[[np.ndarray], np.ndarray], order: int = GH_ORDER) -> float:
    """E_g[f(phi)] for f evaluated on an (K, m) array of field values."""
    rule = gauss_hermite_rule(g, order)
    return math.fsum(rule.weights * f(rule.nodes))


def mc_expectation(g, f: Callable[[np.ndarray], np.ndarray], samples: int, seed: int,
                   chunk: int = 250_000) -> tuple[float, float]:
    """Sample mean and standard error of f(phi), phi ~ N(0, g).

    Draws come from numpy's PCG64 seeded with ``seed``, in chunks of
    ``chunk`` rows combined in order; the result is reproducible bit for bit.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    g = np.atleast_2d(np.asarray(g, dtype=float))
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive definite") from exc
    rng = np.random.Generator(np.random.PCG64(seed))
    s1 = s2 = 0.0
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        phi = rng.standard_normal((k, g.shape[0])) @ L.T
        vals = np.broadcast_to(np.asarray(f(phi), dtype=float), (k,))
        s1 += math.fsum(vals)
        s2 += math.fsum(vals * vals)
        done += k
    mean = s1 / samples
    if samples == 1:
        return mean, 0.0
    var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    return mean, math.sqrt(var / samples)


def _guard(m: int, n: int) -> None:
    if m ** n > NAIVE_GUARD:
        raise ValueError(f"naive loop over {m}^{n} tuples exceeds guard {NAIVE_GUARD}")


def naive_integral(F: SymmetricSeries, B: BaseSpace) -> float:
    """sum_n 1/n! sum over all ordered tuples of F(t) prod w_t."""
    w = B.weights
    total = []
    for n in range(F.n_max + 1):
        _guard(F.m, n)
        acc = math.fsum(F[t] * math.prod(w[i] for i in t) for t in product(range(F.m), repeat=n))
        total.append(acc / math.factorial(n))
    return math.fsum(total)


def naive_eval(F: SymmetricSeries, j, B: BaseSpace) -> float:
    """Z_F(j) by the same tuple loops, weights w_x j_x per slot."""
    wj = B.weights * np.asarray(j, dtype=float)
    total = []
    for n in range(F.n_max + 1):
        _guard(F.m, n)
        acc = math.fsum(F[t] * math.prod(wj[i] for i in t) for t in product(range(F.m), repeat=n))
        total.append(acc / math.factorial(n))
    return math.fsum(total)


def naive_wick(F: SymmetricSeries, G: SymmetricSeries) -> SymmetricSeries:
    """(F <> G) on every ordered tuple, summing over all subsets of positions."""
    n_max = min(F.n_max, G.n_max)
    out = {}
    for n in range(n_max + 1):
        _guard(F.m, n)
        for t in product(range(F.m), repeat=n):
            if list(t) != sorted(t):
                continue
            acc = []
            for mask in range(1 << n):
                a = tuple(t[i] for i in range(n) if mask >> i & 1)
                b = tuple(t[i] for i in range(n) if not mask >> i & 1)
                acc.append(F[a] * G[b])
            out[t] = math.fsum(acc)
    return SymmetricSeries(F.m, n_max, out)


def directional_coefficients(F: SymmetricSeries, j, B: BaseSpace) -> np.ndarray:
    """Power-series coefficients a_n of t -> Z_F(t j), by tuple loops."""
    wj = B.weights * np.asarray(j, dtype=float)
    a = np.zeros(F.n_max + 1)
    for n in range(F.n_max + 1):
        _guard(F.m, n)
        acc = math.fsum(F[t] * math.prod(wj[i] for i in t) for t in product(range(F.m), repeat=n))
        a[n] = acc / math.factorial(n)
    return a


# one-variable power series: arrays of ordinary coefficients a_0..a_N

def scalar_mul(a: Sequence[float], b: Sequence[float], N: int = None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if N is None:
        N = min(len(a), len(b)) - 1
    out = np.zeros(N + 1)
    for n in range(N + 1):
        out[n] = math.fsum(a[k] * b[n - k] for k in range(n + 1) if k < len(a) and n - k < len(b))
    return out


def scalar_compose(h: Sequence[float], f: Sequence[float]) -> np.ndarray:
    """h(f(x)) truncated at len(f) - 1, by Horner.

    ``h`` holds ordinary coefficients of a polynomial.  If f_0 != 0 the
    result is exact only when that polynomial is all of h.
    """
    f = np.asarray(f, dtype=float)
    N = len(f) - 1
    out = np.zeros(N + 1)
    for c in reversed(list(h)):
        out = scalar_mul(out, f, N)
        out[0] += c
    return out


def scalar_log(f: Sequence[float]) -> np.ndarray:
    """log f for f_0 = 1, by b_n = a_n - (1/n) sum_{k<n} k b_k a_{n-k}."""
    a = np.asarray(f, dtype=float)
    if a[0] != 1.0:
        raise ValueError("scalar_log needs f_0 = 1")
    b = np.zeros_like(a)
    for n in range(1, len(a)):
        b[n] = a[n] - math.fsum(k * b[k] * a[n - k] for k in range(1, n)) / n
    return b


def scalar_inverse(f: Sequence[float]) -> np.ndarray:
    """1/f for f_0 != 0."""
    a = np.asarray(f, dtype=float)
    if a[0] == 0.0:
        raise ValueError("scalar_inverse needs f_0 != 0")
    b = np.zeros_like(a)
    b[0] = 1.0 / a[0]
    for n in range(1, len(a)):
        b[n] = -math.fsum(a[k] * b[n - k] for k in range(1, n + 1)) / a[0]
    return b


def scalar_exp(f: Sequence[float]) -> np.ndarray:
    """exp f for f_0 = 0, by b_n = (1/n) sum_k k a_k b_{n-k}."""
    a = np.asarray(f, dtype=float)
    if a[0] != 0.0:
        raise ValueError("scalar_exp needs f_0 = 0")
    b = np.zeros_like(a)
    b[0] = 1.0
    for n in range(1, len(a)):
        b[n] = math.fsum(k * a[k] * b[n - k] for k in range(1, n + 1)) / n
    return b


def taylor_coefficients(fn: Callable[[float], np.ndarray], h: float = 1e-2) -> list:
    """Coefficients c_0..c_4 of t -> fn(t) from the 5-point stencil t in {0, +-h, +-2h}.

    c_n = f^(n)(0)/n!; truncation errors are O(h^4) for n = 1, 2 and O(h^2)
    for n = 3, 4.
    """
    f = {k: np.asarray(fn(k * h), dtype=float) for k in (-2, -1, 0, 1, 2)}
    d1 = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * h)
    d2 = (-f[-2] + 16 * f[-1] - 30 * f[0] + 16 * f[1] - f[2]) / (12 * h**2)
    d3 = (-f[-2] + 2 * f[-1] - 2 * f[1] + f[2]) / (2 * h**3)
    d4 = (f[-2] - 4 * f[-1] + 6 * f[0] - 4 * f[1] + f[2]) / h**4
    return [f[0], d1, d2 / 2, d3 / 6, d4 / 24]
