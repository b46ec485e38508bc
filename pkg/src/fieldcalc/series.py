"""Truncated symmetric series over a finite weighted base space.

A :class:`SymmetricSeries` holds the values F(x_1, ..., x_n) of a family of
completely symmetric functions, one entry per canonical (sorted) multi-index,
for all orders n <= ``n_max``.  The base space is a set of ``m`` points with
positive quadrature weights; the Guichardet integral of F is

    sum_n 1/n! sum_{x_1..x_n} F(x_1..x_n) w_{x_1} ... w_{x_n}

which on canonical indices becomes sum_X F(X) prod(w^X) / prod(mult(X)!).
Repeated points are kept: every identity in this module is an identity about
tuples over a finite set, and holds with diagonals included.

Conventions
-----------
* A source j contracts with a series as j^X F_X with the Guichardet weight,
  so Z_F(j) = sum_X F(X) prod((w j)^X) / X!.
* The functional derivative with respect to j(x) is (1/w_x) d/dj_x.
* Wick products split positions, so a split of X into (X1, X2) counts the
  prod_x C(mult_X(x), mult_X1(x)) position subsets that realize it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import multiindex as mi

__all__ = [
    "BaseSpace",
    "SymmetricSeries",
    "TruncationError",
    "guichardet_integral",
    "pairing",
    "exponential_vector",
    "eval_generating",
    "hadamard",
    "wick_product",
    "wick_power",
    "derivative",
    "compose",
    "exp_series",
    "log_series",
    "inverse_series",
    "sum_integral",
    "decomposition_integral",
]


class TruncationError(ValueError):
    """An operation needs more orders than the series carries."""


@dataclass(frozen=True)
class BaseSpace:
    """m points with positive quadrature weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size < 1:
            raise ValueError("base space needs at least one point")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, m: int, weight: float = 1.0) -> "BaseSpace":
        return cls(np.full(m, float(weight)))

    @property
    def m(self) -> int:
        return int(self.weights.size)


class SymmetricSeries:
    """Sparse map from canonical multi-index to value, truncated at ``n_max``.

    Absent entries are zero.  Instances are treated as immutable; every
    operation returns a new series.
    """

    __slots__ = ("m", "n_max", "_c")
    # numpy scalars defer to our arithmetic instead of broadcasting
    __array_ufunc__ = None

    def __init__(self, m: int, n_max: int, entries: Optional[Mapping] = None):
        if m < 1:
            raise ValueError("m must be >= 1")
        if n_max < -1:
            raise ValueError("n_max must be >= -1")
        self.m = int(m)
        self.n_max = int(n_max)
        c: dict = {}
        for idx, val in (entries or {}).items():
            key = mi.canonical(idx)
            if len(key) > n_max:
                raise TruncationError(f"index {key} exceeds n_max={n_max}")
            if key and (key[0] < 0 or key[-1] >= m):
                raise ValueError(f"index {key} outside [0, {m})")
            val = float(val)
            if val != 0.0:
                c[key] = c.get(key, 0.0) + val
        self._c = {k: v for k, v in c.items() if v != 0.0}

    # construction helpers
    @classmethod
    def unit(cls, m: int, n_max: int) -> "SymmetricSeries":
        return cls(m, n_max, {(): 1.0})

    @classmethod
    def zero(cls, m: int, n_max: int) -> "SymmetricSeries":
        return cls(m, n_max)

    @classmethod
    def from_function(cls, m: int, n_max: int, f: Callable[[tuple], float]) -> "SymmetricSeries":
        return cls(m, n_max, {idx: f(idx) for idx in mi.indices_upto(m, n_max)})

    @classmethod
    def random(cls, m: int, n_max: int, rng: np.random.Generator, low=-1.0, high=1.0,
               const: Optional[float] = None) -> "SymmetricSeries":
        out = {idx: rng.uniform(low, high) for idx in mi.indices_upto(m, n_max)}
        if const is not None:
            out[()] = const
        return cls(m, n_max, out)

    # mapping protocol
    def __getitem__(self, idx) -> float:
        return self._c.get(mi.canonical(idx), 0.0)

    def __contains__(self, idx) -> bool:
        return mi.canonical(idx) in self._c

    def __len__(self) -> int:
        return len(self._c)

    def __iter__(self):
        return iter(self.keys())

    def keys(self) -> list:
        return sorted(self._c, key=lambda k: (len(k), k))

    def items(self) -> list:
        return [(k, self._c[k]) for k in self.keys()]

    def order(self, n: int) -> dict:
        return {k: v for k, v in self._c.items() if len(k) == n}

    def max_order(self) -> int:
        """Largest order carrying a nonzero entry (-1 if the series is zero)."""
        return max((len(k) for k in self._c), default=-1)

    @property
    def const(self) -> float:
        return self._c.get((), 0.0)

    # arithmetic
    def _same_space(self, other: "SymmetricSeries") -> None:
        if self.m != other.m:
            raise ValueError(f"base spaces differ: m={self.m} vs m={other.m}")

    def __add__(self, other):
        if isinstance(other, SymmetricSeries):
            self._same_space(other)
            n = min(self.n_max, other.n_max)
            out = dict(self.truncate(n)._c)
            for k, v in other._c.items():
                if len(k) <= n:
                    out[k] = out.get(k, 0.0) + v
            return SymmetricSeries(self.m, n, out)
        return self + SymmetricSeries(self.m, self.n_max, {(): float(other)})

    __radd__ = __add__

    def __neg__(self):
        return SymmetricSeries(self.m, self.n_max, {k: -v for k, v in self._c.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, SymmetricSeries):
            raise TypeError("use wick_product or hadamard to multiply two series")
        s = float(scalar)
        return SymmetricSeries(self.m, self.n_max, {k: s * v for k, v in self._c.items()})

    __rmul__ = __mul__

    def truncate(self, n: int) -> "SymmetricSeries":
        return SymmetricSeries(self.m, n, {k: v for k, v in self._c.items() if len(k) <= n})

    def max_abs_diff(self, other: "SymmetricSeries") -> float:
        self._same_space(other)
        keys = set(self._c) | set(other._c)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    def allclose(self, other: "SymmetricSeries", atol: float = 1e-12) -> bool:
        return self.max_abs_diff(other) <= atol

    def to_dense(self, n: int) -> np.ndarray:
        """Order-n component as a full symmetric tensor of shape (m,)*n."""
        out = np.zeros((self.m,) * n)
        for t in product(range(self.m), repeat=n):
            out[t] = self[t]
        return out

    # serialization
    def to_json(self) -> dict:
        return {
            "m": self.m,
            "n_max": self.n_max,
            "entries": [{"idx": list(k), "val": v} for k, v in self.items()],
        }

    @classmethod
    def from_json(cls, doc: Mapping, m: Optional[int] = None) -> "SymmetricSeries":
        entries = {tuple(e["idx"]): e["val"] for e in doc["entries"]}
        if m is None:
            m = doc.get("m")
        if m is None:
            m = 1 + max((max(k) for k in entries if k), default=0)
        idx_sorted = [list(k) == sorted(k) for k in entries]
        if not all(idx_sorted):
            raise ValueError("series entries must use sorted indices")
        return cls(int(m), int(doc["n_max"]), entries)

    def __repr__(self) -> str:
        return f"SymmetricSeries(m={self.m}, n_max={self.n_max}, nnz={len(self._c)})"


def _fsum(terms: Iterable[float]) -> float:
    # correctly rounded, hence independent of summation order
    return math.fsum(terms)


def _wj(j, B: BaseSpace) -> np.ndarray:
    j = np.asarray(j, dtype=float).reshape(-1)
    if j.size != B.m:
        raise ValueError(f"source has {j.size} entries, base space has {B.m} points")
    if not np.all(np.isfinite(j)):
        raise ValueError("source entries must be finite")
    return B.weights * j


def guichardet_integral(F: SymmetricSeries, B: BaseSpace) -> float:
    """Integral of F against the Guichardet measure, truncated at F.n_max."""
    return _fsum(v * mi.measure(k, B.weights) for k, v in F.items())


def pairing(F: SymmetricSeries, G: SymmetricSeries, B: BaseSpace) -> float:
    """The contraction F^X G_X = integral of F(X) G(X) dX."""
    F._same_space(G)
    n = min(F.n_max, G.n_max)
    small, big = (F, G) if len(F) <= len(G) else (G, F)
    return _fsum(v * big[k] * mi.measure(k, B.weights) for k, v in small.items() if len(k) <= n)


def hadamard(F: SymmetricSeries, G: SymmetricSeries) -> SymmetricSeries:
    """Pointwise product (F G)(X) = F(X) G(X)."""
    F._same_space(G)
    n = min(F.n_max, G.n_max)
    return SymmetricSeries(F.m, n, {k: v * G[k] for k, v in F.items() if len(k) <= n})


def exponential_vector(f, n_max: int) -> SymmetricSeries:
    """The series X -> prod_{x in X} f(x)."""
    f = np.asarray(f, dtype=float).reshape(-1)
    out = {}
    for k in mi.indices_upto(f.size, n_max):
        out[k] = float(np.prod(f[list(k)])) if k else 1.0
    return SymmetricSeries(f.size, n_max, out)


def eval_generating(F: SymmetricSeries, j, B: BaseSpace) -> float:
    """Z_F(j) = sum_n 1/n! integral F(x_1..x_n) j(x_1)..j(x_n) dx, truncated."""
    wj = _wj(j, B)
    terms = []
    for k, v in F.items():
        t = v
        for x in k:
            t *= wj[x]
        terms.append(t / mi.symmetry_factor(k))
    return _fsum(terms)


def wick_product(F: SymmetricSeries, G: SymmetricSeries) -> SymmetricSeries:
    """(F <> G)(X) = sum over ordered splits X = X1 + X2 of F(X1) G(X2).

    Exact at every retained order; truncated at min(F.n_max, G.n_max).
    """
    F._same_space(G)
    n = min(F.n_max, G.n_max)
    out = {}
    for X in mi.indices_upto(F.m, n):
        out[X] = _fsum(c * F[a] * G[b] for a, b, c in mi.splittings(X))
    return SymmetricSeries(F.m, n, out)


def wick_power(F: SymmetricSeries, n: int) -> SymmetricSeries:
    if n < 0:
        raise ValueError("Wick power needs n >= 0")
    out = SymmetricSeries.unit(F.m, F.n_max)
    for _ in range(n):
        out = wick_product(out, F)
    return out


def derivative(F: SymmetricSeries, x: int) -> SymmetricSeries:
    """Functional derivative in the source: X -> F(X + {x}); n_max drops by one."""
    if not 0 <= x < F.m:
        raise ValueError(f"point {x} outside [0, {F.m})")
    n = F.n_max - 1
    return SymmetricSeries(F.m, n, {X: F[X + (x,)] for X in mi.indices_upto(F.m, n)})


Coefficients = Union[Sequence[float], Callable[[int], float]]


def compose(h: Coefficients, F: SymmetricSeries, terms: Optional[int] = None) -> SymmetricSeries:
    """Series H with Z_H = h(Z_F), as H = sum_n h_n / n! F^{<>n}.

    ``h`` gives the Maclaurin derivatives h_n = h^(n)(0), either as a finite
    sequence or as a callable n -> h_n.  When F has no constant term the
    Wick powers vanish below order n and the result is exact to F.n_max.
    Otherwise the sum over n does not terminate and must be cut explicitly,
    either by a finite ``h`` or by ``terms``.
    """
    if callable(h):
        K = terms
        coeff = h
    else:
        K = len(h) - 1 if terms is None else min(terms, len(h) - 1)
        seq = [float(c) for c in h]
        coeff = seq.__getitem__
    if F.const == 0.0:
        K = F.n_max if K is None else min(K, F.n_max)
    elif K is None:
        raise TruncationError("F has a constant term: give a finite h or terms=K")
    out = SymmetricSeries.zero(F.m, F.n_max)
    power = SymmetricSeries.unit(F.m, F.n_max)
    for n in range(K + 1):
        c = coeff(n)
        if c != 0.0:
            out = out + (c / math.factorial(n)) * power
        if n < K:
            power = wick_product(power, F)
    return out


def exp_series(K: SymmetricSeries) -> SymmetricSeries:
    """Moments from cumulants: G(X) = sum over partitions of X of prod K(blocks).

    Organized by the block holding the first position of X, which gives the
    recursion G(X) = sum_{X1 containing x0} c K(X1) G(X - X1).
    """
    if K.const != 0.0:
        raise ValueError(f"exp_series needs K(empty) = 0, got {K.const!r}")
    G: dict = {(): 1.0}
    for X in mi.indices_upto(K.m, K.n_max):
        if not X:
            continue
        x0 = X[0]
        rest = X[1:]
        terms = []
        for a, b, c in mi.splittings(rest):
            # a + {x0} is the block of the first position
            terms.append(c * K[(x0,) + a] * G.get(b, 0.0))
        G[X] = _fsum(terms)
    return SymmetricSeries(K.m, K.n_max, G)


def _log1p_derivative(n: int) -> float:
    # d^n/dz^n ln(1+z) at 0: (-1)^(n-1) (n-1)!, the partition-lattice Moebius weight
    return 0.0 if n == 0 else (-1.0) ** (n - 1) * math.factorial(n - 1)


def _drop_const(G: SymmetricSeries, scale: float = 1.0) -> SymmetricSeries:
    return SymmetricSeries(G.m, G.n_max, {k: scale * v for k, v in G.items() if k})


def log_series(G: SymmetricSeries) -> SymmetricSeries:
    """Cumulants from moments, the inverse of :func:`exp_series`.

    K(X) = sum over partitions of X of (-1)^(N-1) (N-1)! prod G(blocks) for a
    normalized G, with N the number of blocks.  (Statements of this formula
    with weights (-1)^N (N-1)! or (-1)^N N! have the wrong sign/placement;
    the scalar oracle fixes the ones used here.)

    A constant G(empty) = c != 1 is factored out: the log of G / c is taken
    and ln(c) added to the empty entry.  c must be positive.
    """
    c = G.const
    if not c > 0.0:
        raise ValueError(f"log_series needs G(empty) > 0, got {c!r}")
    shifted = _drop_const(G, 1.0 / c)
    K = compose(_log1p_derivative, shifted)
    if c != 1.0:
        K = K + math.log(c)
    return K


def inverse_series(G: SymmetricSeries) -> SymmetricSeries:
    """F with Z_F Z_G = 1, composing z -> 1/z about c = G(empty).

    The n-th derivative of 1/z at c is (-1)^n n! / c^(n+1).  (The weight
    quoted as (-1)^(n+1) n! elsewhere has the opposite sign.)
    """
    c = G.const
    if c == 0.0:
        raise ValueError("inverse_series needs G(empty) != 0")
    shifted = _drop_const(G)
    return compose(lambda n: (-1.0) ** n * math.factorial(n) / c ** (n + 1), shifted)


def sum_integral(func: Callable[..., float], p: int, B: BaseSpace, n_max: int) -> float:
    """Iterated integral of func(X_1..X_p) dX_1..dX_p over total order <= n_max."""
    terms = []

    def rec(prefix: tuple, left: int):
        if len(prefix) == p:
            w = 1.0
            for X in prefix:
                w *= mi.measure(X, B.weights)
            terms.append(func(*prefix) * w)
            return
        for n in range(left + 1):
            for X in mi.indices(B.m, n):
                rec(prefix + (X,), left - n)

    rec((), n_max)
    return _fsum(terms)


def decomposition_integral(func: Callable[..., float], p: int, B: BaseSpace, n_max: int) -> float:
    """Integral over X of the sum over ordered decompositions X_1 + ... + X_p = X.

    Decompositions assign each position of X to one of p labelled parts.
    """
    terms = []
    for X in mi.indices_upto(B.m, n_max):
        inner = []
        for labels in product(range(p), repeat=len(X)):
            parts = [[] for _ in range(p)]
            for x, lab in zip(X, labels):
                parts[lab].append(x)
            inner.append(func(*(tuple(q) for q in parts)))
        terms.append(_fsum(inner) * mi.measure(X, B.weights))
    return _fsum(terms)
