"""Canonical multi-indices: sorted tuples of base-space points, repeats allowed."""

from __future__ import annotations

from collections import Counter
from itertools import combinations_with_replacement, product
from math import comb, factorial, prod
from typing import Iterator

import numpy as np


def canonical(idx) -> tuple:
    return tuple(sorted(int(i) for i in idx))


def indices(m: int, n: int) -> Iterator[tuple]:
    """All canonical multi-indices of order n over m points."""
    return combinations_with_replacement(range(m), n)


def indices_upto(m: int, n_max: int) -> Iterator[tuple]:
    for n in range(n_max + 1):
        yield from indices(m, n)


def count_indices(m: int, n: int) -> int:
    return comb(n + m - 1, n) if m > 0 else int(n == 0)


def multiplicities(idx: tuple) -> Counter:
    return Counter(idx)


def symmetry_factor(idx: tuple) -> int:
    """prod of mult(x)!, the number of position permutations fixing ``idx``."""
    return prod(factorial(c) for c in Counter(idx).values())


def permutation_count(idx: tuple) -> int:
    """n! / prod mult!, the number of tuples whose sorted form is ``idx``."""
    return factorial(len(idx)) // symmetry_factor(idx)


def measure(idx: tuple, weights: np.ndarray) -> float:
    """Guichardet weight of a canonical index: prod w / prod mult!."""
    out = 1.0
    for x in idx:
        out *= weights[x]
    return out / symmetry_factor(idx)


def add(idx: tuple, *points: int) -> tuple:
    return canonical(idx + tuple(points))


def remove(idx: tuple, x: int) -> tuple:
    lst = list(idx)
    lst.remove(x)
    return tuple(lst)


def splittings(idx: tuple) -> Iterator[tuple[tuple, tuple, int]]:
    """Yield (X1, X2, c): every sub-multiset X1 with complement X2.

    ``c`` is the number of position subsets of ``idx`` realizing the split,
    prod_x C(mult(x), mult_X1(x)).
    """
    counts = sorted(Counter(idx).items())
    pts = [p for p, _ in counts]
    for ks in product(*(range(c + 1) for _, c in counts)):
        left: list[int] = []
        right: list[int] = []
        c = 1
        for p, k, (_, total) in zip(pts, ks, counts):
            left.extend([p] * k)
            right.extend([p] * (total - k))
            c *= comb(total, k)
        yield tuple(left), tuple(right), c
