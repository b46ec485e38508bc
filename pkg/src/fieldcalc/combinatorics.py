"""Partition-type structures over position sets {0, ..., n-1}.

Every enumerator is a lazy generator that emits each structure exactly once,
in increasing order of the structure's ``key()``.  The ``count_*`` functions
are closed forms / recurrences kept independent of the enumerators so that
the two can check each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterator, Optional

__all__ = [
    "SizeLimitError",
    "PARTITION_GUARD",
    "PAIR_GUARD",
    "HIERARCHY_GUARD",
    "Partition",
    "PairPartition",
    "Apportionment",
    "Hierarchy",
    "enumerate_partitions",
    "enumerate_pair_partitions",
    "enumerate_apportionments",
    "enumerate_hierarchies",
    "count_partitions",
    "count_pair_partitions",
    "count_hierarchies",
]

PARTITION_GUARD = 12
PAIR_GUARD = 14
HIERARCHY_GUARD = 9


class SizeLimitError(ValueError):
    """Raised when an enumeration is requested beyond its size guard."""


def _check(n: int, guard: int, family: str, lower: int = 0) -> None:
    if not isinstance(n, int) or n < lower:
        raise ValueError(f"{family}: n must be an integer >= {lower}, got {n!r}")
    if n > guard:
        raise SizeLimitError(f"{family}: n={n} exceeds the size guard n <= {guard}")


def _fmt_blocks(blocks) -> str:
    if not blocks:
        return "[]"
    return "".join("{" + ",".join(map(str, b)) + "}" for b in blocks)


def _rgs_of(blocks, n: int) -> tuple:
    rgs = [0] * n
    for label, block in enumerate(blocks):
        for i in block:
            rgs[i] = label
    return tuple(rgs)


@dataclass(frozen=True)
class Partition:
    """A set partition of {0..n-1}; blocks sorted, ordered by smallest element."""

    n: int
    blocks: tuple

    @classmethod
    def from_rgs(cls, rgs) -> "Partition":
        blocks: list[list[int]] = []
        for i, label in enumerate(rgs):
            if label == len(blocks):
                blocks.append([])
            blocks[label].append(i)
        return cls(len(rgs), tuple(tuple(b) for b in blocks))

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def rgs(self) -> tuple:
        return _rgs_of(self.blocks, self.n)

    def key(self) -> tuple:
        return self.rgs

    def is_valid(self) -> bool:
        seen = [i for b in self.blocks for i in b]
        return (
            all(len(b) > 0 for b in self.blocks)
            and sorted(seen) == list(range(self.n))
            and all(list(b) == sorted(b) for b in self.blocks)
            and [b[0] for b in self.blocks] == sorted(b[0] for b in self.blocks)
        )

    def __str__(self) -> str:
        return _fmt_blocks(self.blocks)


@dataclass(frozen=True)
class PairPartition:
    """A perfect matching of {0..n-1}, pairs (i, j) with i < j sorted by i."""

    n: int
    pairs: tuple

    @property
    def blocks(self) -> tuple:
        return self.pairs

    def key(self) -> tuple:
        return self.pairs

    def is_valid(self) -> bool:
        seen = [i for p in self.pairs for i in p]
        return (
            self.n % 2 == 0
            and all(len(p) == 2 and p[0] < p[1] for p in self.pairs)
            and sorted(seen) == list(range(self.n))
        )

    def __str__(self) -> str:
        return _fmt_blocks(self.pairs)


@dataclass(frozen=True)
class Apportionment:
    """A partition of {0..n-1}, optionally carrying a single empty block.

    The empty block, when present, is stored last as ``()``.
    """

    n: int
    blocks: tuple

    @property
    def has_empty(self) -> bool:
        return bool(self.blocks) and self.blocks[-1] == ()

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def partition(self) -> Partition:
        return Partition(self.n, tuple(b for b in self.blocks if b))

    def key(self) -> tuple:
        return (self.partition().rgs, self.has_empty)

    def is_valid(self) -> bool:
        empties = sum(1 for b in self.blocks if not b)
        return empties <= 1 and (not empties or self.has_empty) and self.partition().is_valid()

    def __str__(self) -> str:
        return _fmt_blocks(self.blocks)


@dataclass(frozen=True)
class Hierarchy:
    """Rooted tree whose leaves are labelled by positions.

    A leaf has ``label`` set and no children; an internal node has at least
    two children, listed in order of their smallest leaf.
    """

    label: Optional[int] = None
    children: tuple = ()

    @property
    def is_leaf(self) -> bool:
        return self.label is not None

    def leaves(self) -> tuple:
        if self.is_leaf:
            return (self.label,)
        return tuple(sorted(i for c in self.children for i in c.leaves()))

    def internal_nodes(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + sum(c.internal_nodes() for c in self.children)

    def key(self) -> tuple:
        if self.is_leaf:
            return ()
        leaves = self.leaves()
        pos = {x: i for i, x in enumerate(leaves)}
        blocks = [[pos[x] for x in c.leaves()] for c in self.children]
        return (_rgs_of(blocks, len(leaves)), tuple(c.key() for c in self.children))

    def is_valid(self) -> bool:
        if self.is_leaf:
            return not self.children
        if len(self.children) < 2 or not all(c.is_valid() for c in self.children):
            return False
        mins = [c.leaves()[0] for c in self.children]
        flat = [i for c in self.children for i in c.leaves()]
        return mins == sorted(mins) and len(flat) == len(set(flat))

    def __str__(self) -> str:
        if self.is_leaf:
            return str(self.label)
        return "{" + ",".join(str(c) for c in self.children) + "}"


def _rgs(n: int, max_blocks: Optional[int] = None, max_block_size: Optional[int] = None) -> Iterator[tuple]:
    # restricted growth strings in lexicographic order, with optional pruning
    if n == 0:
        yield ()
        return
    kmax = n if max_blocks is None else max_blocks
    smax = n if max_block_size is None else max_block_size
    a = [0] * n
    sizes: list[int] = []

    def rec(i: int) -> Iterator[tuple]:
        if i == n:
            yield tuple(a)
            return
        k = len(sizes)
        remaining = n - i
        for label in range(min(k + 1, kmax)):
            if label < k:
                if sizes[label] >= smax:
                    continue
                sizes[label] += 1
            else:
                sizes.append(1)
            # blocks still open must absorb the remaining elements
            if (kmax - len(sizes)) * smax + sum(smax - s for s in sizes) >= remaining - 1:
                a[i] = label
                yield from rec(i + 1)
            if label < k:
                sizes[label] -= 1
            else:
                sizes.pop()

    yield from rec(0)


def enumerate_partitions(
    n: int, max_blocks: Optional[int] = None, max_block_size: Optional[int] = None
) -> Iterator[Partition]:
    """Yield every partition of {0..n-1} in restricted-growth-string order.

    ``max_blocks`` / ``max_block_size`` prune the enumeration to partitions
    with at most that many blocks / that large a block.
    """
    _check(n, PARTITION_GUARD, "partitions")
    for rgs in _rgs(n, max_blocks, max_block_size):
        yield Partition.from_rgs(rgs)


def _pairings(items: tuple) -> Iterator[tuple]:
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            yield ((first, other),) + tail


def enumerate_pair_partitions(n: int) -> Iterator[PairPartition]:
    """Yield every pair partition of {0..n-1}; nothing for odd n."""
    _check(n, PAIR_GUARD, "pair partitions")
    if n % 2:
        return
    for pairs in _pairings(tuple(range(n))):
        yield PairPartition(n, pairs)


def enumerate_apportionments(n: int) -> Iterator[Apportionment]:
    """Yield each partition of {0..n-1}, each followed by its copy with one empty block."""
    _check(n, PARTITION_GUARD, "apportionments")
    for p in enumerate_partitions(n):
        yield Apportionment(n, p.blocks)
        yield Apportionment(n, p.blocks + ((),))


def _hierarchies(labels: tuple) -> Iterator[Hierarchy]:
    if len(labels) == 1:
        yield Hierarchy(label=labels[0])
        return
    for rgs in _rgs(len(labels)):
        if max(rgs) == 0:
            continue  # a single child would repeat its parent
        p = Partition.from_rgs(rgs)
        blocks = [tuple(labels[i] for i in b) for b in p.blocks]
        for children in _children(blocks, 0):
            yield Hierarchy(children=children)


def _children(blocks: list, i: int) -> Iterator[tuple]:
    if i == len(blocks):
        yield ()
        return
    for h in _hierarchies(blocks[i]):
        for rest in _children(blocks, i + 1):
            yield (h,) + rest


def enumerate_hierarchies(n: int) -> Iterator[Hierarchy]:
    """Yield every hierarchy (total partition) with leaves {0..n-1}."""
    _check(n, HIERARCHY_GUARD, "hierarchies", lower=1)
    yield from _hierarchies(tuple(range(n)))


@lru_cache(maxsize=None)
def count_partitions(n: int) -> int:
    """Bell number, via B(n+1) = sum_k C(n, k) B(k)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1
    return sum(comb(n - 1, k) * count_partitions(k) for k in range(n))


def count_pair_partitions(n: int) -> int:
    """(n-1)!! for even n, 0 for odd n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n % 2:
        return 0
    out = 1
    for k in range(n - 1, 0, -2):
        out *= k
    return out


@lru_cache(maxsize=None)
def _weighted_blocks(n: int, k: int) -> int:
    # ways to split {1..n} into k blocks, each block weighted by count_hierarchies(size)
    if k == 0:
        return 1 if n == 0 else 0
    if n < k:
        return 0
    return sum(
        comb(n - 1, s - 1) * count_hierarchies(s) * _weighted_blocks(n - s, k - 1)
        for s in range(1, n - k + 2)
    )


@lru_cache(maxsize=None)
def count_hierarchies(n: int) -> int:
    """Number of total partitions of an n-set (1, 1, 4, 26, 236, ... for n = 1, 2, ...)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 0
    if n == 1:
        return 1
    return sum(_weighted_blocks(n, k) for k in range(2, n + 1))
