"""Field calculus on a finite weighted base space.

Truncated symmetric series, Wick products, partition and pair-partition
expansions of Gaussian and interacting states, the Dyson-Schwinger residual
and tree-level expansions, with brute-force oracles for all of them.
"""

from .combinatorics import (
    Apportionment,
    Hierarchy,
    PairPartition,
    Partition,
    SizeLimitError,
    count_hierarchies,
    count_pair_partitions,
    count_partitions,
    enumerate_apportionments,
    enumerate_hierarchies,
    enumerate_pair_partitions,
    enumerate_partitions,
)
from .gaussian import Metric, gaussian_series, isserlis_moment
from .perturbation import Interaction, ModelSpec, interacting_moments, partition_function
from .series import BaseSpace, SymmetricSeries

__version__ = "0.1.0"

__all__ = [
    "Apportionment",
    "BaseSpace",
    "Hierarchy",
    "Interaction",
    "Metric",
    "ModelSpec",
    "PairPartition",
    "Partition",
    "SizeLimitError",
    "SymmetricSeries",
    "count_hierarchies",
    "count_pair_partitions",
    "count_partitions",
    "enumerate_apportionments",
    "enumerate_hierarchies",
    "enumerate_pair_partitions",
    "enumerate_partitions",
    "gaussian_series",
    "interacting_moments",
    "isserlis_moment",
    "partition_function",
]
