"""
Index sets of the cluster sums: partitions of clustered sets, the
declusterization map, dissections of ordered label sets, compositions and the
Möbius inversion of correlation families.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from tensorcore.operators import LabeledOperator, tensor_all

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cluster:
    """A group of labels treated as one element when partitioning."""
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))

    def __str__(self):
        return "{" + ",".join(str(x) for x in self.labels) + "}"


@dataclass(frozen=True)
class ClusteredSet:
    elements: tuple

    def __post_init__(self):
        elements = tuple(e if isinstance(e, Cluster) else int(e) for e in self.elements)
        if sum(isinstance(e, Cluster) for e in elements) > 1:
            raise ValueError("a clustered set holds at most one cluster")
        flat = declusterize(elements)
        if len(set(flat)) != len(flat):
            raise ValueError(f"labels of {elements} are not distinct")
        object.__setattr__(self, "elements", elements)

    @classmethod
    def of(cls, s, n):
        """({Y}, s+1, ..., s+n) with Y = (1, ..., s)."""
        return cls((Cluster(tuple(range(1, s + 1))),) + tuple(range(s + 1, s + n + 1)))

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def signature(self):
        return tuple(len(e.labels) if isinstance(e, Cluster) else 1 for e in self.elements)


@dataclass(frozen=True)
class Partition:
    blocks: tuple

    def __len__(self):
        return len(self.blocks)


@dataclass(frozen=True)
class Dissection:
    blocks: tuple

    def __len__(self):
        return len(self.blocks)


@dataclass(frozen=True)
class Composition:
    parts: tuple

    def __len__(self):
        return len(self.parts)

    @property
    def total(self):
        return sum(self.parts)

    @property
    def sign(self):
        return -1 if len(self.parts) % 2 else 1


# ---------------------------------------------------------
# Set partitions
# ---------------------------------------------------------

@lru_cache(maxsize=None)
def _index_partitions(m):
    """Set partitions of range(m); blocks ordered by least element."""
    if m == 0:
        return ((),)
    result = []
    for smaller in _index_partitions(m - 1):
        for k in range(len(smaller)):
            result.append(smaller[:k] + (smaller[k] + (m - 1,),) + smaller[k + 1:])
        result.append(smaller + ((m - 1,),))
    return tuple(result)


def bell_number(m):
    return len(_index_partitions(m))


def partitions(s):
    elements = tuple(s.elements) if isinstance(s, ClusteredSet) else tuple(s)
    if not elements:
        raise ValueError("cannot partition an empty set")
    return [
        Partition(tuple(tuple(elements[i] for i in block) for block in index_blocks))
        for index_blocks in _index_partitions(len(elements))
    ]


def mobius_coefficient(p):
    k = len(p)
    return (-1) ** (k - 1) * factorial(k - 1)


def declusterize(s):
    elements = s.elements if isinstance(s, ClusteredSet) else s
    if isinstance(elements, Cluster):
        return elements.labels
    if isinstance(elements, int):
        return (elements,)
    flat = []
    for e in elements:
        flat.extend(e.labels if isinstance(e, Cluster) else (int(e),))
    return tuple(flat)


def dissections(z, max_blocks):
    z = tuple(z)
    if max_blocks < 1:
        raise ValueError("max_blocks must be at least 1")
    return [
        Dissection(tuple(tuple(z[i] for i in block) for block in index_blocks))
        for index_blocks in _index_partitions(len(z))
        if len(index_blocks) <= max_blocks
    ]


def compositions(n, k_max=None):
    if n < 0:
        raise ValueError("compositions need n >= 0")
    k_max = n if k_max is None else k_max
    found = [Composition(())]
    frontier = [()]
    for _ in range(k_max):
        frontier = [p + (part,) for p in frontier for part in range(1, n - sum(p) + 1)]
        found.extend(Composition(p) for p in frontier)
    return sorted(found, key=lambda c: (len(c), c.parts))


def mobius_orthogonality(m):
    """Σ_P (−1)^{|P|−1}(|P|−1)! over partitions of an m-element set."""
    return sum(mobius_coefficient(p) for p in _index_partitions(m))


# ---------------------------------------------------------
# Correlation families
# ---------------------------------------------------------

def _connected_on(connected, block, dim):
    block = tuple(sorted(block))
    if len(block) == 1:
        return LabeledOperator(block, np.eye(dim, dtype=complex), dim)
    op = connected.get(len(block))
    if op is None:
        return None
    return op.relabel(dict(zip(range(1, len(block) + 1), block)))


def partition_product(connected, labels, dim):
    """Σ over partitions of ``labels`` of ∏ ĝ(block); missing orders count as zero."""
    labels = tuple(sorted(labels))
    total = np.zeros((dim ** len(labels),) * 2, dtype=complex)
    for p in partitions(labels):
        factors = [_connected_on(connected, block, dim) for block in p.blocks]
        if any(f is None for f in factors):
            continue
        total += tensor_all(factors).matrix
    return LabeledOperator(labels, total, dim)


def mobius_invert(g, dim):
    """
    Connected operators ĝ_n with g_n = Σ_{P of (1..n)} ∏ ĝ_{|block|}(block).

    ``g`` maps n ≥ 2 to an operator on labels (1, ..., n); ĝ_1 is the identity.
    """
    connected = {1: LabeledOperator((1,), np.eye(dim, dtype=complex), dim)}
    for n in sorted(g):
        labels = tuple(range(1, n + 1))
        if g[n].labels != labels:
            raise ValueError(f"g_{n} must act on labels {labels}, got {g[n].labels}")
        # the one-block partition is ĝ_n itself; the rest only involve lower orders
        lower = partition_product({k: v for k, v in connected.items() if k < n}, labels, dim)
        connected[n] = g[n] - lower
        logger.debug("connected correlation of order %d computed", n)
    return connected
