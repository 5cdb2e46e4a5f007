"""
Cumulants of evolution groups and scattering cumulants.

𝔄_{1+n}(−t, {Y}, X∖Y) is the Möbius-weighted sum over partitions of the
clustered set ({Y}, s+1, ..., s+n) of blockwise group conjugations, each block
evolving under the Hamiltonian of its own declusterized labels.
"""

import logging
from dataclasses import dataclass

import numpy as np

from clusters.combinatorics import (
    Cluster,
    ClusteredSet,
    declusterize,
    mobius_coefficient,
    partitions,
)
from tensorcore.operators import (
    LabeledOperator,
    local_product,
    product_state,
    random_density,
    random_hermitian,
    tensor,
    trace_norm,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CumulantOrder:
    s: int
    n: int
    t: float = 0.0

    def __post_init__(self):
        if self.s < 1 or self.n < 0:
            raise ValueError(f"cumulant order needs s >= 1 and n >= 0, got s={self.s}, n={self.n}")

    @property
    def anchor(self):
        return tuple(range(1, self.s + 1))

    @property
    def extras(self):
        return tuple(range(self.s + 1, self.s + self.n + 1))

    @property
    def labels(self):
        return self.anchor + self.extras


def _clustered(anchor, extras):
    return ClusteredSet((Cluster(tuple(anchor)),) + tuple(extras))


def blockwise_evolution(propagators, f, t, blocks):
    """∏ G_{|θ(X)|}(−t, θ(X)) over disjoint blocks."""
    for block in blocks:
        f = propagators.evolve(f, t, declusterize(block))
    return f


def cumulant_apply(propagators, order, f, anchor=None, extras=None):
    """
    𝔄_{1+n}(−t, anchor, extras) f. The anchor is the cluster {Y} by default;
    a single label gives the cumulants 𝔄(−t, i, X) of the expansions.
    """
    anchor = order.anchor if anchor is None else tuple(anchor)
    extras = order.extras if extras is None else tuple(extras)
    t = order.t
    total = None
    for p in partitions(_clustered(anchor, extras)):
        term = blockwise_evolution(propagators, f, t, p.blocks) * mobius_coefficient(p)
        total = term if total is None else total + term
    return total


@dataclass(frozen=True, eq=False)
class ScatteringCumulant:
    """
    Ă_{1+n}(t, anchor, extras) f = 𝔄_{1+n}(−t) g_{1+n} ∏ G₁(t, i) f,
    with ``g`` the cluster correlation on the declusterized labels.
    """

    propagators: object
    t: float
    anchor: tuple
    extras: tuple
    g: LabeledOperator

    @property
    def labels(self):
        return tuple(sorted(self.anchor + self.extras))

    def __call__(self, f):
        back = self.propagators.free(f, -self.t, self.labels)
        correlated = local_product(self.g, back)
        order = CumulantOrder(len(self.anchor), len(self.extras), self.t)
        return cumulant_apply(self.propagators, order, correlated, self.anchor, self.extras)


def scattering_cumulant(propagators, order, g_cluster, anchor=None, extras=None):
    anchor = order.anchor if anchor is None else tuple(anchor)
    extras = order.extras if extras is None else tuple(extras)
    return ScatteringCumulant(propagators, order.t, anchor, extras, g_cluster)


# ---------------------------------------------------------
# Probes
# ---------------------------------------------------------

def probe_basis(dim, labels, rng, count):
    """Random Hermitian probes, plus every matrix unit when the space is small."""
    labels = tuple(sorted(labels))
    probes = [random_hermitian(rng, labels, dim) for _ in range(count)]
    side = dim ** len(labels)
    if dim == 2 and len(labels) <= 3:
        for i in range(side):
            for j in range(side):
                unit = np.zeros((side, side), dtype=complex)
                unit[i, j] = 1.0
                probes.append(LabeledOperator(labels, unit, dim))
    return probes


def product_probes(dim, s, n, rng, count):
    """ρ_Y ⊗ φ^{⊗n} with random densities ρ on 1..s and φ on one slot."""
    probes = []
    for _ in range(count):
        rho = random_density(rng, range(1, s + 1), dim)
        phi = random_density(rng, (s + 1,), dim)
        extras = product_state(phi, range(s + 1, s + n + 1))
        probes.append(rho if n == 0 else tensor(rho, extras))
    return probes


# ---------------------------------------------------------
# Identity checks
# ---------------------------------------------------------

def cumulant_origin_residual(propagators, s, n, probes):
    """max ‖𝔄_{1+n}(0) f − δ_{n,0} f‖ over probes."""
    order = CumulantOrder(s, n, 0.0)
    worst = 0.0
    for f in probes:
        value = cumulant_apply(propagators, order, f)
        if n == 0:
            value = value - f
        worst = max(worst, trace_norm(value))
    return worst


def inverse_cluster_residual(propagators, s, n, t, probes):
    """max ‖Σ_P ∏ 𝔄_{|X|}(−t, X) f − G_{s+n}(−t) f‖ over probes."""
    order = CumulantOrder(s, n, t)
    elements = _clustered(order.anchor, order.extras)
    worst = 0.0
    for f in probes:
        total = None
        for p in partitions(elements):
            value = f
            for block in p.blocks:
                if isinstance(block[0], Cluster):
                    anchor, extras = block[0].labels, block[1:]
                else:
                    anchor, extras = (block[0],), block[1:]
                value = cumulant_apply(propagators, CumulantOrder(len(anchor), len(extras), t), value, anchor, extras)
            total = value if total is None else total + value
        full = propagators.evolve(f, t, order.labels)
        worst = max(worst, trace_norm(total - full))
    return worst


def first_order_strength(propagators, t, probes):
    """max ‖𝔄₂(−t, 1, 2) f‖ over probes; vanishes with ε."""
    order = CumulantOrder(1, 1, t)
    return max(trace_norm(cumulant_apply(propagators, order, f)) for f in probes)
