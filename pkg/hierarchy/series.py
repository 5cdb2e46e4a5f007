"""
Truncated solution series of the BBGKY hierarchy for correlated initial data.

    F_s(t) = Σ_n (1/n!) Tr_{s+1..s+n} 𝔄_{1+n}(−t, {Y}, X∖Y) g_{1+n} ∏ F₁⁰(i)

Every series value carries the trace norms of its terms and a geometric
estimate of the dropped tail.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import factorial

from django.conf import settings

from dynamics.cumulants import CumulantOrder, cumulant_apply
from dynamics.hamiltonian import generator_apply
from tensorcore.exceptions import LabelError
from tensorcore.operators import (
    commutator,
    local_product,
    partial_trace,
    product_state,
    symmetry_report,
    trace_norm,
)

from .correlations import check_radius

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeriesTruncation:
    n_max: int
    term_norms: tuple = ()

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")

    def recorded(self, term_norms):
        return replace(self, term_norms=tuple(float(a) for a in term_norms))

    def lowered(self):
        return SeriesTruncation(max(self.n_max - 1, 0))

    @property
    def ratio(self):
        norms = self.term_norms
        if len(norms) < 2 or norms[-2] == 0.0:
            return 0.0
        clamp = settings.WORKBENCH["TAIL_RATIO_CLAMP"]
        return min(max(norms[-1] / norms[-2], 0.0), clamp)

    @property
    def tail_estimate(self):
        """a_N r / (1 − r) with r the clamped ratio of the last two term norms."""
        if not self.term_norms:
            return 0.0
        r = self.ratio
        return self.term_norms[-1] * r / (1.0 - r)


@dataclass(frozen=True, eq=False)
class SeriesValue:
    value: object
    truncation: SeriesTruncation

    @property
    def tail(self):
        return self.truncation.tail_estimate

    @property
    def term_norms(self):
        return self.truncation.term_norms


@dataclass
class MarginalSequence:
    s_max: int
    t: float
    ops: dict = field(default_factory=dict)
    truncations: dict = field(default_factory=dict)

    def __getitem__(self, s):
        return self.ops[s]

    def tail(self, s):
        truncation = self.truncations.get(s)
        return truncation.tail_estimate if truncation else 0.0

    def symmetry_deviation(self):
        return max(symmetry_report(op).max_deviation for op in self.ops.values())


def sum_terms(compute, n_max):
    """
    Evaluate ``compute(n)`` for n = 0..n_max and add them in ascending order.

    Terms are independent; with more than one configured thread they are
    evaluated concurrently, the reduction order stays fixed.
    """
    orders = range(n_max + 1)
    threads = settings.WORKBENCH["THREADS"]
    if threads > 1 and n_max > 0:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            terms = list(pool.map(compute, orders))
    else:
        terms = [compute(n) for n in orders]
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return total, [trace_norm(term) for term in terms]


def initial_marginals(datum, s_max):
    """F_s(0) = g_s ∏_{i≤s} F₁⁰(i) for s = 1..s_max."""
    if s_max < 1:
        raise ValueError("s_max must be at least 1")
    if datum.correlations.dim != datum.dim:
        raise LabelError("correlations and the one-particle marginal live on different spaces")
    sequence = MarginalSequence(s_max, 0.0)
    for s in range(1, s_max + 1):
        labels = tuple(range(1, s + 1))
        sequence.ops[s] = local_product(datum.correlations.order(s), product_state(datum.f1_0, labels))
    return sequence


def _solution_series(datum, propagators, t, s, trunc):
    if s < 1:
        raise ValueError("s must be at least 1")
    correlations = datum.correlations

    def term(n):
        order = CumulantOrder(s, n, t)
        state = product_state(datum.f1_0, order.labels)
        correlated = local_product(correlations.cluster(order.labels), state)
        value = partial_trace(cumulant_apply(propagators, order, correlated), order.anchor)
        return value / factorial(n)

    value, norms = sum_terms(term, trunc.n_max)
    logger.debug("solution series s=%d t=%g term norms %s", s, t, ["%.3e" % a for a in norms])
    return SeriesValue(value, trunc.recorded(norms))


def bbgky_series(datum, propagators, t, s, trunc):
    check_radius("bbgky", datum.norm, what="F1(0)")
    return _solution_series(datum, propagators, t, s, trunc)


def gke_series(datum, propagators, t, trunc):
    """The one-particle solution series, the global solution of the kinetic equation."""
    check_radius("kinetic", datum.norm, what="F1(0)")
    return _solution_series(datum, propagators, t, 1, trunc)


def bbgky_marginals(datum, propagators, t, s_max, trunc):
    check_radius("bbgky", datum.norm, what="F1(0)")
    sequence = MarginalSequence(s_max, t)
    for s in range(1, s_max + 1):
        result = _solution_series(datum, propagators, t, s, trunc)
        sequence.ops[s] = result.value
        sequence.truncations[s] = result.truncation
    return sequence


def hierarchy_rhs(datum, propagators, t, trunc):
    """−N(1)F₁(t) + ε Tr₂(−N_int(1,2))F₂(t), with F₂ one order lower."""
    spec = propagators.spec
    f1 = _solution_series(datum, propagators, t, 1, trunc)
    f2 = _solution_series(datum, propagators, t, 2, trunc.lowered())
    free = generator_apply(spec, "free", f1.value, (1,))
    interaction = partial_trace(commutator(spec.potential_on(1, 2), f2.value), (1,))
    return free + interaction * spec.epsilon, f1.tail + f2.tail


def hierarchy_residual(datum, propagators, t, trunc, h=1e-3):
    """
    Centered difference of the s = 1 series against the first hierarchy
    equation. Returns (residual, tail) where tail bounds the truncation share.
    """
    plus = _solution_series(datum, propagators, t + h, 1, trunc).value
    minus = _solution_series(datum, propagators, t - h, 1, trunc).value
    rate = (plus - minus) / (2 * h)
    rhs, tail = hierarchy_rhs(datum, propagators, t, trunc)
    residual = trace_norm(rate - rhs)
    logger.debug("hierarchy residual t=%g h=%g: %.3e (tail %.3e)", t, h, residual, tail)
    return residual, tail


def generator_rate_residual(propagators, f, h=1e-3):
    """
    Richardson-extrapolated difference quotient of G_n(−h) against −N_n f.

    The plain quotient is first order in h; the extrapolation is second order.
    """
    spec = propagators.spec
    rate = generator_apply(spec, "full", f)

    def quotient(step):
        return (propagators.evolve(f, step) - f) / step

    extrapolated = quotient(h / 2) * 2.0 - quotient(h)
    return trace_norm(extrapolated - rate)
