"""
Generated evolution operators 𝔊_{1+n}(t, {Y}, s+1, ..., s+n).

The symbolic expansions of ``clusters.expansions`` are evaluated with each
symbol bound to a scattering cumulant built from the correlation family.
"""

import logging
from math import factorial

from django.conf import settings

from clusters.expansions import (
    Expansion,
    OrderNotSupported,
    closed_form_expansion,
    dissection_sum,
    printed_expansion,
    recurrence_expansion,
)
from tensorcore.operators import partial_trace, trace_norm

from .cumulants import ScatteringCumulant

logger = logging.getLogger(__name__)

EXPANSIONS = {
    "recurrence": recurrence_expansion,
    "closed": closed_form_expansion,
    "printed": printed_expansion,
}


class CumulantBinding:
    """Binds expansion symbols to scattering cumulants at one time t."""

    def __init__(self, propagators, correlations, t):
        self.propagators = propagators
        self.correlations = correlations
        self.t = t
        self._cumulants = {}

    def cumulant(self, factor):
        cumulant = self._cumulants.get(factor)
        if cumulant is None:
            labels = tuple(sorted(factor.anchor + factor.extras))
            cumulant = ScatteringCumulant(
                self.propagators, self.t, factor.anchor, factor.extras, self.correlations.cluster(labels)
            )
            self._cumulants[factor] = cumulant
        return cumulant

    def __call__(self, factor, operand):
        return self.cumulant(factor)(operand)


class GeneratedEvolution:

    def __init__(self, propagators, order, correlations, method="recurrence", binding=None):
        if method not in EXPANSIONS:
            raise ValueError(f"unknown expansion method {method!r}")
        self.order = order
        self.method = method
        self.expansion = EXPANSIONS[method](order.s, order.n)
        self.binding = binding or CumulantBinding(propagators, correlations, order.t)

    @property
    def labels(self):
        return self.order.labels

    def __call__(self, f):
        return self.expansion.apply(self.binding, f)


def _check_supported(n, n_max):
    n_max = settings.WORKBENCH["DEFAULT_N_MAX"] if n_max is None else n_max
    if n_max > settings.WORKBENCH["MAX_N_MAX"] or n > n_max:
        raise OrderNotSupported(f"order not supported: n = {n} with n_max = {n_max}")


def generated_evolution(propagators, order, correlations, n_max=None, method="recurrence", binding=None):
    _check_supported(order.n, n_max)
    return GeneratedEvolution(propagators, order, correlations, method, binding)


def kce_residual(propagators, order, correlations, probes, n_max=None, method=None):
    """
    Both sides of the kinetic cluster expansion of Ă_{1+n} applied to probes;
    the maximum trace-norm gap.

    By default the right-hand side uses the closed form of 𝔊 up to second
    order, which only agrees after the trace over s+1..s+n of product probes.
    With ``method="recurrence"`` the expansion holds as an operator identity
    and the full, untraced gap is measured, so any probe basis will do.
    """
    _check_supported(order.n, n_max)
    s, n = order.s, order.n
    binding = CumulantBinding(propagators, correlations, order.t)
    lhs = ScatteringCumulant(
        propagators, order.t, order.anchor, order.extras, correlations.cluster(order.labels)
    )
    method = method or ("closed" if n <= 2 else "recurrence")
    if method not in EXPANSIONS:
        raise ValueError(f"unknown expansion method {method!r}")
    exact = method == "recurrence"
    parts = []
    for n1 in range(0, n + 1):
        available = s + n - n1
        z = tuple(range(available + 1, s + n + 1))
        inner = dissection_sum(z, available, ordered=True) if n1 else Expansion({(): 1})
        outer = EXPANSIONS[method](s, n - n1)
        parts.append((factorial(n) // factorial(n - n1), inner, outer))
    worst = 0.0
    for f in probes:
        total = None
        for weight, inner, outer in parts:
            value = outer.apply(binding, inner.apply(binding, f)) * weight
            total = value if total is None else total + value
        gap = lhs(f) - total
        worst = max(worst, trace_norm(gap if exact else partial_trace(gap, order.anchor)))
    logger.debug("kce residual s=%d n=%d t=%g (%s): %.3e", s, n, order.t, method, worst)
    return worst



def closed_form_residual(propagators, order, correlations, probes):
    """max ‖Tr_{X∖Y} (𝔊_recurrence − 𝔊_closed) f‖ over product probes."""
    binding = CumulantBinding(propagators, correlations, order.t)
    recurrence = GeneratedEvolution(propagators, order, correlations, "recurrence", binding)
    closed = GeneratedEvolution(propagators, order, correlations, "closed", binding)
    return max(
        trace_norm(partial_trace(recurrence(f) - closed(f), order.anchor)) for f in probes
    )


def printed_example_residual(propagators, order, correlations, probes):
    """max ‖(𝔊_recurrence − 𝔊_printed) f‖ over probes, without any trace."""
    binding = CumulantBinding(propagators, correlations, order.t)
    recurrence = GeneratedEvolution(propagators, order, correlations, "recurrence", binding)
    printed = GeneratedEvolution(propagators, order, correlations, "printed", binding)
    return max(trace_norm(recurrence(f) - printed(f)) for f in probes)
