"""
Convergence studies over a ladder of interaction strengths ε, with initial
data scaled as F₁⁰(ε) = f₁⁰/ε.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from dynamics.cumulants import CumulantOrder
from dynamics.generated import CumulantBinding, GeneratedEvolution
from dynamics.hamiltonian import Propagators
from hierarchy.correlations import InitialDatum
from hierarchy.kinetic import Trajectory, marginal_functional
from hierarchy.series import gke_series
from tensorcore.operators import local_product, product_state, trace_norm

from .vlasov import vlasov_integrate

logger = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = ("epsilon", "t", "distance", "tail_estimate", "runtime_ms")


@dataclass(frozen=True, eq=False)
class ScaledFamily:
    eps_ladder: tuple
    f1_limit: object

    def __post_init__(self):
        ladder = tuple(float(e) for e in self.eps_ladder)
        if any(e <= 0 for e in ladder):
            raise ValueError("epsilon values must be positive")
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError("the epsilon ladder must be strictly decreasing")
        object.__setattr__(self, "eps_ladder", ladder)

    def datum(self, epsilon, correlations):
        return InitialDatum(self.f1_limit / epsilon, correlations)


@dataclass(frozen=True)
class ConvergenceRow:
    epsilon: float
    t: float
    distance: float
    tail_estimate: float
    runtime_ms: float

    def as_tuple(self):
        return (self.epsilon, self.t, self.distance, self.tail_estimate, self.runtime_ms)


def strictly_decreasing(values):
    values = list(values)
    return all(b < a for a, b in zip(values, values[1:]))


def over_ladder(run, ladder):
    """``run(ε)`` for every rung; rungs are independent, results keep ladder order."""
    threads = settings.WORKBENCH["THREADS"]
    if threads > 1 and len(ladder) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, ladder))
    return [run(epsilon) for epsilon in ladder]


def limit_trajectory(family, spec, correlations, t, steps):
    if t == 0:
        return Trajectory([0.0], [family.f1_limit], 1)
    grid = np.linspace(0.0, t, steps + 1)
    return vlasov_integrate(family.f1_limit, Propagators(spec), grid, correlations)


def meanfield_convergence_study(family, t, spec, correlations, trunc, steps=10):
    """Rows of ‖εF₁(t) − f₁(t)‖ down the ladder."""
    f1_t = limit_trajectory(family, spec, correlations, t, steps).states[-1]

    def run(epsilon):
        started = time.perf_counter()
        propagators = Propagators(spec.with_epsilon(epsilon))
        series = gke_series(family.datum(epsilon, correlations), propagators, t, trunc)
        distance = trace_norm(series.value * epsilon - f1_t)
        runtime = (time.perf_counter() - started) * 1000.0
        logger.info("mean-field rung eps=%g: distance %.3e", epsilon, distance)
        return ConvergenceRow(epsilon, float(t), distance, epsilon * series.tail, runtime)

    return over_ladder(run, family.eps_ladder)


def propagated_correlation(propagators, correlations, f1_t, t, s):
    """[∏G₁(−t)] g_s [∏G₁(t)] ∏ f₁(t, j)."""
    labels = tuple(range(1, s + 1))
    carried = propagators.free(correlations.order(s), t)
    return local_product(carried, product_state(f1_t, labels))


def correlation_propagation_residual(family, t, s, spec, correlations, trunc, steps=10):
    """Rows of ‖εˢ F_s(t | F₁(t)) − [∏G₁(−t)] g_s [∏G₁(t)] ∏ f₁(t)‖ down the ladder."""
    if s < 2:
        raise ValueError("correlation propagation is studied for s >= 2")
    f1_t = limit_trajectory(family, spec, correlations, t, steps).states[-1]
    limit = propagated_correlation(Propagators(spec), correlations, f1_t, t, s)

    def run(epsilon):
        started = time.perf_counter()
        propagators = Propagators(spec.with_epsilon(epsilon))
        datum = family.datum(epsilon, correlations)
        f1 = gke_series(datum, propagators, t, trunc)
        functional = marginal_functional(f1.value, propagators, t, s, correlations, trunc)
        residual = trace_norm(functional.value * epsilon ** s - limit)
        runtime = (time.perf_counter() - started) * 1000.0
        return ConvergenceRow(epsilon, float(t), residual, epsilon ** s * functional.tail, runtime)

    return over_ladder(run, family.eps_ladder)


def first_generator_limit_study(eps_ladder, t, s, spec, correlations, probes):
    """max over probes of ‖(𝔊₁(t,{Y}) − [∏G₁(−t)] g_s [∏G₁(t)]) f‖ per ε."""
    order = CumulantOrder(s, 0, t)
    results = []
    for epsilon in eps_ladder:
        propagators = Propagators(spec.with_epsilon(epsilon))
        first = GeneratedEvolution(propagators, order, correlations)
        g = correlations.order(s)
        worst = 0.0
        for f in probes:
            limit = propagators.free(local_product(g, propagators.free(f, -t)), t)
            worst = max(worst, trace_norm(first(f) - limit))
        results.append((float(epsilon), worst))
    return results


def higher_order_vanishing_study(eps_ladder, t, s, n_max, spec, correlations, probes_by_order):
    """(ε, n, max ‖𝔊_{1+n} f‖) for n = 1..n_max; ``probes_by_order[n]`` act on s+n labels."""
    rows = []
    for epsilon in eps_ladder:
        propagators = Propagators(spec.with_epsilon(epsilon))
        binding = CumulantBinding(propagators, correlations, t)
        for n in range(1, n_max + 1):
            evolution = GeneratedEvolution(propagators, CumulantOrder(s, n, t), correlations, binding=binding)
            norm = max(trace_norm(evolution(f)) for f in probes_by_order[n])
            rows.append((float(epsilon), n, norm))
    return rows
