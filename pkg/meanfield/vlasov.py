"""
The modified quantum Vlasov equation

    df₁/dt = −N(1)f₁ + Tr₂(−N_int(1,2)) [G₁(−t)⊗G₁(−t)] g₂ [G₁(t)⊗G₁(t)] f₁⊗f₁

and its iteration series, valid below the horizon t₀ = (2‖Φ‖‖f₁⁰‖)⁻¹.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from numpy.polynomial.legendre import leggauss

from dynamics.hamiltonian import generator_apply
from hierarchy.exceptions import IntegrationError
from hierarchy.kinetic import Trajectory, rk4
from hierarchy.series import SeriesTruncation, SeriesValue
from tensorcore.operators import (
    LabeledOperator,
    commutator,
    local_product,
    partial_trace,
    product_state,
    right_multiply,
    trace_norm,
)

from .exceptions import HorizonError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VlasovState:
    f1: LabeledOperator
    t: float = 0.0


@dataclass(frozen=True)
class HorizonT0:
    t0: float

    def contains(self, t):
        return abs(t) < self.t0


def horizon(spec, f1_0):
    scale = 2.0 * spec.potential_norm * trace_norm(f1_0)
    return HorizonT0(math.inf if scale == 0.0 else 1.0 / scale)


def pair_coefficient(propagators, correlations, t):
    """The initial pair correlation carried along the free two-particle motion."""
    return propagators.free(correlations.order(2), t)


def vlasov_rhs(state, propagators, correlations):
    spec = propagators.spec
    f = state.f1
    pair = local_product(pair_coefficient(propagators, correlations, state.t), product_state(f, (1, 2)))
    interaction = partial_trace(commutator(spec.potential_on(1, 2), pair), (1,))
    return generator_apply(spec, "free", f, (1,)) + interaction


def mean_field_hamiltonian(spec, f):
    """K + Tr₂ Φ(1,2)(I ⊗ f(2))."""
    dressed = right_multiply(spec.potential_on(1, 2), f.matrix, (2,))
    return spec.kinetic_on(1) + partial_trace(dressed, (1,))


def hartree_rhs(f, spec):
    """−i[K + Tr₂ Φ(I⊗f), f], the uncorrelated Vlasov right-hand side."""
    return commutator(mean_field_hamiltonian(spec, f), f)


def _checked(trajectory, what):
    finite = all(np.all(np.isfinite(f.matrix)) for f in trajectory.states)
    drift = trajectory.trace_drift if finite else math.inf
    if drift > settings.WORKBENCH["DEFECT_TOLERANCE"]:
        diagnostics = {"trace_drift": drift, "substeps": trajectory.substeps}
        raise IntegrationError(f"{what} lost its trace (drift {drift:.3e})", diagnostics)
    return trajectory


def vlasov_integrate(f1_0, propagators, t_grid, correlations, check=True):
    def rhs(t, f):
        return vlasov_rhs(VlasovState(f, t), propagators, correlations)

    states, m = rk4(rhs, t_grid, f1_0)
    trajectory = Trajectory([float(t) for t in t_grid], states, m)
    logger.debug("vlasov trajectory: %d steps, %d substeps, trace drift %.3e", len(states) - 1, m, trajectory.trace_drift)
    return _checked(trajectory, "Vlasov integration") if check else trajectory


def hartree_integrate(f1_0, spec, t_grid):
    states, m = rk4(lambda t, f: hartree_rhs(f, spec), t_grid, f1_0)
    return _checked(Trajectory([float(t) for t in t_grid], states, m), "Hartree integration")


# ---------------------------------------------------------
# Iteration series
# ---------------------------------------------------------

def term_bound(f1_0, t, n, t0, correlations):
    """(t/t₀)ⁿ ‖f₁⁰‖ max(1, ‖g_{1+n}‖)."""
    g_norm = correlations.operator_norm(n + 1) if n else 1.0
    return (abs(t) / t0) ** n * trace_norm(f1_0) * max(1.0, g_norm)


def _iterated_term(f1_0, propagators, t, n, correlations, nodes):
    spec = propagators.spec
    x, w = leggauss(nodes)
    labels = tuple(range(1, n + 2))
    start = local_product(correlations.order(n + 1), product_state(f1_0, labels))

    def level(k, upper):
        # level k integrates over t_k ∈ [0, upper] on particles 1..k
        if k == n + 1:
            return propagators.free(start, upper)
        total = None
        for xi, wi in zip(x, w):
            tk = 0.5 * upper * (xi + 1.0)
            inner = level(k + 1, tk)
            hit = None
            for i in range(1, k + 1):
                c = commutator(spec.potential_on(i, k + 1), inner)
                hit = c if hit is None else hit + c
            value = propagators.free(partial_trace(hit, range(1, k + 1)), upper - tk) * (0.5 * upper * wi)
            total = value if total is None else total + value
        return total

    if n == 0:
        return propagators.free(f1_0, t)
    return level(1, t)


def vlasov_series(f1_0, propagators, t, n_max, correlations, nodes=None):
    """Truncated iteration series for f₁(t); nested Gauss–Legendre rules over the time simplex."""
    t0 = horizon(propagators.spec, f1_0)
    if not t0.contains(t):
        raise HorizonError(f"t = {t:g} is outside convergence horizon t0 = {t0.t0:.4g}")
    nodes = nodes or settings.WORKBENCH["QUADRATURE_NODES"]
    terms = [_iterated_term(f1_0, propagators, t, n, correlations, nodes) for n in range(n_max + 1)]
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    norms = [trace_norm(term) for term in terms]
    logger.debug("vlasov series t=%g term norms %s", t, ["%.3e" % a for a in norms])
    return SeriesValue(total, SeriesTruncation(n_max).recorded(norms))


def quadrature_gap(f1_0, propagators, t, n_max, correlations, nodes=None):
    """Trace-norm change of the series when the quadrature nodes are doubled."""
    nodes = nodes or settings.WORKBENCH["QUADRATURE_NODES"]
    coarse = vlasov_series(f1_0, propagators, t, n_max, correlations, nodes)
    fine = vlasov_series(f1_0, propagators, t, n_max, correlations, 2 * nodes)
    return trace_norm(coarse.value - fine.value)


def series_ode_gap(f1_0, propagators, t, n_max, correlations, steps=20):
    """
    Distance between the iteration series and the integrated equation at t.

    Returns (gap, allowance). The allowance adds the series tail, the
    quadrature self-check and a rounding floor relative to ‖f₁⁰‖ per RK step.
    The series carries g_{1+n} at order n while the equation only sees g₂, so
    the two agree within the allowance only for uncorrelated data; otherwise
    the gap measures the closure mismatch and does not shrink with n_max.
    """
    series = vlasov_series(f1_0, propagators, t, n_max, correlations)
    trajectory = vlasov_integrate(f1_0, propagators, np.linspace(0.0, t, steps + 1), correlations)
    gap = trace_norm(series.value - trajectory.states[-1])
    rounding = settings.WORKBENCH["ROUNDOFF_FLOOR"] * trace_norm(f1_0) * steps * trajectory.substeps
    allowance = series.tail + quadrature_gap(f1_0, propagators, t, n_max, correlations) + rounding
    return gap, allowance

