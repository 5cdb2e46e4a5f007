"""
The generalized kinetic equation for F₁(t) and the marginal functionals of
the state.

    dF₁/dt = −N(1)F₁ + ε Tr₂(−N_int(1,2)) F₂(t | F₁(t))
    F_s(t | F₁) = Σ_n (1/n!) Tr_{s+1..s+n} 𝔊_{1+n}(t, {Y}, X∖Y) ∏ F₁(i)
"""

import logging
import math
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from django.conf import settings

from dynamics.cumulants import CumulantOrder
from dynamics.generated import CumulantBinding, generated_evolution
from dynamics.hamiltonian import generator_apply
from tensorcore.operators import commutator, partial_trace, product_state, trace_norm

from .correlations import check_radius
from .exceptions import IntegrationError
from .series import SeriesValue, bbgky_series, gke_series, sum_terms

logger = logging.getLogger(__name__)


def _functional_series(f1_t, propagators, t, s, correlations, trunc, method="recurrence"):
    binding = CumulantBinding(propagators, correlations, t)

    def term(n):
        order = CumulantOrder(s, n, t)
        evolution = generated_evolution(
            propagators, order, correlations, n_max=max(trunc.n_max, n), method=method, binding=binding
        )
        value = partial_trace(evolution(product_state(f1_t, order.labels)), order.anchor)
        return value / factorial(n)

    value, norms = sum_terms(term, trunc.n_max)
    logger.debug("functional s=%d t=%g term norms %s", s, t, ["%.3e" % a for a in norms])
    return SeriesValue(value, trunc.recorded(norms))


def marginal_functional(f1_t, propagators, t, s, correlations, trunc, method="recurrence", warn=True):
    if warn:
        check_radius("functional", trace_norm(f1_t), s=s, what="F1(t)")
    return _functional_series(f1_t, propagators, t, s, correlations, trunc, method)


def collision_integral(f1_t, propagators, t, correlations, trunc, warn=True):
    """ε Tr₂(−N_int(1,2)) F₂(t | F₁(t)), carrying the truncation record of the F₂ functional."""
    if warn:
        check_radius("collision", trace_norm(f1_t), what="F1(t)")
    spec = propagators.spec
    pair = _functional_series(f1_t, propagators, t, 2, correlations, trunc)
    value = partial_trace(commutator(spec.potential_on(1, 2), pair.value), (1,)) * spec.epsilon
    return SeriesValue(value, pair.truncation)


def kinetic_rhs(f1_t, propagators, t, correlations, trunc):
    free = generator_apply(propagators.spec, "free", f1_t, (1,))
    return free + collision_integral(f1_t, propagators, t, correlations, trunc, warn=False).value


# ---------------------------------------------------------
# Time integration
# ---------------------------------------------------------

@dataclass
class Trajectory:
    times: list
    states: list
    substeps: int
    defects: list = field(default_factory=list)
    tails: list = field(default_factory=list)

    def rows(self):
        """(t, trace, trace_norm, min_eig) per grid point."""
        return [
            (float(t), float(f.trace().real), trace_norm(f), float(f.eigenvalues()[0]))
            for t, f in zip(self.times, self.states)
        ]

    @property
    def trace_drift(self):
        traces = [f.trace() for f in self.states]
        return float(max(abs(tr - traces[0]) for tr in traces))

    @property
    def hermiticity_defect(self):
        return max(f.hermiticity_defect() for f in self.states)


def uniform_step(t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2:
        raise ValueError("the time grid needs at least two points")
    steps = np.diff(t_grid)
    h = float(steps[0])
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ValueError("the time grid must be uniform and increasing")
    return t_grid, h


def substeps_for(h, rhs_norm):
    """Smallest m with (h/m)⁴ ‖RHS‖ below the configured budget."""
    budget = settings.WORKBENCH["RK_STEP_BUDGET"]
    if rhs_norm == 0.0:
        return 1
    return max(1, math.ceil(h * (rhs_norm / budget) ** 0.25))


def rk4(rhs, t_grid, y0):
    """
    Classical four-stage one-step integration along a uniform grid.

    ``rhs(t, y)`` is evaluated at the stage times; each grid step is split into
    as many substeps as the step budget needs for the initial right-hand side.
    Returns the states at the grid points and the substep count.
    """
    t_grid, h = uniform_step(t_grid)
    m = substeps_for(h, trace_norm(rhs(t_grid[0], y0)))
    dt = h / m
    states = [y0]
    y = y0
    for t0 in t_grid[:-1]:
        for k in range(m):
            t = t0 + k * dt
            k1 = rhs(t, y)
            k2 = rhs(t + dt / 2, y + k1 * (dt / 2))
            k3 = rhs(t + dt / 2, y + k2 * (dt / 2))
            k4 = rhs(t + dt, y + k3 * dt)
            y = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6)
        states.append(y)
    return states, m


def gke_integrate(datum, propagators, t_grid, trunc, check=True):
    """
    Integrate the kinetic equation from F₁⁰ and compare each grid point with
    the one-particle solution series.
    """
    correlations = datum.correlations
    check_radius("collision", datum.norm, what="F1(0)")

    def rhs(t, f):
        return kinetic_rhs(f, propagators, t, correlations, trunc)

    states, m = rk4(rhs, t_grid, datum.f1_0)
    trajectory = Trajectory([float(t) for t in t_grid], states, m)
    tolerance = settings.WORKBENCH["DEFECT_TOLERANCE"]
    for t, state in zip(trajectory.times, states):
        series = gke_series(datum, propagators, t, trunc)
        defect = trace_norm(state - series.value)
        trajectory.defects.append(defect)
        trajectory.tails.append(series.tail)
        if check and defect > series.tail + tolerance:
            diagnostics = {"t": t, "defect": defect, "tail": series.tail, "substeps": m, "n_max": trunc.n_max}
            logger.error("kinetic integration defect %.3e exceeds %.3e at t=%g", defect, series.tail + tolerance, t)
            raise IntegrationError(f"integration defect {defect:.3e} exceeds the budget at t = {t:g}", diagnostics)
    logger.info("kinetic equation integrated over %d steps (%d substeps each)", len(states) - 1, m)
    return trajectory


# ---------------------------------------------------------
# Equivalence of the two descriptions
# ---------------------------------------------------------

@dataclass(frozen=True)
class EquivalenceResidual:
    residual: float
    bound: float
    scale: float = 0.0

    @property
    def tolerance(self):
        # rounding floor relative to ‖F_s(t)‖ under a vanishing tail
        return self.bound + settings.WORKBENCH["ROUNDOFF_FLOOR"] * self.scale

    @property
    def passed(self):
        return self.residual <= self.tolerance

    def __float__(self):
        return self.residual


def equivalence_residual(datum, propagators, t, s, trunc):
    """
    ‖F_s(t) − F_s(t | F₁(t))‖ with both sides truncated at the same order.

    The bound adds the tails of both series and the one-particle tail carried
    through the functional.
    """
    if s < 2:
        raise ValueError("equivalence is checked for s >= 2")
    direct = bbgky_series(datum, propagators, t, s, trunc)
    f1 = gke_series(datum, propagators, t, trunc)
    functional = marginal_functional(f1.value, propagators, t, s, datum.correlations, trunc)
    residual = trace_norm(direct.value - functional.value)
    g_norm = datum.correlations.operator_norm(s)
    carried = s * trace_norm(f1.value) ** (s - 1) * g_norm * f1.tail
    bound = direct.tail + functional.tail + carried
    logger.debug("equivalence s=%d t=%g: %.3e vs bound %.3e", s, t, residual, bound)
    return EquivalenceResidual(residual, bound, trace_norm(direct.value))
