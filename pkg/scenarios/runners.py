"""
Experiment runners. ``run_scenario`` dispatches on the scenario's experiment
and returns a ``Report``; nothing is written here.
"""

import logging
import time
import warnings
from functools import partial

import numpy as np
from django.conf import settings

from clusters.combinatorics import bell_number, mobius_orthogonality
from clusters.expansions import printed_expansion, recurrence_expansion
from continuum.checks import dirac_halving_ratio, plane_wave_phase_error, time_grid
from continuum.grid import Grid1D, gaussian_packet
from continuum.kernels import default_pair_operator
from continuum.output import write_snapshots, write_trajectory_csv
from continuum.solvers import TRAJECTORY_COLUMNS, gp_solve, nls_solve
from dynamics.cumulants import (
    CumulantOrder,
    cumulant_origin_residual,
    inverse_cluster_residual,
    probe_basis,
    product_probes,
)
from dynamics.generated import closed_form_residual, kce_residual, printed_example_residual
from dynamics.hamiltonian import Propagators
from hierarchy.correlations import CorrelationFamily
from hierarchy.kinetic import equivalence_residual, gke_integrate
from hierarchy.series import SeriesTruncation, bbgky_series, hierarchy_residual, initial_marginals
from meanfield.exceptions import HorizonError
from meanfield.studies import (
    CONVERGENCE_COLUMNS,
    ScaledFamily,
    correlation_propagation_residual,
    first_generator_limit_study,
    higher_order_vanishing_study,
    limit_trajectory,
    meanfield_convergence_study,
    propagated_correlation,
    strictly_decreasing,
)
from meanfield.vlasov import horizon, series_ode_gap
from tensorcore.exceptions import ConvergenceRadiusWarning
from tensorcore.operators import product_state, random_hermitian, trace_norm

from .reports import Report

logger = logging.getLogger(__name__)

OPERATOR_TRAJECTORY_COLUMNS = ("t", "trace", "trace_norm", "min_eig")
BELL_NUMBERS = {1: 1, 2: 2, 3: 5, 4: 15, 5: 52, 6: 203}


def _decrease_violations(values):
    values = list(values)
    return sum(1 for a, b in zip(values, values[1:]) if not b < a)


# ---------------------------------------------------------
# identities
# ---------------------------------------------------------

def run_identities(scenario, report):
    propagators = Propagators(scenario.spec)
    correlations = scenario.correlations
    rng = scenario.rng()
    dim = scenario.dim
    count = settings.WORKBENCH["PROBE_COUNT"]
    t = scenario.t_end

    for m, expected in BELL_NUMBERS.items():
        report.check(f"mobius orthogonality m={m}", abs(mobius_orthogonality(m) - (m == 1)), 0.0)
        report.check(f"bell number m={m}", abs(bell_number(m) - expected), 0.0)

    for s, n in ((1, 1), (1, 2), (1, 3), (2, 1), (2, 2)):
        probes = probe_basis(dim, range(1, s + n + 1), rng, count)
        residual = cumulant_origin_residual(propagators, s, n, probes)
        report.check(f"cumulant vanishes at t=0 s={s} n={n}", residual, scenario.tolerance("identity"))

    for s, n in ((1, 1), (1, 2), (2, 1), (1, 3), (2, 2), (3, 1)):
        probes = [random_hermitian(rng, range(1, s + n + 1), dim) for _ in range(4)]
        residual = inverse_cluster_residual(propagators, s, n, t, probes)
        report.check(f"inverse cluster expansion s={s} n={n}", residual, scenario.tolerance("inverse"))

    for tk in scenario.times or (t,):
        for s in (1, 2):
            for n in (1, 2):
                probes = product_probes(dim, s, n, rng, 4)
                residual = kce_residual(propagators, CumulantOrder(s, n, tk), correlations, probes)
                report.check(f"kinetic cluster expansion s={s} n={n} t={tk:g}", residual, scenario.tolerance("kce"))
    for s, n in ((1, 1), (1, 2), (2, 1), (2, 2)):
        order = CumulantOrder(s, n, t)
        probes = probe_basis(dim, order.labels, rng, 4)
        residual = kce_residual(propagators, order, correlations, probes, method="recurrence")
        report.check(f"kinetic cluster expansion operator identity s={s} n={n}", residual, scenario.tolerance("kce"))

    for s in (1, 2, 3):
        for n in (0, 1, 2):
            same = recurrence_expansion(s, n).dump() == printed_expansion(s, n).dump()
            report.check(f"printed expansion terms s={s} n={n}", 0.0 if same else 1.0, 0.0)
    for s, n in ((1, 1), (1, 2), (2, 1), (2, 2)):
        order = CumulantOrder(s, n, t)
        probes = probe_basis(dim, order.labels, rng, 4)
        residual = printed_example_residual(propagators, order, correlations, probes)
        report.check(f"printed expansion values s={s} n={n}", residual, scenario.tolerance("printed"))
    for s, n in ((1, 2), (2, 1), (2, 2)):
        order = CumulantOrder(s, n, t)
        probes = product_probes(dim, s, n, rng, 4)
        residual = closed_form_residual(propagators, order, correlations, probes)
        report.check(f"closed form after trace s={s} n={n}", residual, scenario.tolerance("closed"))

    trunc = SeriesTruncation(scenario.n_max)
    initial = initial_marginals(scenario.datum, scenario.s_max)
    for s in range(1, scenario.s_max + 1):
        value = bbgky_series(scenario.datum, propagators, 0.0, s, trunc).value
        report.check(f"initial marginal s={s}", trace_norm(value - initial[s]), scenario.tolerance("initial"))

    probe_time = scenario.times[0] if scenario.times else 0.5 * t
    residual, tail = hierarchy_residual(scenario.datum, propagators, probe_time, trunc)
    report.check(f"first hierarchy equation t={probe_time:g}", residual, tail + scenario.tolerance("hierarchy"))


# ---------------------------------------------------------
# hierarchy-equivalence
# ---------------------------------------------------------

def run_equivalence(scenario, report):
    propagators = Propagators(scenario.spec)
    trunc = SeriesTruncation(scenario.n_max)
    datum = scenario.datum
    defect_floor = scenario.tolerance("defect")

    for t in scenario.times or (scenario.t_end,):
        result = equivalence_residual(datum, propagators, t, 2, trunc)
        report.check(f"equivalence s=2 t={t:g}", result.residual, result.tolerance)

    trajectory = gke_integrate(datum, propagators, scenario.time_grid, trunc, check=False)
    excess = max(d - tail for d, tail in zip(trajectory.defects, trajectory.tails))
    report.check("kinetic integration defect over tail", excess, defect_floor)
    report.check("kinetic trace drift", trajectory.trace_drift, scenario.tolerance("trace"))
    report.diagnostics["substeps"] = trajectory.substeps
    report.diagnostics["hermiticity_defect"] = trajectory.hermiticity_defect
    report.table("trajectory", OPERATOR_TRAJECTORY_COLUMNS, trajectory.rows())


# ---------------------------------------------------------
# meanfield-ladder
# ---------------------------------------------------------

def _family(scenario):
    return ScaledFamily(scenario.eps_ladder, scenario.one_particle_operator)


def run_meanfield(scenario, report):
    spec = scenario.spec
    correlations = scenario.correlations
    family = _family(scenario)
    trunc = SeriesTruncation(scenario.n_max)
    t = scenario.t_end
    rng = scenario.rng()

    rows = meanfield_convergence_study(family, t, spec, correlations, trunc, scenario.steps)
    report.table("convergence", CONVERGENCE_COLUMNS, [row.as_tuple() for row in rows])
    report.check("mean-field distance decreases", _decrease_violations(row.distance for row in rows), 0)

    limit = limit_trajectory(family, spec, correlations, t, scenario.steps)
    report.table("trajectory", OPERATOR_TRAJECTORY_COLUMNS, limit.rows())
    report.check("Vlasov trace drift", limit.trace_drift, scenario.tolerance("trace"))

    t0 = horizon(spec, family.f1_limit)
    report.diagnostics["horizon_t0"] = t0.t0
    propagators = Propagators(spec)
    chaos = CorrelationFamily.chaos(scenario.dim)
    try:
        gap, allowance = series_ode_gap(family.f1_limit, propagators, t, scenario.n_max, chaos)
        report.check("iteration series against integration (uncorrelated)", gap, allowance)
        if not correlations.is_chaos:
            gap, allowance = series_ode_gap(family.f1_limit, propagators, t, scenario.n_max, correlations)
            report.diagnostics["series_closure_gap"] = {"gap": gap, "allowance": allowance}
    except HorizonError as exc:
        logger.warning("%s; the iteration series is not compared", exc)
        report.diagnostics["horizon_exceeded"] = True

    s = 2
    probes = probe_basis(scenario.dim, (1, 2), rng, settings.WORKBENCH["PROBE_COUNT"])
    first = first_generator_limit_study(family.eps_ladder, t, s, spec, correlations, probes)
    report.table("first_generator", ("epsilon", "distance"), first)
    report.check("first generator approaches free carriage", _decrease_violations(d for _, d in first), 0)

    orders = range(1, min(scenario.n_max, 2) + 1)
    probes_by_order = {n: product_probes(scenario.dim, s, n, rng, 3) for n in orders}
    higher = higher_order_vanishing_study(family.eps_ladder, t, s, max(orders, default=0), spec, correlations, probes_by_order)
    report.table("higher_order", ("epsilon", "n", "norm"), higher)
    for n in orders:
        norms = [norm for _, order, norm in higher if order == n]
        report.check(f"generated order {n + 1} vanishes", _decrease_violations(norms), 0)


# ---------------------------------------------------------
# correlation-propagation
# ---------------------------------------------------------

def run_propagation(scenario, report):
    spec = scenario.spec
    family = _family(scenario)
    trunc = SeriesTruncation(scenario.n_max)
    t = scenario.t_end
    s = 2

    rows = correlation_propagation_residual(family, t, s, spec, scenario.correlations, trunc, scenario.steps)
    report.table("convergence", CONVERGENCE_COLUMNS, [row.as_tuple() for row in rows])
    report.check("correlation residual decreases", _decrease_violations(row.distance for row in rows), 0)

    chaos = CorrelationFamily.chaos(scenario.dim)
    control = correlation_propagation_residual(family, t, s, spec, chaos, trunc, scenario.steps)
    report.table("chaos_control", CONVERGENCE_COLUMNS, [row.as_tuple() for row in control])
    report.check("chaos control residual decreases", _decrease_violations(row.distance for row in control), 0)

    f1_t = limit_trajectory(family, spec, chaos, t, scenario.steps).states[-1]
    carried = propagated_correlation(Propagators(spec), chaos, f1_t, t, s)
    product = product_state(f1_t, tuple(range(1, s + 1)))
    report.check("chaos limit is a product", trace_norm(carried - product), scenario.tolerance("identity"))
    report.diagnostics["chaos_input"] = scenario.correlations.is_chaos


# ---------------------------------------------------------
# continuum
# ---------------------------------------------------------

def run_continuum(scenario, report):
    config = scenario.continuum
    grid = Grid1D(config["length"], config["points"])
    wave0 = gaussian_packet(grid, config["sigma"])
    dt, t_end = config["dt"], config["t_end"]

    phase = plane_wave_phase_error(grid, config.get("plane_wave_mode", 1), t_end, dt)
    report.check("plane wave phase", phase, scenario.tolerance("phase"))

    trajectory = nls_solve(wave0, time_grid(t_end, dt))
    report.check("mass change per step", trajectory.max_step_mass_change(), scenario.tolerance("mass"))
    report.check("energy drift", trajectory.energy_drift(), scenario.tolerance("energy"))
    report.table("trajectory", TRAJECTORY_COLUMNS, trajectory.rows())
    every = max(1, (len(trajectory.waves) - 1) // 20)
    report.artifacts["psi.bin"] = partial(write_snapshots, trajectory=trajectory, every=every)

    kernel_grid = Grid1D(config.get("kernel_length", config["length"]), config.get("kernel_points", 32))
    packet = gaussian_packet(kernel_grid, config["sigma"])
    kernel_t_end = config.get("kernel_t_end", 0.2)
    kernel_dt = config.get("kernel_dt", 0.01)
    ratio, coarse, fine = dirac_halving_ratio(packet, kernel_t_end, kernel_dt)
    report.diagnostics["dirac_gaps"] = [coarse, fine]
    report.check("Dirac kernel reduction order", abs(ratio - 4.0), 4.0 * scenario.tolerance("ratio"))

    b0 = default_pair_operator(kernel_grid, config.get("strength", 1.0), config.get("correlation_length", 1.0))
    coupled = gp_solve(packet, time_grid(kernel_t_end, kernel_dt), b0)
    report.diagnostics["gp_mass_drift"] = float(np.max(np.abs(np.array(coupled.masses()) - coupled.masses()[0])))
    report.artifacts["gp.csv"] = partial(write_trajectory_csv, trajectory=coupled)


RUNNERS = {
    "identities": run_identities,
    "hierarchy-equivalence": run_equivalence,
    "meanfield-ladder": run_meanfield,
    "correlation-propagation": run_propagation,
    "continuum": run_continuum,
}


def run_scenario(scenario):
    report = Report(scenario.name, scenario.experiment, scenario.hash)
    logger.info("running %s (%s)", scenario.name, scenario.experiment)
    started = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceRadiusWarning)
        RUNNERS[scenario.experiment](scenario, report)
    radius = sorted({str(w.message) for w in caught if issubclass(w.category, ConvergenceRadiusWarning)})
    if radius:
        report.diagnostics["radius_warnings"] = radius
    report.timing["elapsed_ms"] = (time.perf_counter() - started) * 1000.0
    logger.info(
        "%s finished: %d/%d checks passed", scenario.name, len(report.checks) - len(report.failures()), len(report.checks)
    )
    return report
