import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, strategies as st
from scipy import linalg

from clusters.expansions import OrderNotSupported
from hierarchy.correlations import CorrelationFamily
from scenarios.config import load_fixture
from tensorcore.exceptions import HermiticityError, LabelError, SymmetryError
from tensorcore.operators import (
    LabeledOperator,
    embed,
    local_product,
    random_density,
    random_hermitian,
    tensor,
    trace_norm,
)

from .cumulants import (
    CumulantOrder,
    ScatteringCumulant,
    cumulant_apply,
    cumulant_origin_residual,
    first_order_strength,
    inverse_cluster_residual,
    probe_basis,
    product_probes,
    scattering_cumulant,
)
from .generated import (
    CumulantBinding,
    GeneratedEvolution,
    closed_form_residual,
    generated_evolution,
    kce_residual,
    printed_example_residual,
)
from .hamiltonian import (
    EvolutionGroup,
    HamiltonianSpec,
    Propagators,
    build_hamiltonian,
    generator_apply,
    group_apply,
)

KINETIC = np.diag([0.0, 1.0]).astype(complex)


def fixture_a():
    return load_fixture("standard_a")


def free_spec():
    return HamiltonianSpec(KINETIC, np.zeros((4, 4), dtype=complex), 1.0)


class HamiltonianSpecTests(SimpleTestCase):

    def test_rejects_non_hermitian_kinetic(self):
        with self.assertRaises(HermiticityError):
            HamiltonianSpec(np.array([[0, 1], [0, 0]], dtype=complex), np.zeros((4, 4)), 1.0)

    def test_rejects_asymmetric_potential(self):
        # Φ = σ_z ⊗ I changes under exchange of the slots
        potential = np.kron(np.diag([1.0, -1.0]), np.eye(2))
        with self.assertRaises(SymmetryError):
            HamiltonianSpec(KINETIC, potential, 1.0)

    def test_rejects_non_positive_epsilon(self):
        with self.assertRaises(ValueError):
            HamiltonianSpec(KINETIC, np.zeros((4, 4)), 0.0)


class BuildHamiltonianTests(SimpleTestCase):

    def setUp(self):
        self.spec = fixture_a().spec

    def test_one_particle(self):
        np.testing.assert_allclose(build_hamiltonian(self.spec, 1).matrix, KINETIC)

    def test_free_pair(self):
        h = build_hamiltonian(free_spec(), 2)
        expected = np.kron(KINETIC, np.eye(2)) + np.kron(np.eye(2), KINETIC)
        np.testing.assert_allclose(h.matrix, expected)

    def test_three_particles_against_index_sums(self):
        spec = self.spec.with_epsilon(0.7)
        h = build_hamiltonian(spec, 3).matrix
        k, phi = spec.kinetic, spec.potential
        expected = np.zeros((8, 8), dtype=complex)
        for a in np.ndindex(2, 2, 2):
            for b in np.ndindex(2, 2, 2):
                value = 0.0
                for i in range(3):
                    if all(a[j] == b[j] for j in range(3) if j != i):
                        value += k[a[i], b[i]]
                for i, j in ((0, 1), (0, 2), (1, 2)):
                    (rest,) = {0, 1, 2} - {i, j}
                    if a[rest] == b[rest]:
                        value += 0.7 * phi[2 * a[i] + a[j], 2 * b[i] + b[j]]
                expected[4 * a[0] + 2 * a[1] + a[2], 4 * b[0] + 2 * b[1] + b[2]] = value
        np.testing.assert_allclose(h, expected, atol=1e-14)
        self.assertTrue(build_hamiltonian(spec, 3).is_hermitian())

    def test_label_count_must_match(self):
        with self.assertRaises(LabelError):
            build_hamiltonian(self.spec, 2, labels=(1, 2, 3))

    def test_needs_a_particle(self):
        with self.assertRaises(ValueError):
            build_hamiltonian(self.spec, 0)


class GroupTests(SimpleTestCase):

    def setUp(self):
        self.scenario = fixture_a()
        self.propagators = Propagators(self.scenario.spec)
        self.rng = self.scenario.rng()

    def test_origin_is_identity(self):
        f = random_hermitian(self.rng, (1, 2), 2)
        self.assertIs(group_apply(self.propagators.group(2), 0.0, f), f)

    def test_matches_matrix_exponential(self):
        f = random_hermitian(self.rng, (1, 2), 2)
        h = build_hamiltonian(self.scenario.spec, 2).matrix
        u = linalg.expm(-0.4j * h)
        result = group_apply(self.propagators.group(2), 0.4, f)
        np.testing.assert_allclose(result.matrix, u @ f.matrix @ u.conj().T, atol=1e-12)

    @given(st.floats(min_value=-3.0, max_value=3.0))
    def test_trace_norm_isometry(self, t):
        rho = random_density(np.random.default_rng(5), (1, 2), 2)
        evolved = group_apply(self.propagators.group(2), t, rho)
        self.assertAlmostEqual(trace_norm(evolved), trace_norm(rho), delta=1e-11)
        self.assertAlmostEqual(evolved.trace().real, 1.0, delta=1e-12)
        self.assertTrue(evolved.is_positive(tol=1e-12))

    def test_forward_then_backward(self):
        f = random_hermitian(self.rng, (1, 2, 3), 2)
        there = self.propagators.evolve(f, 0.3)
        back = self.propagators.evolve(there, -0.3)
        np.testing.assert_allclose(back.matrix, f.matrix, atol=1e-12)

    def test_group_law(self):
        f = random_hermitian(self.rng, (1, 2), 2)
        twice = self.propagators.evolve(self.propagators.evolve(f, 0.2), 0.5)
        once = self.propagators.evolve(f, 0.7)
        np.testing.assert_allclose(twice.matrix, once.matrix, atol=1e-12)

    def test_free_groups_factorize(self):
        propagators = Propagators(free_spec())
        f1 = random_density(self.rng, (1,), 2)
        f2 = random_density(self.rng, (2,), 2)
        full = propagators.evolve(tensor(f1, f2), 0.8)
        factored = tensor(propagators.evolve(f1, 0.8), propagators.evolve(f2, 0.8))
        np.testing.assert_allclose(full.matrix, factored.matrix, atol=1e-12)

    def test_label_mismatch(self):
        with self.assertRaises(LabelError):
            group_apply(self.propagators.group(2), 0.1, random_hermitian(self.rng, (1, 3), 2))

    def test_groups_are_cached(self):
        self.assertIs(self.propagators.group(2), self.propagators.group(2))
        self.assertIsInstance(self.propagators.group(1), EvolutionGroup)


class GeneratorTests(SimpleTestCase):

    def setUp(self):
        self.scenario = fixture_a()
        self.spec = self.scenario.spec.with_epsilon(0.5)
        self.rng = self.scenario.rng()

    def test_commuting_operator(self):
        f = LabeledOperator((1,), np.diag([0.3, 0.7]), 2)
        self.assertEqual(trace_norm(generator_apply(self.spec, "free", f, (1,))), 0.0)

    def test_difference_quotient_converges_linearly(self):
        propagators = Propagators(self.spec)
        f = random_hermitian(self.rng, (1, 2), 2)
        rate = generator_apply(self.spec, "full", f)
        errors = []
        for h in (1e-3, 5e-4):
            quotient = (propagators.evolve(f, h) - f) / h
            errors.append(trace_norm(quotient - rate))
        self.assertLess(errors[0], 1e-2)
        self.assertAlmostEqual(errors[0] / errors[1], 2.0, delta=0.2)

    def test_full_generator_is_sum_of_parts(self):
        f = random_hermitian(self.rng, (1, 2, 3), 2)
        total = generator_apply(self.spec, "full", f)
        parts = sum(
            (generator_apply(self.spec, "free", f, (j,)) for j in (2, 3)),
            generator_apply(self.spec, "free", f, (1,)),
        )
        for pair in ((1, 2), (1, 3), (2, 3)):
            parts = parts + generator_apply(self.spec, "interaction", f, pair) * self.spec.epsilon
        self.assertLess(trace_norm(total - parts), 1e-12)

    def test_missing_label(self):
        f = random_hermitian(self.rng, (1, 2), 2)
        with self.assertRaises(LabelError):
            generator_apply(self.spec, "interaction", f, (2, 3))

    def test_unknown_kind(self):
        with self.assertRaises(ValueError):
            generator_apply(self.spec, "collision", random_hermitian(self.rng, (1,), 2), (1,))


class CumulantTests(SimpleTestCase):

    def setUp(self):
        self.scenario = fixture_a()
        self.propagators = Propagators(self.scenario.spec)
        self.rng = self.scenario.rng()

    def test_single_partition_is_the_group(self):
        f = random_hermitian(self.rng, (1, 2), 2)
        order = CumulantOrder(2, 0, 0.6)
        result = cumulant_apply(self.propagators, order, f)
        np.testing.assert_allclose(result.matrix, self.propagators.evolve(f, 0.6).matrix, atol=1e-13)

    def test_vanishes_at_origin(self):
        for s, n in ((1, 1), (1, 2), (1, 3), (2, 1), (2, 2)):
            probes = probe_basis(2, range(1, s + n + 1), self.rng, 8)
            self.assertLess(cumulant_origin_residual(self.propagators, s, n, probes), 1e-12, (s, n))

    def test_vanishes_without_interaction(self):
        propagators = Propagators(free_spec())
        for s, n in ((1, 1), (1, 2), (2, 1)):
            order = CumulantOrder(s, n, 0.9)
            for f in probe_basis(2, order.labels, self.rng, 4)[:6]:
                self.assertLess(trace_norm(cumulant_apply(propagators, order, f)), 1e-11)

    def test_inverse_cluster_identity(self):
        for s, n in ((1, 1), (1, 2), (2, 1), (1, 3), (2, 2), (3, 1)):
            probes = [random_hermitian(self.rng, range(1, s + n + 1), 2) for _ in range(4)]
            residual = inverse_cluster_residual(self.propagators, s, n, 0.5, probes)
            self.assertLess(residual, 1e-10, (s, n))

    def test_first_order_strength_shrinks_with_epsilon(self):
        probes = probe_basis(2, (1, 2), self.rng, 8)
        strengths = [
            first_order_strength(Propagators(self.scenario.spec.with_epsilon(eps)), 0.5, probes)
            for eps in (1e-1, 1e-2, 1e-3)
        ]
        self.assertEqual(strengths, sorted(strengths, reverse=True))
        self.assertLess(strengths[-1], 1e-3)

    def test_order_bounds(self):
        with self.assertRaises(ValueError):
            CumulantOrder(0, 1)
        with self.assertRaises(ValueError):
            CumulantOrder(1, -1)


class ScatteringCumulantTests(SimpleTestCase):

    def setUp(self):
        self.scenario = fixture_a()
        self.propagators = Propagators(self.scenario.spec)
        self.correlations = self.scenario.correlations
        self.rng = self.scenario.rng()

    def test_origin_multiplies_by_correlation(self):
        g2 = self.correlations.order(2)
        f = random_hermitian(self.rng, (1, 2), 2)
        result = scattering_cumulant(self.propagators, CumulantOrder(2, 0, 0.0), g2)(f)
        np.testing.assert_allclose(result.matrix, local_product(g2, f).matrix, atol=1e-14)

    def test_uncorrelated_free_case_vanishes(self):
        propagators = Propagators(free_spec())
        identity = LabeledOperator((1, 2), np.eye(4), 2)
        f = random_hermitian(self.rng, (1, 2), 2)
        result = scattering_cumulant(propagators, CumulantOrder(1, 1, 0.7), identity)(f)
        self.assertLess(trace_norm(result), 1e-11)

    def test_matches_factor_by_factor_composition(self):
        t = 0.3
        g2 = self.correlations.order(2)
        f = random_hermitian(self.rng, (1, 2), 2)
        h2 = build_hamiltonian(self.scenario.spec, 2).matrix
        u1 = linalg.expm(-1j * t * KINETIC)
        free = np.kron(u1, u1)
        full = linalg.expm(-1j * t * h2)
        backward = free.conj().T @ f.matrix @ free
        correlated = g2.matrix @ backward
        expected = full @ correlated @ full.conj().T - free @ correlated @ free.conj().T
        result = ScatteringCumulant(self.propagators, t, (1,), (2,), g2)(f)
        np.testing.assert_allclose(result.matrix, expected, atol=1e-12)


class GeneratedEvolutionTests(SimpleTestCase):

    def setUp(self):
        self.scenario = fixture_a()
        self.propagators = Propagators(self.scenario.spec)
        self.correlations = self.scenario.correlations
        self.rng = self.scenario.rng()

    def test_first_order_is_scattering_cumulant(self):
        order = CumulantOrder(2, 0, 0.4)
        f = random_hermitian(self.rng, (1, 2), 2)
        generated = generated_evolution(self.propagators, order, self.correlations)
        direct = ScatteringCumulant(self.propagators, 0.4, (1, 2), (), self.correlations.order(2))
        np.testing.assert_allclose(generated(f).matrix, direct(f).matrix, atol=1e-14)

    def test_second_order_formula(self):
        order = CumulantOrder(2, 1, 0.4)
        binding = CumulantBinding(self.propagators, self.correlations, order.t)
        generated = GeneratedEvolution(self.propagators, order, self.correlations, binding=binding)

        def a(anchor, extras=()):
            labels = tuple(sorted(anchor + extras))
            return ScatteringCumulant(self.propagators, order.t, anchor, extras, self.correlations.cluster(labels))

        f = random_hermitian(self.rng, (1, 2, 3), 2)
        expected = a((1, 2), (3,))(f) - a((1, 2))(a((1,), (3,))(f) + a((2,), (3,))(f))
        self.assertLess(trace_norm(generated(f) - expected), 1e-12)

    def test_printed_examples(self):
        for s, n in ((1, 1), (1, 2), (2, 1), (2, 2)):
            order = CumulantOrder(s, n, 0.5)
            probes = probe_basis(2, order.labels, self.rng, 4)
            residual = printed_example_residual(self.propagators, order, self.correlations, probes)
            self.assertLess(residual, 1e-11, (s, n))

    def test_closed_form_agrees_after_trace(self):
        for s, n in ((1, 2), (2, 1), (2, 2)):
            order = CumulantOrder(s, n, 0.5)
            probes = product_probes(2, s, n, self.rng, 4)
            self.assertLess(closed_form_residual(self.propagators, order, self.correlations, probes), 1e-10)

    def test_order_limit(self):
        order = CumulantOrder(1, 3, 0.1)
        with self.assertRaises(OrderNotSupported):
            generated_evolution(self.propagators, order, self.correlations)
        with self.assertRaises(OrderNotSupported):
            generated_evolution(self.propagators, CumulantOrder(1, 4, 0.1), self.correlations, n_max=4)
        self.assertEqual(
            generated_evolution(self.propagators, order, self.correlations, n_max=3).labels, (1, 2, 3, 4)
        )

    def test_unknown_method(self):
        with self.assertRaises(ValueError):
            GeneratedEvolution(self.propagators, CumulantOrder(1, 1), self.correlations, method="series")


class KineticClusterExpansionTests(SimpleTestCase):

    def setUp(self):
        self.scenario = fixture_a()
        self.propagators = Propagators(self.scenario.spec)
        self.correlations = self.scenario.correlations
        self.rng = self.scenario.rng()

    def residual(self, s, n, t, correlations=None):
        probes = product_probes(2, s, n, self.rng, 4)
        return kce_residual(self.propagators, CumulantOrder(s, n, t), correlations or self.correlations, probes)

    def test_zeroth_order(self):
        self.assertLess(self.residual(2, 0, 0.5), 1e-15)

    def test_first_order(self):
        self.assertLess(self.residual(1, 1, 0.5), 1e-10)
        self.assertLess(self.residual(2, 1, 0.5), 1e-10)

    def test_second_order_on_fixture_times(self):
        for t in self.scenario.times:
            for s in (1, 2):
                self.assertLess(self.residual(s, 2, t), self.scenario.tolerance("kce"), (s, t))

    def test_uncorrelated_family(self):
        chaos = CorrelationFamily.chaos(2)
        self.assertLess(self.residual(2, 2, 0.5, chaos), 1e-9)

    def test_recurrence_holds_on_the_full_basis(self):
        for s, n in ((1, 1), (1, 2), (2, 1), (2, 2)):
            order = CumulantOrder(s, n, 0.5)
            probes = probe_basis(2, order.labels, self.rng, 4)
            residual = kce_residual(self.propagators, order, self.correlations, probes, method="recurrence")
            self.assertLess(residual, 1e-10, (s, n))

    def test_unknown_expansion(self):
        with self.assertRaises(ValueError):
            kce_residual(self.propagators, CumulantOrder(1, 1, 0.5), self.correlations, [], method="series")

    def test_order_limit(self):
        with self.assertRaises(OrderNotSupported):
            self.residual(1, 3, 0.1)

    def test_cluster_correlation_is_the_order_of_the_union(self):
        g3 = self.correlations.cluster((1, 2, 3))
        self.assertEqual(g3.labels, (1, 2, 3))
        np.testing.assert_allclose(
            embed(self.correlations.cluster((2, 4)), (2, 4)).matrix, self.correlations.order(2).matrix
        )
