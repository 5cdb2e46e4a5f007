import logging
import threading
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
from django.conf import settings

from tensorcore.exceptions import HermiticityError, LabelError, SymmetryError
from tensorcore.operators import (
    LabeledOperator,
    Propagator,
    check_dense_size,
    commutator,
    conjugate,
    embed,
    permute_slots,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """H_n = Σ K(i) + ε Σ_{i<j} Φ(i, j) on n copies of a d-dimensional space."""

    kinetic: np.ndarray
    potential: np.ndarray
    epsilon: float = 1.0

    def __post_init__(self):
        kinetic = np.array(self.kinetic, dtype=complex)
        potential = np.array(self.potential, dtype=complex)
        d = kinetic.shape[0]
        if kinetic.shape != (d, d) or potential.shape != (d * d, d * d):
            raise ValueError(f"kinetic {kinetic.shape} and potential {potential.shape} do not fit")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        tol = settings.WORKBENCH["HERMITIAN_TOLERANCE"]
        for name, matrix in (("kinetic", kinetic), ("potential", potential)):
            scale = max(1.0, np.linalg.norm(matrix, 2))
            if np.linalg.norm(matrix - matrix.conj().T, 2) > tol * scale:
                raise HermiticityError(f"{name} operator is not Hermitian")
        pair = LabeledOperator((1, 2), potential, d)
        if np.linalg.norm(permute_slots(pair, (1, 0)).matrix - potential, 2) > tol * max(1.0, np.linalg.norm(potential, 2)):
            raise SymmetryError("potential is not symmetric under exchange of its two slots")
        kinetic.setflags(write=False)
        potential.setflags(write=False)
        object.__setattr__(self, "kinetic", kinetic)
        object.__setattr__(self, "potential", potential)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def dim(self):
        return self.kinetic.shape[0]

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=epsilon)

    def kinetic_on(self, label):
        return LabeledOperator((label,), self.kinetic, self.dim)

    def potential_on(self, j1, j2):
        return LabeledOperator.on((j1, j2), self.potential, self.dim)

    @property
    def potential_norm(self):
        """Operator norm ‖Φ‖."""
        return float(np.linalg.norm(self.potential, 2))


def build_hamiltonian(spec, n, labels=None):
    if n < 1:
        raise ValueError("a Hamiltonian needs at least one particle")
    labels = tuple(range(1, n + 1)) if labels is None else tuple(sorted(labels))
    if len(labels) != n:
        raise LabelError(f"{n} particles need {n} labels, got {labels}")
    check_dense_size(spec.dim, n)
    h = np.zeros((spec.dim ** n,) * 2, dtype=complex)
    for i in labels:
        h += embed(spec.kinetic_on(i), labels).matrix
    for i, j in combinations(labels, 2):
        h += spec.epsilon * embed(spec.potential_on(i, j), labels).matrix
    return LabeledOperator(labels, h, spec.dim)


@dataclass(frozen=True, eq=False)
class EvolutionGroup:
    """G_n(−t) f = e^{−itH_n} f e^{itH_n} on the canonical labels 1..n."""

    n: int
    hamiltonian: LabeledOperator
    propagator: Propagator

    @property
    def labels(self):
        return self.hamiltonian.labels

    def conjugate(self, f, t, labels=None):
        """G_n(−t) acting on ``labels`` of ``f`` (the group's own labels by default)."""
        labels = self.labels if labels is None else tuple(sorted(labels))
        if len(labels) != self.n:
            raise LabelError(f"a {self.n}-particle group cannot act on {labels}")
        if t == 0:
            return f
        return conjugate(f, self.propagator.unitary_matrix(t), labels)


class Propagators:
    """Evolution groups of one Hamiltonian, one eigendecomposition per particle count."""

    def __init__(self, spec):
        self.spec = spec
        self._groups = {}
        self._lock = threading.Lock()

    def group(self, n):
        group = self._groups.get(n)
        if group is None:
            h = build_hamiltonian(self.spec, n)
            group = EvolutionGroup(n, h, Propagator(h))
            with self._lock:
                group = self._groups.setdefault(n, group)
            logger.debug("evolution group for %d particles ready", n)
        return group

    def evolve(self, f, t, labels=None):
        """G_{|labels|}(−t) on ``labels`` of ``f``; the other slots are untouched."""
        labels = f.labels if labels is None else tuple(labels)
        if not labels:
            return f
        return self.group(len(labels)).conjugate(f, t, labels)

    def free(self, f, t, labels=None):
        """∏_i G_1(−t, i) over ``labels`` of ``f``."""
        labels = f.labels if labels is None else tuple(labels)
        if t == 0 or not labels:
            return f
        one = self.group(1)
        u = one.propagator.unitary_matrix(t)
        for i in labels:
            f = conjugate(f, u, (i,))
        return f


def group_apply(group, t, f):
    if f.labels != group.labels:
        raise LabelError(f"group on {group.labels} cannot evolve an operator on {f.labels}")
    return group.conjugate(f, t)


GENERATOR_KINDS = ("free", "interaction", "full")


def generator_apply(spec, kind, f, labels=None):
    """
    −i[H_part, f] for the free part K(j), the interaction Φ(j₁, j₂) or the full H_n.

    The interaction part carries no ε; the full generator does.
    """
    if kind == "free":
        (j,) = labels
        part = spec.kinetic_on(j)
    elif kind == "interaction":
        j1, j2 = labels
        part = spec.potential_on(j1, j2)
    elif kind == "full":
        part = build_hamiltonian(spec, f.n, f.labels)
    else:
        raise ValueError(f"unknown generator kind {kind!r}; expected one of {GENERATOR_KINDS}")
    missing = [x for x in part.labels if x not in f.labels]
    if missing:
        raise LabelError(f"generator acts on labels {missing} absent from {f.labels}")
    return commutator(part, f)
