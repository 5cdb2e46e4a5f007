import logging
import math
import threading
import warnings
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from clusters.combinatorics import mobius_invert, partition_product
from tensorcore.exceptions import ConvergenceRadiusWarning, LabelError, SymmetryError
from tensorcore.operators import LabeledOperator, symmetry_report, trace_norm

logger = logging.getLogger(__name__)


class CorrelationFamily:
    """
    Initial correlation operators g_n (n ≥ 2) on labels 1..n.

    Orders above the highest supplied one follow from the connected family
    with the unsupplied connected operators set to zero, so the family is
    defined at every order. ``cluster(labels)`` gives the cluster correlation
    g_{1+n}({Y}, X∖Y) on the declusterized labels, which is g_{s+n} there.
    """

    def __init__(self, g, dim):
        self.dim = int(dim)
        self.supplied = {}
        for n, op in sorted(g.items()):
            n = int(n)
            if n < 2:
                continue
            if op.labels != tuple(range(1, n + 1)) or op.dim != self.dim:
                raise LabelError(f"g_{n} must act on labels 1..{n} of dimension {self.dim}")
            deviation = symmetry_report(op).max_deviation
            if deviation > settings.WORKBENCH["HERMITIAN_TOLERANCE"] * max(1.0, trace_norm(op)):
                raise SymmetryError(f"g_{n} is not permutation symmetric (deviation {deviation:.3e})")
            self.supplied[n] = op
        self.connected = mobius_invert(self.supplied, self.dim)
        self._orders = dict(self.supplied)
        self._lock = threading.Lock()

    @classmethod
    def chaos(cls, dim):
        return cls({}, dim)

    @property
    def is_chaos(self):
        return all(trace_norm(c) == 0.0 for n, c in self.connected.items() if n > 1)

    @property
    def highest_order(self):
        return max(self.supplied, default=1)

    def order(self, n):
        """g_n on labels 1..n; g_1 is the identity."""
        if n < 1:
            raise ValueError("correlation orders start at 1")
        op = self._orders.get(n)
        if op is None:
            labels = tuple(range(1, n + 1))
            if n == 1:
                op = LabeledOperator(labels, np.eye(self.dim, dtype=complex), self.dim)
            else:
                op = partition_product(self.connected, labels, self.dim)
            with self._lock:
                op = self._orders.setdefault(n, op)
        return op

    def cluster(self, labels):
        labels = tuple(sorted(labels))
        op = self.order(len(labels))
        return op.relabel(dict(zip(range(1, len(labels) + 1), labels)))

    def clustered(self, s, n):
        return self.order(s + n)

    @property
    def max_operator_norm(self):
        norms = [float(np.linalg.norm(op.matrix, 2)) for op in self.supplied.values()]
        return max(norms, default=1.0)

    def operator_norm(self, n):
        return float(np.linalg.norm(self.order(n).matrix, 2))


@dataclass(frozen=True, eq=False)
class InitialDatum:
    """F_s(0) = g_s ∏ F₁⁰(i)."""

    f1_0: LabeledOperator
    correlations: CorrelationFamily

    def __post_init__(self):
        if self.f1_0.labels != (1,):
            raise LabelError("the one-particle marginal must act on label 1")
        if not self.f1_0.is_positive(tol=1e-10):
            raise ValueError("the one-particle marginal must be positive")

    @property
    def dim(self):
        return self.f1_0.dim

    @property
    def norm(self):
        return trace_norm(self.f1_0)

    def scaled(self, factor):
        return InitialDatum(self.f1_0 * factor, self.correlations)


# ---------------------------------------------------------
# Convergence radii of the solution series
# ---------------------------------------------------------

def radius(name, s=None):
    if name == "functional":
        return math.exp(-(3 * s + 2))
    return settings.CONVERGENCE_RADII[name]


def check_radius(name, norm, s=None, what="F1"):
    """Warn when ``norm`` reaches the sufficient convergence radius ``name``."""
    bound = radius(name, s)
    if norm >= bound:
        message = f"{what} trace norm {norm:.3e} is not below the {name} series radius {bound:.3e}"
        logger.warning(message)
        warnings.warn(message, ConvergenceRadiusWarning, stacklevel=3)
        return False
    return True
