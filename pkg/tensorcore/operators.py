"""
Labeled operator algebra on tensor powers of one finite-dimensional space.

A ``LabeledOperator`` stores a dense matrix acting on H^{⊗n} together with the
particle labels of its tensor slots. Slots are always kept in increasing label
order; permutations are applied as axis transpositions of the (d,)*2n tensor
view, never as permutation matrices.
"""

import hashlib
import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np
from django.conf import settings
from scipy import linalg

from .exceptions import HermiticityError, LabelError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OneParticleSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError(f"one-particle dimension must be positive, got {self.dim}")

    def identity(self, labels=()):
        labels = tuple(labels)
        return LabeledOperator(labels, np.eye(self.dim ** len(labels), dtype=complex), self.dim)


@dataclass(frozen=True)
class PermutationSymmetryReport:
    max_deviation: float
    permutations: int = 1


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    labels: tuple
    matrix: np.ndarray = field(repr=False)
    dim: int

    def __post_init__(self):
        labels = tuple(int(x) for x in self.labels)
        matrix = np.array(self.matrix, dtype=complex)
        if len(set(labels)) != len(labels):
            raise LabelError(f"label collision in {labels}")
        if any(b <= a for a, b in zip(labels, labels[1:])):
            raise LabelError(f"labels {labels} are not in canonical increasing order")
        side = self.dim ** len(labels)
        if matrix.shape != (side, side):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match dim={self.dim} on {len(labels)} slots"
            )
        matrix.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def on(cls, labels, matrix, dim):
        """Build from a matrix whose slots follow ``labels`` in the given (any) order."""
        labels = tuple(int(x) for x in labels)
        if len(set(labels)) != len(labels):
            raise LabelError(f"label collision in {labels}")
        order = sorted(range(len(labels)), key=lambda i: labels[i])
        matrix = _transpose_slots(np.asarray(matrix, dtype=complex), dim, order)
        return cls(tuple(labels[i] for i in order), matrix, dim)

    @classmethod
    def scalar(cls, value, dim):
        return cls((), np.array([[value]], dtype=complex), dim)

    # -- structure ---------------------------------------------------------

    @property
    def n(self):
        return len(self.labels)

    @property
    def side(self):
        return self.matrix.shape[0]

    def relabel(self, mapping):
        """Rename slots; ``mapping`` sends old labels to new ones."""
        return LabeledOperator.on([mapping.get(x, x) for x in self.labels], self.matrix, self.dim)

    def fingerprint(self):
        digest = hashlib.sha1(np.ascontiguousarray(self.matrix).tobytes())
        digest.update(repr((self.labels, self.dim)).encode())
        return digest.hexdigest()

    # -- algebra -----------------------------------------------------------

    def _same_slots(self, other):
        if not isinstance(other, LabeledOperator):
            return NotImplemented
        if other.labels != self.labels or other.dim != self.dim:
            raise LabelError(f"operators on {self.labels} and {other.labels} cannot be combined")
        return True

    def __add__(self, other):
        if self._same_slots(other) is NotImplemented:
            return NotImplemented
        return LabeledOperator(self.labels, self.matrix + other.matrix, self.dim)

    def __sub__(self, other):
        if self._same_slots(other) is NotImplemented:
            return NotImplemented
        return LabeledOperator(self.labels, self.matrix - other.matrix, self.dim)

    def __neg__(self):
        return LabeledOperator(self.labels, -self.matrix, self.dim)

    def __mul__(self, value):
        if isinstance(value, LabeledOperator):
            return NotImplemented
        return LabeledOperator(self.labels, self.matrix * value, self.dim)

    __rmul__ = __mul__

    def __truediv__(self, value):
        return LabeledOperator(self.labels, self.matrix / value, self.dim)

    def __matmul__(self, other):
        if self._same_slots(other) is NotImplemented:
            return NotImplemented
        return LabeledOperator(self.labels, self.matrix @ other.matrix, self.dim)

    def dagger(self):
        return LabeledOperator(self.labels, self.matrix.conj().T, self.dim)

    def trace(self):
        return complex(np.trace(self.matrix))

    def hermiticity_defect(self):
        scale = max(1.0, float(np.linalg.norm(self.matrix, 2)))
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T, 2)) / scale

    def is_hermitian(self, tol=None):
        if tol is None:
            tol = settings.WORKBENCH["HERMITIAN_TOLERANCE"]
        return self.hermiticity_defect() <= tol

    def eigenvalues(self):
        """Eigenvalues of the Hermitian part, ascending."""
        return linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def is_positive(self, tol=1e-12):
        return self.is_hermitian() and float(self.eigenvalues()[0]) >= -tol


# ---------------------------------------------------------
# Slot bookkeeping
# ---------------------------------------------------------

def _transpose_slots(matrix, dim, order):
    """Reorder tensor slots: new slot k is old slot ``order[k]``."""
    n = len(order)
    if n < 2 or list(order) == sorted(order):
        return matrix
    side = dim ** n
    view = matrix.reshape((dim,) * (2 * n))
    axes = list(order) + [n + p for p in order]
    return view.transpose(axes).reshape(side, side)


def _positions(op, labels):
    missing = [x for x in labels if x not in op.labels]
    if missing:
        raise LabelError(f"labels {missing} are not present in {op.labels}")
    return [op.labels.index(x) for x in labels]


def _contract_local(op, local, local_labels, side):
    """Multiply ``op`` by a local operator on ``local_labels`` from the left or right."""
    d, n, k = op.dim, op.n, len(local_labels)
    pos = _positions(op, local_labels)
    view = op.matrix.reshape((d,) * (2 * n))
    block = np.asarray(local, dtype=complex).reshape((d,) * (2 * k))
    if side == "left":
        out = np.tensordot(block, view, axes=(list(range(k, 2 * k)), pos))
        out = np.moveaxis(out, list(range(k)), pos)
    else:
        cols = [n + p for p in pos]
        out = np.tensordot(view, block, axes=(cols, list(range(k))))
        out = np.moveaxis(out, list(range(2 * n - k, 2 * n)), cols)
    return LabeledOperator(op.labels, out.reshape(op.side, op.side), d)


def left_multiply(op, local, local_labels):
    return _contract_local(op, local, tuple(local_labels), "left")


def right_multiply(op, local, local_labels):
    return _contract_local(op, local, tuple(local_labels), "right")


def local_product(a, b):
    """``a @ b`` where ``a`` acts on a subset of the slots of ``b``."""
    if a.labels == b.labels:
        return a @ b
    return left_multiply(b, a.matrix, a.labels)


def conjugate(op, unitary, local_labels=None):
    """U f U† with U acting on ``local_labels`` (default: all slots of ``op``)."""
    if local_labels is None:
        local_labels = op.labels
    unitary = np.asarray(unitary, dtype=complex)
    return right_multiply(left_multiply(op, unitary, local_labels), unitary.conj().T, local_labels)


def commutator(h, f):
    """−i[h, f] with ``h`` acting on a subset of the slots of ``f``."""
    hf = left_multiply(f, h.matrix, h.labels)
    fh = right_multiply(f, h.matrix, h.labels)
    return LabeledOperator(f.labels, -1j * (hf.matrix - fh.matrix), f.dim)


# ---------------------------------------------------------
# Tensor-core operations
# ---------------------------------------------------------

def tensor(a, b):
    if a.dim != b.dim:
        raise ValueError("operators live on different one-particle spaces")
    if set(a.labels) & set(b.labels):
        raise LabelError(f"label collision between {a.labels} and {b.labels}")
    return LabeledOperator.on(a.labels + b.labels, np.kron(a.matrix, b.matrix), a.dim)


def tensor_all(ops):
    ops = list(ops)
    result = ops[0]
    for op in ops[1:]:
        result = tensor(result, op)
    return result


def product_state(one_particle, labels):
    """⊗_{i ∈ labels} f(i) for a one-slot operator ``f``."""
    labels = tuple(sorted(labels))
    if not labels:
        return LabeledOperator.scalar(1.0, one_particle.dim)
    matrix = one_particle.matrix
    result = matrix
    for _ in labels[1:]:
        result = np.kron(result, matrix)
    return LabeledOperator(labels, result, one_particle.dim)


def embed(op, full_labels):
    full = tuple(sorted(int(x) for x in full_labels))
    if len(set(full)) != len(full):
        raise LabelError(f"label collision in {full_labels}")
    extra = [x for x in op.labels if x not in full]
    if extra:
        raise LabelError(f"labels {extra} of the operator are not in {full}")
    if full == op.labels:
        return op
    missing = tuple(x for x in full if x not in op.labels)
    identity = np.eye(op.dim ** len(missing), dtype=complex)
    return LabeledOperator.on(op.labels + missing, np.kron(op.matrix, identity), op.dim)


def partial_trace(op, keep):
    keep = tuple(sorted(int(x) for x in keep))
    extra = [x for x in keep if x not in op.labels]
    if extra:
        raise LabelError(f"cannot keep labels {extra}: operator acts on {op.labels}")
    if keep == op.labels:
        return op
    d, n = op.dim, op.n
    kept = [op.labels.index(x) for x in keep]
    traced = [p for p in range(n) if p not in kept]
    view = op.matrix.reshape((d,) * (2 * n))
    axes = kept + traced + [n + p for p in kept] + [n + p for p in traced]
    dk, dt = d ** len(kept), d ** len(traced)
    reduced = np.einsum("ajbj->ab", view.transpose(axes).reshape(dk, dt, dk, dt))
    return LabeledOperator(keep, reduced, d)


def trace_norm(op):
    matrix = op.matrix if isinstance(op, LabeledOperator) else np.asarray(op)
    if matrix.size == 0:
        return 0.0
    return float(np.sum(linalg.svdvals(matrix)))


def permute_slots(op, perm):
    """The operator with slot contents permuted; ``perm[k]`` is the source slot of slot k."""
    return LabeledOperator(op.labels, _transpose_slots(op.matrix, op.dim, list(perm)), op.dim)


def symmetrize(op):
    n = op.n
    if n < 2:
        return op
    total = np.zeros_like(op.matrix)
    for perm in itertools.permutations(range(n)):
        total = total + permute_slots(op, perm).matrix
    return LabeledOperator(op.labels, total / factorial(n), op.dim)


def symmetry_report(op):
    deviation = 0.0
    count = 0
    for perm in itertools.permutations(range(op.n)):
        deviation = max(deviation, trace_norm(op.matrix - permute_slots(op, perm).matrix))
        count += 1
    return PermutationSymmetryReport(max_deviation=deviation, permutations=max(count, 1))


# ---------------------------------------------------------
# Unitary propagation
# ---------------------------------------------------------

PROPAGATOR_CACHE_SIZE = 256


class _ByFingerprint:
    """Hashable handle on an operator; equal handles share a fingerprint."""

    __slots__ = ("op", "key")

    def __init__(self, op):
        self.op = op
        self.key = op.fingerprint()

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        return isinstance(other, _ByFingerprint) and self.key == other.key


@lru_cache(maxsize=PROPAGATOR_CACHE_SIZE)
def _decomposition(handle):
    logger.debug("cached eigendecomposition for %d-slot operator", handle.op.n)
    return Propagator(handle.op)


class Propagator:
    """
    Eigendecomposition of a Hermitian operator h, giving U(t) = exp(−i t h)
    and the conjugation f ↦ U(t) f U(t)† for any t.
    """

    def __init__(self, h):
        defect = h.hermiticity_defect()
        if defect > settings.WORKBENCH["HERMITIAN_TOLERANCE"]:
            raise HermiticityError(f"operator on {h.labels} is not Hermitian (defect {defect:.3e})")
        self.labels = h.labels
        self.dim = h.dim
        hermitian = 0.5 * (h.matrix + h.matrix.conj().T)
        self.energies, self.vectors = linalg.eigh(hermitian)

    @classmethod
    def for_operator(cls, h):
        """Shared decomposition, least recently used ones evicted past ``PROPAGATOR_CACHE_SIZE``."""
        return _decomposition(_ByFingerprint(h))

    @staticmethod
    def cache_info():
        return _decomposition.cache_info()

    @staticmethod
    def clear_cache():
        _decomposition.cache_clear()

    def unitary_matrix(self, t):
        if t == 0:
            return np.eye(len(self.energies), dtype=complex)
        phases = np.exp(-1j * t * self.energies)
        return (self.vectors * phases) @ self.vectors.conj().T

    def unitary(self, t):
        return LabeledOperator(self.labels, self.unitary_matrix(t), self.dim)

    def conjugate(self, f, t):
        """e^{−ith} f e^{ith}, the propagator acting on its own slots of ``f``."""
        if t == 0:
            return f
        return conjugate(f, self.unitary_matrix(t), self.labels)


def propagator(h, t):
    return Propagator.for_operator(h).unitary(t)


# ---------------------------------------------------------
# Serialization
# ---------------------------------------------------------

def to_payload(op):
    return {
        "labels": list(op.labels),
        "dim": op.dim,
        "matrix": [[float(z.real), float(z.imag)] for z in op.matrix.ravel()],
    }


def from_payload(payload):
    dim = int(payload["dim"])
    labels = tuple(payload.get("labels", ()))
    side = dim ** len(labels)
    entries = payload["matrix"]
    if len(entries) != side * side:
        raise ValueError(f"expected {side * side} matrix entries, got {len(entries)}")
    values = np.array([complex(re, im) for re, im in entries]).reshape(side, side)
    return LabeledOperator.on(labels, values, dim)


def matrix_from_pairs(rows):
    """Nested [[re, im], ...] rows to a complex array."""
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def matrix_to_pairs(matrix):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(matrix)]


# ---------------------------------------------------------
# Random operators for probes and fixtures
# ---------------------------------------------------------

def random_hermitian(rng, labels, dim, scale=1.0):
    side = dim ** len(labels)
    a = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
    h = 0.5 * (a + a.conj().T)
    h = h / max(np.linalg.norm(h, 2), 1e-300)
    return LabeledOperator(tuple(sorted(labels)), scale * h, dim)


def random_density(rng, labels, dim, trace=1.0):
    side = dim ** len(labels)
    a = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
    rho = a @ a.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return LabeledOperator(tuple(sorted(labels)), trace * rho / np.trace(rho).real, dim)


def random_unitary(rng, labels, dim):
    side = dim ** len(labels)
    a = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
    q, r = np.linalg.qr(a)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return LabeledOperator(tuple(sorted(labels)), q, dim)


def check_dense_size(dim, n):
    side = dim ** n
    if side > settings.WORKBENCH["MAX_DENSE_SIDE"]:
        raise ValueError(f"dense operators of side {side} exceed the configured ceiling")
    return side
