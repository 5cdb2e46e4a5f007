"""
Symbolic kinetic cluster expansions.

An ``Expansion`` is a linear combination of ordered products of scattering
cumulant symbols ``Factor(anchor, extras)``. Products are written left to
right and act right to left. Factors on disjoint labels commute, so products
are stored in a normal form of that partial commutation.
"""

import itertools
import logging
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import factorial, prod

from django.conf import settings

from tensorcore.exceptions import WorkbenchError

from .combinatorics import compositions, dissections

logger = logging.getLogger(__name__)


class OrderNotSupported(WorkbenchError):
    """Generated evolution operators requested beyond the configured order."""


@dataclass(frozen=True, order=True)
class Factor:
    """Scattering cumulant of order 1 + len(extras) anchored at a cluster or a single label."""
    anchor: tuple
    extras: tuple = ()

    @property
    def order(self):
        return 1 + len(self.extras)

    @property
    def support(self):
        return frozenset(self.anchor) | frozenset(self.extras)

    def __str__(self):
        if len(self.anchor) == 1:
            head = str(self.anchor[0])
        else:
            head = "{" + ",".join(str(x) for x in self.anchor) + "}"
        tail = "".join("," + str(x) for x in self.extras)
        return f"A{self.order}({head}{tail})"


def normal_form(factors):
    """Lexicographically least rewriting of a product under commutation of disjoint factors."""
    remaining = list(factors)
    result = []
    while remaining:
        candidates = []
        for k, f in enumerate(remaining):
            if all(not (f.support & g.support) for g in remaining[:k]):
                candidates.append((f, k))
        f, k = min(candidates)
        result.append(f)
        del remaining[k]
    return tuple(result)


class Expansion:

    def __init__(self, terms=None):
        self.terms = {}
        for factors, coefficient in (terms or {}).items():
            self.add(factors, coefficient)

    @classmethod
    def single(cls, factor):
        return cls({(factor,): Fraction(1)})

    def add(self, factors, coefficient):
        key = normal_form(factors)
        value = self.terms.get(key, Fraction(0)) + Fraction(coefficient)
        if value:
            self.terms[key] = value
        else:
            self.terms.pop(key, None)

    def __iadd__(self, other):
        for factors, coefficient in other.terms.items():
            self.add(factors, coefficient)
        return self

    def __isub__(self, other):
        for factors, coefficient in other.terms.items():
            self.add(factors, -coefficient)
        return self

    def scaled(self, value):
        return Expansion({k: v * value for k, v in self.terms.items()})

    def compose(self, other):
        """self ∘ other: ``other`` acts first."""
        result = Expansion()
        for (left, a), (right, b) in itertools.product(self.terms.items(), other.terms.items()):
            result.add(left + right, a * b)
        return result

    def __eq__(self, other):
        return isinstance(other, Expansion) and self.terms == other.terms

    def __len__(self):
        return len(self.terms)

    def dump(self):
        """(coefficient, block structure) pairs in a stable order."""
        rows = [
            (str(coefficient), [str(f) for f in factors])
            for factors, coefficient in self.terms.items()
        ]
        return sorted(rows, key=lambda row: (len(row[1]), row[1], row[0]))

    def apply(self, action, operand):
        """
        Evaluate on an operand; ``action(factor, operand)`` applies one symbol.

        Shared right-hand factor strings are evaluated once.
        """
        memo = {(): operand}

        def suffix(factors):
            if factors not in memo:
                memo[factors] = action(factors[0], suffix(factors[1:]))
            return memo[factors]

        total = None
        for factors, coefficient in sorted(self.terms.items()):
            term = suffix(factors) * complex(coefficient)
            total = term if total is None else total + term
        return total if total is not None else operand * 0.0


def _check_order(n):
    if n < 0 or n > settings.WORKBENCH["MAX_N_MAX"]:
        raise OrderNotSupported(f"order not supported: n = {n}")


def _label_range(s, start, count):
    return tuple(range(s + start, s + start + count))


# ---------------------------------------------------------
# Kinetic cluster expansion (triangular recurrence)
# ---------------------------------------------------------

def dissection_sum(z, available, ordered):
    """
    Σ_D Σ_i ∏ (1/|X|!) A(i_k; X_k) over dissections D of ``z`` into at most
    ``available`` blocks.

    ``ordered`` assigns blocks to increasing indices i₁ < i₂ < ...; otherwise
    indices are distinct and the sum carries 1/|D|!.
    """
    result = Expansion()
    for d in dissections(z, available):
        weight = Fraction(1, prod(factorial(len(block)) for block in d.blocks))
        if ordered:
            choices = itertools.combinations(range(1, available + 1), len(d))
        else:
            choices = itertools.permutations(range(1, available + 1), len(d))
            weight /= factorial(len(d))
        for indices in choices:
            factors = tuple(Factor((i,), block) for i, block in zip(indices, d.blocks))
            result.add(factors, weight)
    return result


_cache = {}
_lock = threading.Lock()


def recurrence_expansion(s, n):
    """𝔊_{1+n}(t, {Y}, s+1, ..., s+n) solved from the kinetic cluster expansion."""
    _check_order(n)
    key = ("recurrence", s, n)
    if key in _cache:
        return _cache[key]
    y = tuple(range(1, s + 1))
    result = Expansion.single(Factor(y, _label_range(s, 1, n)))
    for n1 in range(1, n + 1):
        available = s + n - n1
        z = _label_range(s, available - s + 1, n1)
        inner = dissection_sum(z, available, ordered=True)
        weight = Fraction(factorial(n), factorial(n - n1))
        result -= recurrence_expansion(s, n - n1).compose(inner).scaled(weight)
    with _lock:
        _cache.setdefault(key, result)
    logger.debug("recurrence expansion s=%d n=%d has %d terms", s, n, len(result))
    return _cache[key]


def closed_form_expansion(s, n):
    """The explicit alternating sum over compositions of n for 𝔊_{1+n}."""
    _check_order(n)
    key = ("closed", s, n)
    if key in _cache:
        return _cache[key]
    y = tuple(range(1, s + 1))
    result = Expansion()
    for composition in compositions(n, n):
        rest = n - composition.total
        weight = Fraction(factorial(n) * composition.sign, factorial(rest))
        term = Expansion.single(Factor(y, _label_range(s, 1, rest)))
        # Z_1 holds the top n_1 labels; Z_k is written leftmost.
        upper = s + n
        blocks = []
        for part in composition.parts:
            available = upper - part
            blocks.append(dissection_sum(tuple(range(available + 1, upper + 1)), available, ordered=False))
            upper = available
        for block in reversed(blocks):
            term = term.compose(block)
        result += term.scaled(weight)
    with _lock:
        _cache.setdefault(key, result)
    return _cache[key]


def scattering_expansion(s, n, generated=None):
    """
    Right-hand side of the kinetic cluster expansion of Ă_{1+n}(t, {Y}, ...):
    𝔊 of each lower order composed with the dissection sums. ``generated``
    chooses how 𝔊 is expanded (recurrence by default).
    """
    generated = generated or recurrence_expansion
    _check_order(n)
    result = Expansion()
    for n1 in range(0, n + 1):
        available = s + n - n1
        z = _label_range(s, available - s + 1, n1)
        inner = dissection_sum(z, available, ordered=True) if n1 else Expansion({(): 1})
        weight = Fraction(factorial(n), factorial(n - n1))
        result += generated(s, n - n1).compose(inner).scaled(weight)
    return result


# ---------------------------------------------------------
# Reference expansions as printed for orders one to three
# ---------------------------------------------------------

def printed_expansion(s, n):
    y = tuple(range(1, s + 1))
    a = Factor
    result = Expansion.single(a(y, _label_range(s, 1, n)))
    if n == 0:
        return result
    if n == 1:
        for i in range(1, s + 1):
            result.add((a(y), a((i,), (s + 1,))), -1)
        return result
    if n == 2:
        for i1 in range(1, s + 2):
            result.add((a(y, (s + 1,)), a((i1,), (s + 2,))), -2)
        for i1 in range(1, s + 1):
            result.add((a(y), a((i1,), (s + 1, s + 2))), -1)
            for i2 in range(1, s + 2):
                result.add((a(y), a((i1,), (s + 1,)), a((i2,), (s + 2,))), 2)
        for i1, i2 in itertools.combinations(range(1, s + 1), 2):
            result.add((a(y), a((i1,), (s + 1,)), a((i2,), (s + 2,))), -2)
        return result
    raise OrderNotSupported(f"order not supported: no printed reference for n = {n}")
