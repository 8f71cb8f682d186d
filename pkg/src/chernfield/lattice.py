"""Numerical-class calculators on a surface.

Classes live in Num (Pic modulo numerical equivalence) with the intersection
pairing as a symmetric integer form of hyperbolic signature.  Arithmetic on
classes is exact (``fractions.Fraction``); only norms and distances go to
floating point.

Two inputs are taken at face value rather than derived:

* ``delta`` in the restriction bound and the semistability inequality may be
  a scalar or a class.  :func:`surface_discriminant` computes the usual
  ``2 r c2 - (r - 1) c1^2`` on request, but it is never substituted silently.
* ``R`` in the restriction bound is a user-supplied positive constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DimensionError, NotInPositiveCone, ValidationError

__all__ = [
    "IntersectionForm",
    "LatticeClass",
    "BoundQuery",
    "BoundResult",
    "norm",
    "hyperbolic_distance",
    "in_k_plus",
    "xi_invariant",
    "semistable_discriminant_inequality",
    "restriction_bound_satisfied",
    "surface_discriminant",
]

CLAMP_TOLERANCE = 1e-12


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


@dataclass(frozen=True)
class LatticeClass:
    coords: tuple

    def __init__(self, coords: Sequence):
        object.__setattr__(self, "coords", tuple(_frac(c) for c in coords))

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __add__(self, other):
        other = other if isinstance(other, LatticeClass) else LatticeClass(other)
        _same_length(self, other)
        return LatticeClass(a + b for a, b in zip(self.coords, other.coords))

    def __sub__(self, other):
        other = other if isinstance(other, LatticeClass) else LatticeClass(other)
        _same_length(self, other)
        return LatticeClass(a - b for a, b in zip(self.coords, other.coords))

    def __neg__(self):
        return LatticeClass(-a for a in self.coords)

    def __mul__(self, scalar):
        s = _frac(scalar)
        return LatticeClass(s * a for a in self.coords)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        s = _frac(scalar)
        if s == 0:
            raise ZeroDivisionError("division of a class by zero")
        return LatticeClass(a / s for a in self.coords)

    def is_zero(self) -> bool:
        return all(a == 0 for a in self.coords)

    def __repr__(self):
        return "LatticeClass(" + ", ".join(str(a) for a in self.coords) + ")"


def _same_length(a, b):
    if len(a) != len(b):
        raise DimensionError(f"classes of length {len(a)} and {len(b)}")


def _as_class(u) -> LatticeClass:
    return u if isinstance(u, LatticeClass) else LatticeClass(u)


class IntersectionForm:
    """Symmetric integer matrix with exactly one positive eigenvalue (Hodge index)."""

    def __init__(self, matrix):
        q = [[int(v) if float(v) == int(v) else None for v in row] for row in matrix]
        n = len(q)
        if n == 0 or any(len(row) != n for row in q):
            raise DimensionError("intersection form must be a non-empty square matrix")
        if any(v is None for row in q for v in row):
            raise ValidationError("intersection form entries must be integers")
        if any(q[i][j] != q[j][i] for i in range(n) for j in range(n)):
            raise ValidationError("intersection form must be symmetric")
        eig = np.linalg.eigvalsh(np.array(q, dtype=float))
        scale = max(1.0, float(np.max(np.abs(eig))))
        positive = int(np.sum(eig > 1e-9 * scale))
        if positive != 1:
            raise ValidationError(
                f"intersection form has {positive} positive eigenvalues; Hodge index requires exactly one"
            )
        self.matrix = tuple(tuple(row) for row in q)
        self.dimension = n

    @classmethod
    def diagonal(cls, *entries) -> IntersectionForm:
        n = len(entries)
        return cls([[entries[i] if i == j else 0 for j in range(n)] for i in range(n)])

    def pair(self, u, v) -> Fraction:
        u, v = _as_class(u), _as_class(v)
        if len(u) != self.dimension or len(v) != self.dimension:
            raise DimensionError(
                f"class length {len(u)}/{len(v)} does not match form dimension {self.dimension}"
            )
        q = self.matrix
        return sum(
            (u.coords[i] * q[i][j] * v.coords[j]
             for i in range(self.dimension) for j in range(self.dimension) if q[i][j]),
            Fraction(0),
        )

    def square(self, u) -> Fraction:
        return self.pair(u, u)

    def __repr__(self):
        return f"IntersectionForm({[list(r) for r in self.matrix]})"


def norm(u, q: IntersectionForm) -> float:
    """``|u| = |u.u|^(1/2)``."""
    return math.sqrt(abs(float(q.square(u))))


def hyperbolic_distance(h1, h2, q: IntersectionForm) -> float:
    """``arccosh(H.H' / (|H| |H'|))`` for two classes in the positive cone."""
    h1, h2 = _as_class(h1), _as_class(h2)
    s1, s2, p = q.square(h1), q.square(h2), q.pair(h1, h2)
    if not (s1 > 0 and s2 > 0 and p > 0):
        raise NotInPositiveCone(
            f"need H^2 > 0, H'^2 > 0 and H.H' > 0; got {s1}, {s2}, {p}"
        )
    arg = float(p) / math.sqrt(float(s1) * float(s2))
    if arg < 1.0:
        if 1.0 - arg > CLAMP_TOLERANCE:
            raise NotInPositiveCone(f"normalised pairing {arg!r} < 1 violates reverse Cauchy-Schwarz")
        arg = 1.0
    return math.acosh(arg)


def in_k_plus(d, q: IntersectionForm, ample_samples) -> bool:
    """``D^2 > 0`` and ``D.H > 0`` for every supplied ample class ``H``."""
    samples = [_as_class(h) for h in ample_samples]
    if not samples:
        raise ValidationError("in_k_plus needs at least one ample class")
    for h in samples:
        if q.square(h) <= 0:
            raise ValidationError(f"ample sample {h} has non-positive square")
    d = _as_class(d)
    return q.square(d) > 0 and all(q.pair(d, h) > 0 for h in samples)


def xi_invariant(c1_g2, rk_g2, c1_g, rk_g) -> LatticeClass:
    """``c1(G') / rk(G') - c1(G) / rk(G)``."""
    if rk_g2 == 0 or rk_g == 0:
        raise ValidationError("xi is defined only for sheaves of nonzero rank")
    return _as_class(c1_g2) / rk_g2 - _as_class(c1_g) / rk_g


def semistable_discriminant_inequality(delta, h=None, q: IntersectionForm | None = None,
                                       n: int = 2) -> bool:
    """``delta . H^(n-1) >= 0``.

    A scalar ``delta`` is taken to be the already-paired number.  A class
    ``delta`` is paired with ``H`` using ``q``; that only makes sense on a
    surface, so ``n`` must then be 2.
    """
    if isinstance(delta, (int, float, Fraction)):
        return _frac(delta) >= 0
    if h is None or q is None:
        raise ValidationError("a class-valued delta needs the polarisation H and the form Q")
    if n != 2:
        raise ValidationError("class-valued delta is supported on surfaces only (n = 2)")
    return q.pair(delta, h) >= 0


def surface_discriminant(rank: int, c1, c2, q: IntersectionForm) -> Fraction:
    """``2 r c2 - (r - 1) c1^2``; a helper only, never applied implicitly."""
    return 2 * rank * _frac(c2) - (rank - 1) * q.square(c1)


@dataclass(frozen=True)
class BoundQuery:
    r: int
    R: Fraction
    delta: Fraction
    n: int

    def __init__(self, r, R, delta, n):
        r, n = int(r), int(n)
        R, delta = _frac(R), _frac(delta)
        if r < 2:
            raise ValidationError("rank r must be at least 2")
        if R <= 0:
            raise ValidationError("R must be positive")
        if delta < 0:
            raise ValidationError("delta must be non-negative")
        if n < 1:
            raise ValidationError("n must be a positive integer")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "n", n)

    @property
    def threshold(self) -> Fraction:
        return self.R / self.r * self.delta + 1


@dataclass(frozen=True)
class BoundResult:
    satisfied: bool
    minimal_n: int
    threshold: Fraction

    def __str__(self):
        return f"{'satisfied' if self.satisfied else 'not satisfied'}, minimalN={self.minimal_n}"


def restriction_bound_satisfied(query: BoundQuery) -> BoundResult:
    """Check ``2n >= (R / r) delta + 1`` and the least ``n`` for which it holds."""
    t = query.threshold
    minimal = max(1, math.ceil(t / 2))
    return BoundResult(2 * query.n >= t, minimal, t)
