"""Exterior algebra on a patch of complex dimension two.

The coframe is ``dz1, dzbar1, dz2, dzbar2`` with that fixed total order.  Every
sign produced here is the parity of the permutation that sorts a wedge word
into this order.

Coefficients are whatever numeric type the caller supplies: Python complex
numbers, :class:`fractions.Fraction`, sympy numbers, or numpy arrays.  Array
coefficients turn one form into a whole field of forms sampled on a grid;
all operations are elementwise, so the same code serves a single point and a
full grid sweep.
"""
from __future__ import annotations

from enum import IntEnum
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionError, ValidationError

__all__ = [
    "Basis",
    "TOP",
    "ComplexForm",
    "MatrixForm",
    "wedge",
    "mat_wedge",
    "trace",
    "top_coefficient",
    "sort_sign",
]

MAX_DEGREE = 4


class Basis(IntEnum):
    DZ1 = 0
    DZBAR1 = 1
    DZ2 = 2
    DZBAR2 = 3

    @property
    def label(self) -> str:
        return ("dz1", "dzbar1", "dz2", "dzbar2")[self]


TOP = (Basis.DZ1, Basis.DZBAR1, Basis.DZ2, Basis.DZBAR2)


def sort_sign(word: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Return ``(sign, sorted_word)`` for a wedge word; sign is 0 on a repeat."""
    word = tuple(int(w) for w in word)
    if len(set(word)) != len(word):
        return 0, ()
    inversions = sum(
        1 for a in range(len(word)) for b in range(a + 1, len(word)) if word[a] > word[b]
    )
    return (-1 if inversions % 2 else 1), tuple(sorted(word))


def _is_exact_zero(value) -> bool:
    if isinstance(value, np.ndarray):
        return False
    try:
        return value == 0
    except (TypeError, ValueError):
        return False


class ComplexForm:
    """A homogeneous differential form with constant (or gridded) coefficients.

    ``coefficients`` maps basis words to numbers.  Words need not be sorted on
    input; they are normalised with the appropriate sign, repeated indices are
    dropped and equal words are summed.
    """

    __slots__ = ("_degree", "_coeffs")

    def __init__(self, degree: int, coefficients: Mapping[tuple, object] | None = None):
        degree = int(degree)
        if degree < 0:
            raise ValidationError(f"negative form degree {degree}")
        coeffs: dict[tuple[int, ...], object] = {}
        if degree <= MAX_DEGREE and coefficients:
            for word, value in coefficients.items():
                if len(word) != degree:
                    raise ValidationError(
                        f"word {word!r} has length {len(word)}, expected {degree}"
                    )
                sign, key = sort_sign(word)
                if sign == 0:
                    continue
                value = value if sign > 0 else -value
                coeffs[key] = coeffs[key] + value if key in coeffs else value
            coeffs = {k: v for k, v in coeffs.items() if not _is_exact_zero(v)}
        # degree overflow is represented as the top-degree zero form
        self._degree = min(degree, MAX_DEGREE)
        self._coeffs = dict(sorted(coeffs.items()))

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, degree: int) -> ComplexForm:
        return cls(degree)

    @classmethod
    def scalar(cls, value) -> ComplexForm:
        return cls(0, {(): value})

    @classmethod
    def basis(cls, *labels, coefficient=1) -> ComplexForm:
        return cls(len(labels), {tuple(int(b) for b in labels): coefficient})

    # accessors ----------------------------------------------------------

    @property
    def degree(self) -> int:
        return self._degree

    @property
    def coefficients(self) -> dict[tuple[int, ...], object]:
        return dict(self._coeffs)

    @property
    def is_zero(self) -> bool:
        return not self._coeffs

    def __getitem__(self, word) -> object:
        sign, key = sort_sign(word)
        if sign == 0 or len(key) != self._degree or key not in self._coeffs:
            return 0
        value = self._coeffs[key]
        return value if sign > 0 else -value

    def items(self):
        return self._coeffs.items()

    # algebra ------------------------------------------------------------

    def _check_degree(self, other: ComplexForm) -> None:
        if other.degree != self.degree and not (self.is_zero or other.is_zero):
            raise DimensionError(
                f"cannot add forms of degree {self.degree} and {other.degree}"
            )

    def __add__(self, other):
        if not isinstance(other, ComplexForm):
            return NotImplemented
        self._check_degree(other)
        degree = self.degree if not self.is_zero else other.degree
        merged = dict(self._coeffs)
        for key, value in other._coeffs.items():
            merged[key] = merged[key] + value if key in merged else value
        return ComplexForm(degree, merged)

    def __neg__(self):
        return ComplexForm(self.degree, {k: -v for k, v in self._coeffs.items()})

    def __sub__(self, other):
        if not isinstance(other, ComplexForm):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, ComplexForm):
            return NotImplemented
        return ComplexForm(self.degree, {k: v * scalar for k, v in self._coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def conjugate(self) -> ComplexForm:
        """Conjugate the coefficients (the basis words are left alone)."""
        return ComplexForm(self.degree, {k: v.conjugate() for k, v in self._coeffs.items()})

    def allclose(self, other: ComplexForm, atol: float = 1e-12) -> bool:
        keys = set(self._coeffs) | set(other._coeffs)
        return all(np.all(np.abs(self[k] - other[k]) <= atol) for k in keys)

    def __eq__(self, other):
        if not isinstance(other, ComplexForm):
            return NotImplemented
        if self.degree != other.degree and not (self.is_zero and other.is_zero):
            return False
        keys = set(self._coeffs) | set(other._coeffs)
        return all(bool(np.all(self[k] == other[k])) for k in keys)

    __hash__ = None

    def __repr__(self):
        if self.is_zero:
            return f"ComplexForm({self.degree}, 0)"
        terms = []
        for key, value in self._coeffs.items():
            word = "^".join(Basis(k).label for k in key) or "1"
            terms.append(f"{value!r}*{word}")
        return f"ComplexForm({self.degree}, " + " + ".join(terms) + ")"


def wedge(a: ComplexForm, b: ComplexForm) -> ComplexForm:
    degree = a.degree + b.degree
    if degree > MAX_DEGREE:
        return ComplexForm(MAX_DEGREE)
    out: dict[tuple[int, ...], object] = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            sign, key = sort_sign(ka + kb)
            if sign == 0:
                continue
            term = va * vb if sign > 0 else -(va * vb)
            out[key] = out[key] + term if key in out else term
    return ComplexForm(degree, out)


def top_coefficient(a: ComplexForm):
    """Coefficient of dz1^dzbar1^dz2^dzbar2; 0 for any other degree."""
    if a.degree != MAX_DEGREE:
        return 0
    return a[tuple(TOP)]


class MatrixForm:
    """Square matrix of forms sharing one degree."""

    __slots__ = ("_entries", "_degree")

    def __init__(self, entries):
        rows = [list(row) for row in entries]
        r = len(rows)
        if r == 0 or any(len(row) != r for row in rows):
            raise DimensionError("MatrixForm needs a non-empty square array of forms")
        nonzero = {f.degree for row in rows for f in row if not f.is_zero}
        if len(nonzero) > 1:
            raise DimensionError(f"mixed degrees in MatrixForm: {sorted(nonzero)}")
        degree = nonzero.pop() if nonzero else max(f.degree for row in rows for f in row)
        self._degree = degree
        self._entries = tuple(
            tuple(f if not f.is_zero else ComplexForm(degree) for f in row) for row in rows
        )

    @classmethod
    def zeros(cls, rank: int, degree: int) -> MatrixForm:
        return cls([[ComplexForm(degree) for _ in range(rank)] for _ in range(rank)])

    @classmethod
    def diagonal(cls, forms) -> MatrixForm:
        forms = list(forms)
        degree = max(f.degree for f in forms)
        r = len(forms)
        return cls([[forms[i] if i == j else ComplexForm(degree) for j in range(r)]
                    for i in range(r)])

    @property
    def rank(self) -> int:
        return len(self._entries)

    @property
    def degree(self) -> int:
        return self._degree

    def __getitem__(self, ij) -> ComplexForm:
        i, j = ij
        return self._entries[i][j]

    def __add__(self, other):
        if not isinstance(other, MatrixForm):
            return NotImplemented
        if other.rank != self.rank:
            raise DimensionError(f"rank {self.rank} + rank {other.rank}")
        r = self.rank
        return MatrixForm([[self[i, j] + other[i, j] for j in range(r)] for i in range(r)])

    def __mul__(self, scalar):
        r = self.rank
        return MatrixForm([[self[i, j] * scalar for j in range(r)] for i in range(r)])

    __rmul__ = __mul__

    def __xor__(self, other):
        return mat_wedge(self, other)

    def __eq__(self, other):
        if not isinstance(other, MatrixForm):
            return NotImplemented
        return self.rank == other.rank and all(
            self[i, j] == other[i, j] for i in range(self.rank) for j in range(self.rank)
        )

    __hash__ = None

    def __repr__(self):
        return f"MatrixForm(rank={self.rank}, degree={self.degree})"


def mat_wedge(a: MatrixForm, b: MatrixForm) -> MatrixForm:
    """``(A ^ B)_ij = sum_k A_ik ^ B_kj``."""
    if a.rank != b.rank:
        raise DimensionError(f"matWedge of rank {a.rank} and rank {b.rank}")
    r = a.rank
    degree = min(a.degree + b.degree, MAX_DEGREE)
    out = []
    for i in range(r):
        row = []
        for j in range(r):
            acc = ComplexForm(degree)
            for k in range(r):
                acc = acc + wedge(a[i, k], b[k, j])
            row.append(acc)
        out.append(row)
    return MatrixForm(out)


def trace(a: MatrixForm) -> ComplexForm:
    acc = ComplexForm(a.degree)
    for i in range(a.rank):
        acc = acc + a[i, i]
    return acc
