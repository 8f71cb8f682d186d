import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chernfield.errors import DimensionError, ValidationError
from chernfield.formcalc import (
    TOP,
    Basis,
    ComplexForm,
    MatrixForm,
    mat_wedge,
    sort_sign,
    top_coefficient,
    trace,
    wedge,
)

Z1, ZB1, Z2, ZB2 = Basis.DZ1, Basis.DZBAR1, Basis.DZ2, Basis.DZBAR2


def words(degree):
    return list(itertools.combinations(range(4), degree))


coeff = st.integers(-5, 5).map(Fraction)


@st.composite
def forms(draw, degree=None):
    p = draw(st.integers(0, 4)) if degree is None else degree
    return ComplexForm(p, {w: draw(coeff) for w in words(p)})


def test_repeated_index_vanishes():
    assert wedge(ComplexForm.basis(Z1), ComplexForm.basis(Z1)).is_zero


def test_antisymmetry_of_one_forms():
    a = wedge(ComplexForm.basis(Z1), ComplexForm.basis(ZB1))
    b = wedge(ComplexForm.basis(ZB1), ComplexForm.basis(Z1))
    assert a[(Z1, ZB1)] == 1
    assert b[(Z1, ZB1)] == -1
    assert b[(ZB1, Z1)] == 1


def test_scaled_wedge():
    a = ComplexForm.basis(Z1, coefficient=2)
    b = ComplexForm.basis(Z2, ZB2, coefficient=3)
    assert (a ^ b).coefficients == {(0, 2, 3): 6}


def test_top_coefficient_even_reordering():
    f = ComplexForm.basis(Z2) ^ ComplexForm.basis(ZB2) ^ ComplexForm.basis(Z1) ^ ComplexForm.basis(ZB1)
    assert top_coefficient(f) == 1
    assert top_coefficient(ComplexForm.basis(*TOP, coefficient=5)) == 5
    assert top_coefficient(ComplexForm.basis(Z1, ZB2)) == 0


@pytest.mark.parametrize("perm", list(itertools.permutations(range(4))))
def test_top_parity_matches_permutation_sign(perm):
    f = ComplexForm.scalar(1)
    for k in perm:
        f = f ^ ComplexForm.basis(k)
    inv = sum(1 for a in range(4) for b in range(a + 1, 4) if perm[a] > perm[b])
    assert top_coefficient(f) == (-1) ** inv


def test_sort_sign():
    assert sort_sign((1, 0)) == (-1, (0, 1))
    assert sort_sign((2, 0, 1)) == (1, (0, 1, 2))
    assert sort_sign((1, 1))[0] == 0


def test_degree_overflow_is_zero():
    f = ComplexForm.basis(*TOP) ^ ComplexForm.basis(Z1)
    assert f.is_zero and f.degree == 4


def test_mixing_degrees_in_sum_raises():
    with pytest.raises(ValidationError):
        ComplexForm.basis(Z1) + ComplexForm.basis(Z1, Z2)


def test_word_length_mismatch_raises():
    with pytest.raises(ValidationError):
        ComplexForm(2, {(0,): 1})


def test_array_coefficients_act_pointwise():
    x = np.array([1.0, 2.0, 3.0])
    f = ComplexForm.basis(Z1, coefficient=x) ^ ComplexForm.basis(ZB1, coefficient=x)
    np.testing.assert_allclose(f[(Z1, ZB1)], x**2)


def test_conjugate_is_involution():
    f = ComplexForm(2, {(0, 1): 1 + 2j, (2, 3): -1j})
    assert f.conjugate().conjugate() == f
    assert f.conjugate()[(0, 1)] == 1 - 2j


@settings(max_examples=200, deadline=None)
@given(forms(), forms(), forms())
def test_wedge_is_associative(a, b, c):
    assert ((a ^ b) ^ c) == (a ^ (b ^ c))


@settings(max_examples=200, deadline=None)
@given(forms(), forms())
def test_graded_commutation(a, b):
    assert (a ^ b) == (b ^ a) * (-1) ** (a.degree * b.degree)


@settings(max_examples=100, deadline=None)
@given(forms(1), forms(1), forms(2))
def test_wedge_is_bilinear(a, b, c):
    assert ((a + b) ^ c) == (a ^ c) + (b ^ c)


@settings(max_examples=100, deadline=None)
@given(forms(1))
def test_odd_form_squares_to_zero(a):
    assert (a ^ a).is_zero


# matrix forms ----------------------------------------------------------

def test_rank_one_matrix_wedge_is_scalar_wedge():
    f, g = ComplexForm.basis(Z1), ComplexForm.basis(ZB2)
    assert mat_wedge(MatrixForm([[f]]), MatrixForm([[g]]))[0, 0] == f ^ g


def test_zero_matrix_wedge():
    b = MatrixForm([[ComplexForm.basis(Z1), ComplexForm.basis(Z2)],
                    [ComplexForm.basis(ZB1), ComplexForm.basis(ZB2)]])
    out = mat_wedge(MatrixForm.zeros(2, 1), b)
    assert all(out[i, j].is_zero for i in range(2) for j in range(2))


def test_diagonal_matrix_wedge():
    w1, w2 = ComplexForm.basis(Z1), ComplexForm.basis(ZB1, coefficient=2)
    e1, e2 = ComplexForm.basis(Z2), ComplexForm.basis(ZB2, coefficient=3)
    out = mat_wedge(MatrixForm.diagonal([w1, w2]), MatrixForm.diagonal([e1, e2]))
    assert out[0, 0] == w1 ^ e1
    assert out[1, 1] == w2 ^ e2
    assert out[0, 1].is_zero and out[1, 0].is_zero


def test_rank_mismatch_raises():
    with pytest.raises(DimensionError):
        mat_wedge(MatrixForm.zeros(1, 1), MatrixForm.zeros(2, 1))


def test_trace_examples():
    one = ComplexForm.scalar(1)
    zero = ComplexForm.zero(0)
    assert trace(MatrixForm([[one, zero, zero], [zero, one, zero], [zero, zero, one]]))[()] == 3
    w = ComplexForm.basis(Z1, ZB2)
    assert trace(MatrixForm.diagonal([w, -w])).is_zero
    z2 = ComplexForm.zero(2)
    assert trace(MatrixForm([[z2, w], [w, z2]])).is_zero


@settings(max_examples=50, deadline=None)
@given(st.lists(forms(2), min_size=4, max_size=4), st.lists(forms(2), min_size=4, max_size=4))
def test_trace_of_even_wedge_is_cyclic(xs, ys):
    a = MatrixForm([xs[:2], xs[2:]])
    b = MatrixForm([ys[:2], ys[2:]])
    assert trace(mat_wedge(a, b)) == trace(mat_wedge(b, a))
