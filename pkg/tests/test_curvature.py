import numpy as np
import pytest

from chernfield.curvature import (
    chern_densities,
    curvature_at,
    curvature_form,
    density_selector,
    integrate_density,
)
from chernfield.errors import IllConditionedError, IntegrationAborted, ValidationError
from chernfield.formcalc import Basis, top_coefficient, wedge
from chernfield.metricfield import HermitianMetricField, Patch

from conftest import BOX, rank1

PTS = np.array([[0.0, 0.0, 0.0, 0.0], [0.2, -0.1, 0.3, 0.25], [-0.35, 0.4, -0.2, -0.3]])
Z1, ZB1, Z2, ZB2 = Basis


def ddbar_log_fubini(p):
    """d_a dbar_b log(1 + |z|^2) in closed form."""
    z = np.array([p[0] + 1j * p[1], p[2] + 1j * p[3]])
    s = float(np.sum(np.abs(z) ** 2))
    return np.eye(2) / (1 + s) - np.outer(np.conj(z), z) / (1 + s) ** 2


def test_constant_metrics_are_flat():
    for m in (HermitianMetricField.identity(2),
              HermitianMetricField([["2", None], ["complex(0.3, 0.4)", "3"]])):
        t = curvature_at(m, PTS)
        assert np.max(np.abs(t.raised)) == 0
        assert np.max(np.abs(t.lowered)) == 0


def test_gaussian_line_bundle():
    t = curvature_at(rank1("exp(x1^2 + y1^2)"), (0.0, 0, 0, 0))
    assert t.lowered[0, 0, 0, 0] == pytest.approx(-1, abs=1e-8)
    omega = curvature_form(t)
    assert omega[0, 0][(Z1, ZB1)] == pytest.approx(-1, abs=1e-8)
    for word in ((Z1, ZB2), (Z2, ZB1), (Z2, ZB2)):
        assert abs(omega[0, 0][word]) < 1e-9


@pytest.mark.parametrize(
    "expr, oracle",
    [
        ("1 + x1^2 + y1^2", lambda p: np.array([[1 / (1 + p[0] ** 2 + p[1] ** 2) ** 2, 0], [0, 0]])),
        ("exp(x1*x2 + y1*y2)", lambda p: np.array([[0, 0.5], [0.5, 0]])),
        ("1 + x1^2 + y1^2 + x2^2 + y2^2", ddbar_log_fubini),
    ],
)
def test_rank_one_log_reduction(expr, oracle):
    t = curvature_at(rank1(expr), PTS)
    for n, p in enumerate(PTS):
        np.testing.assert_allclose(t.raised[n, 0, 0], -oracle(p), atol=1e-6)


def test_block_diagonal_splits():
    h1, h2 = "exp(x1^2 + y1^2 + 0.3*x2)", "1 + x2^2 + y2^2 + 0.2*x1*x2"
    t = curvature_at(HermitianMetricField.block_diagonal(rank1(h1), rank1(h2)), PTS)
    t1, t2 = curvature_at(rank1(h1), PTS), curvature_at(rank1(h2), PTS)
    np.testing.assert_allclose(t.raised[:, 0, 0], t1.raised[:, 0, 0], atol=1e-12)
    np.testing.assert_allclose(t.raised[:, 1, 1], t2.raised[:, 0, 0], atol=1e-12)
    assert np.max(np.abs(t.raised[:, 0, 1])) == 0


def test_lowering_and_hermitian_symmetry():
    m = HermitianMetricField([["1 + 0.2*(x1^2 + y2^2)", None],
                              ["0.1*complex(x1*y2, x2 - y1)", "2 + 0.3*x1*x2"]])
    t = curvature_at(m, PTS)
    assert t.lowering_defect() < 1e-12
    assert np.max(t.hermitian_defect()) < 1e-7


def test_mixed_flat_form_pure_terms_come_from_first_derivatives():
    # -d dbar h is purely mixed; pure terms are |d h|^2 / h^2 from the quadratic part
    origin = curvature_form(curvature_at(rank1("1 + 0.1*x1*x2"), PTS[0]))[0, 0]
    assert abs(origin[(Z1, ZB1)]) < 1e-12 and abs(origin[(Z2, ZB2)]) < 1e-12
    assert origin[(Z1, ZB2)] == pytest.approx(-0.025, abs=1e-9)
    x1, _, x2, _ = PTS[1]
    h = 1 + 0.1 * x1 * x2
    f = curvature_form(curvature_at(rank1("1 + 0.1*x1*x2"), PTS[1]))[0, 0]
    assert f[(Z1, ZB1)] == pytest.approx((0.05 * x2) ** 2 / h**2, abs=1e-10)
    assert f[(Z2, ZB2)] == pytest.approx((0.05 * x1) ** 2 / h**2, abs=1e-10)


def test_ill_conditioned_metric():
    with pytest.raises(IllConditionedError):
        curvature_at(HermitianMetricField([["1", None], ["0", "1e-14"]]), PTS[0])


# densities -------------------------------------------------------------

@pytest.mark.parametrize("conv", ["paper", "chernweil"])
def test_flat_densities_vanish(conv):
    d = chern_densities(HermitianMetricField.identity(2), PTS, conv)
    assert d.c1.is_zero or all(np.all(v == 0) for _, v in d.c1.items())
    assert np.all(d.c2 == 0)


@pytest.mark.parametrize("expr", ["1 + 0.1*(x1*x2 + y1*y2)", "exp(x1^2 + y2^2)", "1 + x1^2 + y1^2 + x2^2 + y2^2"])
def test_rank_one_c2_vanishes(expr):
    assert np.max(np.abs(chern_densities(rank1(expr), PTS, "chernweil").c2)) <= 1e-12


def test_split_rank_two_c2_is_product_of_c1():
    h1, h2 = "exp(x1^2 + y1^2 + 0.3*(x2^2 + y2^2))", "1 + x1^2 + y1^2 + 2*(x2^2 + y2^2)"
    m = HermitianMetricField.block_diagonal(rank1(h1), rank1(h2))
    c2 = chern_densities(m, PTS, "chernweil").c2
    a = chern_densities(rank1(h1), PTS).c1
    b = chern_densities(rank1(h2), PTS).c1
    np.testing.assert_allclose(c2, top_coefficient(wedge(a, b)), atol=1e-10)


def test_gaussian_pair_c2_value():
    m = HermitianMetricField.block_diagonal(rank1("exp(x1^2 + y1^2)"), rank1("exp(x2^2 + y2^2)"))
    for conv in ("paper", "chernweil"):
        c2 = chern_densities(m, PTS[1], conv).c2
        assert complex(c2) == pytest.approx(-1 / (4 * np.pi**2), abs=1e-9)


def test_conventions_coincide_on_generic_metric():
    m = HermitianMetricField([["1 + 0.2*(x1^2 + y2^2)", None],
                              ["0.1*complex(x1*y2, x2 - y1)", "2 + 0.3*x1*x2 + x2^2"]])
    paper = chern_densities(m, PTS, "paper").c2
    cw = chern_densities(m, PTS, "chernweil").c2
    np.testing.assert_allclose(paper, cw, atol=1e-14)
    assert np.max(np.abs(cw)) > 1e-4


def test_c2_invariant_under_frame_permutation():
    m = HermitianMetricField([["1 + 0.2*(x1^2 + y2^2)", None],
                              ["0.1*complex(x1*y2, x2 - y1)", "2 + x2^2"]])
    a = chern_densities(m, PTS).c2
    b = chern_densities(m.permuted([1, 0]), PTS).c2
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_conjugate_reflection_conjugates_c2():
    m = HermitianMetricField([["1 + 0.2*(x1^2 + y2^2)", None],
                              ["0.1*complex(x1*y2, x2 - y1)", "2 + x2^2 + x1*y1"]])
    refl = m.conjugate_reflected()
    mirror = PTS * np.array([1, -1, 1, -1])
    np.testing.assert_allclose(chern_densities(refl, PTS).c2,
                               np.conj(chern_densities(m, mirror).c2), atol=1e-10)


def test_unknown_convention():
    with pytest.raises(ValidationError):
        chern_densities(rank1("1"), PTS[0], "weird")


# integration -----------------------------------------------------------

def test_constant_density_integrates_to_volume():
    def one(metric, points, *, step, patch):
        return np.ones(points.shape[:-1]), None

    res = integrate_density(rank1("1"), Patch(), 3, one)
    assert res.value == pytest.approx(1) and res.error == pytest.approx(0, abs=1e-15)


def test_flat_c2_integral_is_zero():
    res = integrate_density(HermitianMetricField.identity(2), BOX, 4, "c2:paper")
    assert res.value == 0


def test_det_integral_of_mixed_line_bundle():
    res = integrate_density(rank1("1 + 0.1*(x1*x2 + y1*y2)"), BOX, 4, "det")
    assert res.value == pytest.approx(6.25e-6, rel=1e-6)


def test_integration_aborts_without_margin():
    with pytest.raises(IntegrationAborted):
        integrate_density(rank1("1 + x1^2"), Patch(((0, 1),) * 4), 3, "c2:chernweil")


def test_unknown_selector():
    with pytest.raises(ValidationError):
        density_selector("c3")
