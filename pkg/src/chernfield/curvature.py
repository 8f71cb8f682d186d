"""Chern-connection curvature and Chern-class densities of a Hermitian metric.

For a holomorphic frame with metric matrix ``H[j, k] = h(s_j, s_k)`` the
lowered curvature is::

    R_{j kbar a bbar} = -d_a d_bbar h_{j kbar} + sum h^{c dbar} d_a h_{j dbar} d_bbar h_{c kbar}

which in matrix form reads ``-d_a d_bbar H + (d_a H) H^-1 (d_bbar H)``.  The
raised tensor ``R^i_{j a bbar}`` satisfies ``R_{j kbar} = sum_i h_{i kbar} R^i_j``.

Two normalisations of c2 are carried side by side:

``paper``
    ``(tr(O ^ O) - tr O ^ tr O) / (8 pi^2)`` on the raw curvature matrix O.
``chernweil``
    the degree-two term of ``det(1 + F)`` with ``F = (i / 2 pi) O``, i.e.
    ``(tr F ^ tr F - tr(F ^ F)) / 2``.

Densities are top-form coefficients against dz1 ^ dzbar1 ^ dz2 ^ dzbar2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IllConditionedError, IntegrationAborted, ValidationError
from .formcalc import Basis, ComplexForm, MatrixForm, mat_wedge, top_coefficient, trace, wedge
from .metricfield import DEFAULT_STEP, HermitianMetricField, Jet, Patch, metric_jet
from .metricfield.metric import grid_shape

__all__ = [
    "CONVENTIONS",
    "COND_LIMIT",
    "CurvatureTensor",
    "ChernDensities",
    "IntegralResult",
    "curvature_from_jet",
    "curvature_at",
    "curvature_form",
    "chern_densities",
    "chern_densities_from_form",
    "integrate_density",
    "density_selector",
    "top_of_product",
]

CONVENTIONS = ("paper", "chernweil")
COND_LIMIT = 1e12
MAX_FAILED_FRACTION = 0.01

HOLO = (0, 2)  # z1, z2 slots
ANTI = (1, 3)  # zbar1, zbar2 slots
_DZ = (Basis.DZ1, Basis.DZ2)
_DZBAR = (Basis.DZBAR1, Basis.DZBAR2)


@dataclass
class CurvatureTensor:
    """Curvature at a batch of points.

    ``lowered[..., j, k, a, b] = R_{j kbar a bbar}`` and
    ``raised[..., i, j, a, b] = R^i_{j a bbar}`` with ``a, b`` in {0: z1, 1: z2}.
    """

    metric: np.ndarray
    lowered: np.ndarray
    raised: np.ndarray
    valid: np.ndarray

    @property
    def rank(self) -> int:
        return self.metric.shape[-1]

    def lowering_defect(self) -> float:
        relowered = np.einsum("...ik,...ijab->...jkab", self.metric, self.raised)
        return float(np.max(np.abs(relowered - self.lowered)))

    def hermitian_defect(self) -> np.ndarray:
        """``|R_{j kbar a bbar} - conj(R_{k jbar b abar})|`` maximised per point."""
        swapped = np.conj(np.swapaxes(np.swapaxes(self.lowered, -4, -3), -2, -1))
        return np.max(np.abs(self.lowered - swapped), axis=(-4, -3, -2, -1))


def _check_conditioning(h, valid, points=None, limit=COND_LIMIT):
    cond = np.linalg.cond(h)
    bad = np.asarray(valid & ~(cond <= limit))
    if bad.any():
        where = ""
        if points is not None:
            where = f" at {np.asarray(points, float).reshape(-1, 4)[bad.ravel()][0].tolist()}"
        worst = float(np.max(np.where(bad, cond, 0.0)))
        raise IllConditionedError(
            f"metric condition number {worst:.3e} exceeds {limit:.0e}{where}"
        )


def curvature_from_jet(jet: Jet, points=None, cond_limit=COND_LIMIT) -> CurvatureTensor:
    value = jet.value
    h = 0.5 * (value + np.conj(np.swapaxes(value, -1, -2)))
    # stand-in points were substituted for invalid ones, so conditioning is checked on valid points
    _check_conditioning(h, jet.valid, points, cond_limit)
    hinv = np.linalg.inv(h)
    r = h.shape[-1]
    batch = h.shape[:-2]
    lowered = np.empty(batch + (r, r, 2, 2), dtype=complex)
    for a, sa in enumerate(HOLO):
        da = jet.first[..., sa, :, :]
        for b, sb in enumerate(ANTI):
            db = jet.first[..., sb, :, :]
            ddab = jet.second[..., sa, sb, :, :]
            lowered[..., a, b] = -ddab + da @ hinv @ db
    # R^i_j = sum_k R_{j kbar} h^{-1}[k, i]
    raised = np.einsum("...jkab,...ki->...ijab", lowered, hinv)
    return CurvatureTensor(h, lowered, raised, jet.valid)


def curvature_at(
    metric: HermitianMetricField,
    points,
    *,
    step=DEFAULT_STEP,
    patch: Patch | None = None,
    strict: bool = True,
    cond_limit: float = COND_LIMIT,
) -> CurvatureTensor:
    """Curvature tensor at one point (shape ``(4,)``) or a batch ``(..., 4)``."""
    jet = metric_jet(metric, points, step=step, patch=patch, strict=strict)
    return curvature_from_jet(jet, points, cond_limit)


def curvature_form(tensor: CurvatureTensor, *, raised: bool = True) -> MatrixForm:
    """``O^i_j = sum R^i_{j a bbar} dz^a ^ dzbar^b`` as a degree-2 MatrixForm.

    Coefficients are arrays when the tensor holds a batch of points.
    """
    comps = tensor.raised if raised else tensor.lowered
    r = tensor.rank
    rows = []
    for i in range(r):
        row = []
        for j in range(r):
            coeffs = {
                (_DZ[a], _DZBAR[b]): comps[..., i, j, a, b] for a in range(2) for b in range(2)
            }
            row.append(ComplexForm(2, coeffs))
        rows.append(row)
    return MatrixForm(rows)


def top_of_product(a: ComplexForm, b: ComplexForm):
    return top_coefficient(wedge(a, b))


@dataclass
class ChernDensities:
    """``c1`` is the (1,1)-form ``(i/2pi) tr O``; ``c2`` the top coefficient under ``convention``."""

    c1: ComplexForm
    c2: object
    convention: str


def chern_densities_from_form(omega: MatrixForm, convention: str = "chernweil") -> ChernDensities:
    if convention not in CONVENTIONS:
        raise ValidationError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    tr = trace(omega)
    c1 = tr * (1j / (2 * np.pi))
    if convention == "paper":
        c2 = (top_coefficient(trace(mat_wedge(omega, omega))) - top_of_product(tr, tr)) / (
            8 * np.pi**2
        )
    else:
        f = omega * (1j / (2 * np.pi))
        trf = trace(f)
        c2 = 0.5 * (top_of_product(trf, trf) - top_coefficient(trace(mat_wedge(f, f))))
    return ChernDensities(c1, c2, convention)


def chern_densities(
    metric: HermitianMetricField,
    points,
    convention: str = "chernweil",
    *,
    step=DEFAULT_STEP,
    patch: Patch | None = None,
    strict: bool = True,
) -> ChernDensities:
    tensor = curvature_at(metric, points, step=step, patch=patch, strict=strict)
    return chern_densities_from_form(curvature_form(tensor), convention)


# integration -------------------------------------------------------------

Selector = Callable[..., tuple]


def _c2_selector(convention):
    def select(metric, points, *, step, patch):
        tensor = curvature_at(metric, points, step=step, patch=patch, strict=False)
        dens = chern_densities_from_form(curvature_form(tensor), convention)
        return np.broadcast_to(dens.c2, points.shape[:-1]), tensor.valid

    return select


def density_selector(name: str) -> Selector:
    """Named densities: ``c2:paper``, ``c2:chernweil``, ``det`` (sum of 4x4 determinants)."""
    if name in ("c2:paper", "c2:chernweil"):
        return _c2_selector(name.split(":", 1)[1])
    if name == "det":
        from .paperformulas import det_formula_density

        def select(metric, points, *, step, patch):
            return det_formula_density(metric, points, step=step, patch=patch, strict=False)

        return select
    raise ValidationError(f"unknown density selector {name!r}")


@dataclass
class IntegralResult:
    value: complex
    error: float
    shape: tuple
    failed: int
    total: int
    coarse_value: complex
    coarse_shape: tuple

    def as_dict(self):
        return {
            "value_re": float(np.real(self.value)),
            "value_im": float(np.imag(self.value)),
            "error_estimate": self.error,
            "grid": list(self.shape),
            "failed_points": self.failed,
            "total_points": self.total,
            "coarse_value_re": float(np.real(self.coarse_value)),
            "coarse_value_im": float(np.imag(self.coarse_value)),
            "coarse_grid": list(self.coarse_shape),
        }


def _half_shape(patch: Patch, shape):
    out = []
    for k, n in enumerate(shape):
        if patch.axis_periodic[k]:
            out.append(max(1, n // 2))
        else:
            out.append(max(2, (n + 1) // 2))
    return tuple(out)


def _grid_integral(metric, patch, shape, select, step):
    points, weights = patch.grid(shape)
    values, valid = select(metric, points, step=step, patch=patch)
    values = np.asarray(values, dtype=complex)
    valid = np.ones(values.shape, dtype=bool) if valid is None else np.asarray(valid)
    failed = int((~valid).sum())
    if failed > MAX_FAILED_FRACTION * valid.size:
        raise IntegrationAborted(
            f"{failed} of {valid.size} grid points have no usable stencil "
            f"(limit {MAX_FAILED_FRACTION:.0%}); enlarge the patch margin or the grid"
        )
    terms = np.where(valid, weights * values, 0.0)
    # ravel in C order then sum: fixed reduction order
    return complex(np.sum(terms.ravel())), failed, valid.size, values, valid, points


def integrate_density(
    metric: HermitianMetricField,
    patch: Patch,
    shape,
    selector="c2:chernweil",
    *,
    step=DEFAULT_STEP,
) -> IntegralResult:
    """Tensor-product trapezoidal integral of a density over the patch.

    The error estimate is the difference to the same rule on the
    half-resolution grid.
    """
    select = density_selector(selector) if isinstance(selector, str) else selector
    shape = grid_shape(shape)
    value, failed, total, *_ = _grid_integral(metric, patch, shape, select, step)
    coarse_shape = _half_shape(patch, shape)
    coarse, *_ = _grid_integral(metric, patch, coarse_shape, select, step)
    return IntegralResult(value, float(abs(value - coarse)), shape, failed, total, coarse,
                          coarse_shape)
