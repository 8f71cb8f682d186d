"""The determinant formula for c2 and its block factorisation, measured against Chern-Weil.

The determinant formula sums, over every metric component h_ij, the
determinant of its 4 x 4 matrix of second Wirtinger derivatives.  Under the
flatness pattern the two diagonal 2 x 2 blocks vanish and the determinant
splits into the product of the two off-diagonal minors::

    det [[0, B], [A, M]] = det(A) det(B)        (2 x 2 blocks, sign +1)

``A`` (lower-left, one slot in z2/zbar2 and one in z1/zbar1) is the block we
call D_ij; ``B`` (upper-right) is its partner.  Nothing here assumes that the
formula equals c2; :func:`identity_residual` measures the gap per convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvature import CONVENTIONS, chern_densities_from_form, curvature_form, curvature_from_jet
from .errors import IntegrationAborted, ValidationError
from .metricfield import (
    DEFAULT_STEP,
    HermitianMetricField,
    Patch,
    SecondDerivativeBlock,
    flatness_pattern_report,
    metric_jet,
)
from .metricfield.metric import grid_shape

__all__ = [
    "block_determinants",
    "det_formula_density",
    "det_formula_field",
    "FactorizationResult",
    "block_factorization_check",
    "IdentityReport",
    "identity_residual",
    "PositivityReport",
    "positivity_report",
    "refinement_ladder",
]

MAX_FAILED_FRACTION = 0.01


def block_determinants(second: np.ndarray) -> np.ndarray:
    """``det`` of each 4 x 4 block in a ``(..., 4, 4, r, r)`` Hessian array -> ``(..., r, r)``."""
    blocks = np.moveaxis(second, (-4, -3), (-2, -1))
    return np.linalg.det(blocks)


def det_formula_field(metric, points, *, step=DEFAULT_STEP, patch=None, strict=False):
    """``(sum_ij det(d^2 h_ij), valid_mask)`` at ``points[..., 4]``."""
    jet = metric_jet(metric, points, step=step, patch=patch, strict=strict)
    dets = block_determinants(jet.second)
    return dets.sum(axis=(-2, -1)), jet.valid


def det_formula_density(metric, points, *, step=DEFAULT_STEP, patch=None, strict=True):
    """Coefficient of dz1^dzbar1^dz2^dzbar2 in the determinant formula.

    With ``strict=False`` this returns ``(values, valid)`` so it can be used
    as an integration selector.
    """
    values, valid = det_formula_field(metric, points, step=step, patch=patch, strict=strict)
    if strict:
        return complex(values) if np.ndim(values) == 0 else values
    return values, valid


@dataclass
class FactorizationResult:
    holds: bool
    lhs: complex
    rhs: complex
    pattern: str
    diagonal_residual: float
    discrepancy: float

    def as_dict(self):
        return {
            "holds": self.holds,
            "lhs_re": self.lhs.real,
            "lhs_im": self.lhs.imag,
            "rhs_re": self.rhs.real,
            "rhs_im": self.rhs.imag,
            "pattern": self.pattern,
            "diagonal_residual": self.diagonal_residual,
            "discrepancy": self.discrepancy,
        }


def block_factorization_check(block, tolerance: float = 1e-10) -> FactorizationResult:
    """Compare ``det(block)`` with ``det(upper-right) * det(lower-left)``.

    ``pattern`` is ``product`` when both diagonal blocks vanish within
    ``tolerance``, ``fibration`` when exactly the upper-left one does, and
    ``none`` otherwise.  ``holds`` requires a recognised pattern and
    ``|lhs - rhs| <= tolerance``; the discrepancy is reported either way.
    """
    m = block.entries if isinstance(block, SecondDerivativeBlock) else np.asarray(block)
    m = np.asarray(m, dtype=complex)
    if m.shape != (4, 4):
        raise ValidationError(f"expected a 4x4 block, got shape {m.shape}")
    ul = float(np.max(np.abs(m[:2, :2])))
    lr = float(np.max(np.abs(m[2:, 2:])))
    if ul <= tolerance and lr <= tolerance:
        pattern = "product"
    elif ul <= tolerance:
        pattern = "fibration"
    else:
        pattern = "none"
    lhs = complex(np.linalg.det(m))
    rhs = complex(np.linalg.det(m[:2, 2:]) * np.linalg.det(m[2:, :2]))
    discrepancy = abs(lhs - rhs)
    return FactorizationResult(
        holds=pattern != "none" and discrepancy <= tolerance,
        lhs=lhs,
        rhs=rhs,
        pattern=pattern,
        diagonal_residual=ul if pattern == "fibration" else max(ul, lr),
        discrepancy=discrepancy,
    )


def refinement_ladder(finest, levels: int = 3, periodic=(False, False)) -> list[tuple]:
    """Grid shapes from coarse to fine, halving the finest ``levels - 1`` times."""
    finest = grid_shape(finest)
    if levels < 1:
        raise ValidationError("need at least one refinement level")
    per = np.repeat(np.array(periodic, dtype=bool), 2)
    shapes = [finest]
    for _ in range(levels - 1):
        prev = shapes[-1]
        shapes.append(tuple(max(1 if per[k] else 2, n // 2) for k, n in enumerate(prev)))
    shapes.reverse()
    if len(set(shapes)) != len(shapes):
        raise ValidationError(f"finest grid {finest} is too coarse for {levels} distinct levels")
    return shapes


@dataclass
class _GridSample:
    shape: tuple
    points: np.ndarray
    weights: np.ndarray
    valid: np.ndarray
    formula: np.ndarray
    oracle: dict


def _sample(metric, patch, shape, conventions, step) -> _GridSample:
    points, weights = patch.grid(shape)
    jet = metric_jet(metric, points, step=step, patch=patch)
    valid = jet.valid
    failed = int((~valid).sum())
    if failed > MAX_FAILED_FRACTION * valid.size:
        raise IntegrationAborted(
            f"{failed} of {valid.size} grid points have no usable stencil on grid {shape}; "
            "enlarge the patch margin"
        )
    formula = block_determinants(jet.second).sum(axis=(-2, -1))
    omega = curvature_form(curvature_from_jet(jet, points))
    oracle = {}
    for conv in conventions:
        c2 = chern_densities_from_form(omega, conv).c2
        oracle[conv] = np.broadcast_to(np.asarray(c2, dtype=complex), valid.shape)
    return _GridSample(tuple(shape), points, weights, valid, formula, oracle)


def _integral(sample: _GridSample, values) -> complex:
    terms = np.where(sample.valid, sample.weights * values, 0.0)
    return complex(np.sum(terms.ravel()))


@dataclass
class IdentityReport:
    """Pointwise and integrated comparison of the determinant formula with c2.

    ``records`` hold the finest grid: ``points (N, 4)``, ``formula (N,)`` and
    per-convention ``oracle`` / ``residual`` arrays over valid points only.
    ``table`` has one row per grid resolution, coarse to fine.
    """

    conventions: tuple
    in_hypothesis: bool
    pattern: dict
    table: list = field(default_factory=list)
    points: np.ndarray | None = None
    formula: np.ndarray | None = None
    oracle: dict = field(default_factory=dict)
    residual: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> dict:
        return {c: float(np.max(self.residual[c])) if self.residual[c].size else 0.0
                for c in self.conventions}

    @property
    def resolutions(self) -> list:
        return [row["grid"] for row in self.table]

    def finest(self) -> dict:
        return self.table[-1]

    def converged(self, tolerance: float) -> dict:
        """Change of the integrated residual between the two finest grids, per convention."""
        if len(self.table) < 2:
            return {c: False for c in self.conventions}
        a, b = self.table[-2], self.table[-1]
        return {
            c: abs(b["residual_integral"][c] - a["residual_integral"][c]) <= tolerance
            for c in self.conventions
        }

    def gap_flags(self, tolerance: float = 1e-12) -> dict:
        """Conventions where the formula and c2 disagree somewhere on the finest grid."""
        return {c: self.max_residual[c] > tolerance for c in self.conventions}

    def as_dict(self):
        return {
            "conventions": list(self.conventions),
            "in_hypothesis": self.in_hypothesis,
            "pattern": self.pattern,
            "max_residual": self.max_residual,
            "table": self.table,
        }


def identity_residual(
    metric: HermitianMetricField,
    patch: Patch,
    resolutions,
    conventions=CONVENTIONS,
    *,
    step=DEFAULT_STEP,
    pattern_tolerance: float = 1e-6,
    pattern_resolution=5,
) -> IdentityReport:
    """Measure ``sum_ij det(d^2 h_ij)`` against ``c2`` on a sequence of grids.

    ``resolutions`` is a list of grid shapes (coarse to fine); at least
    three are needed for a convergence table.
    """
    conventions = tuple(conventions)
    for conv in conventions:
        if conv not in CONVENTIONS:
            raise ValidationError(f"unknown convention {conv!r}")
    shapes = [grid_shape(s) for s in resolutions]
    if len(shapes) < 3:
        raise ValidationError("identity measurement needs at least three grid resolutions")
    pattern = flatness_pattern_report(metric, patch, pattern_resolution, pattern_tolerance,
                                      step=step)
    report = IdentityReport(conventions, pattern.passed, pattern.as_dict())
    sample = None
    for shape in shapes:
        sample = _sample(metric, patch, shape, conventions, step)
        row = {
            "grid": list(shape),
            "points": int(sample.valid.sum()),
            "failed_points": int((~sample.valid).sum()),
            "formula_integral": _integral(sample, sample.formula),
            "oracle_integral": {},
            "residual_integral": {},
            "max_residual": {},
        }
        for conv in conventions:
            resid = np.abs(sample.formula - sample.oracle[conv])
            row["oracle_integral"][conv] = _integral(sample, sample.oracle[conv])
            row["residual_integral"][conv] = abs(row["formula_integral"] - row["oracle_integral"][conv])
            row["max_residual"][conv] = float(np.max(np.where(sample.valid, resid, 0.0)))
        report.table.append(row)
    mask = sample.valid
    report.points = sample.points[mask]
    report.formula = sample.formula[mask]
    for conv in conventions:
        report.oracle[conv] = sample.oracle[conv][mask]
        report.residual[conv] = np.abs(report.formula - report.oracle[conv])
    return report


@dataclass
class PositivityReport:
    formula_integral: complex
    error_estimate: float
    sign: str
    imaginary_ok: bool
    oracle_integrals: dict
    grid: tuple

    @property
    def nonnegative(self) -> bool:
        return self.sign in ("positive", "zero")

    def as_dict(self):
        return {
            "formula_integral_re": self.formula_integral.real,
            "formula_integral_im": self.formula_integral.imag,
            "error_estimate": self.error_estimate,
            "sign": self.sign,
            "imaginary_ok": self.imaginary_ok,
            "oracle_integrals": {
                c: {"re": v.real, "im": v.imag} for c, v in self.oracle_integrals.items()
            },
            "grid": list(self.grid),
        }


def positivity_report(
    metric: HermitianMetricField,
    patch: Patch,
    shape,
    conventions=CONVENTIONS,
    *,
    step=DEFAULT_STEP,
    zero_tolerance: float = 1e-12,
    imaginary_tolerance: float = 1e-9,
) -> PositivityReport:
    """Integral and sign of the determinant formula, with the c2 integrals alongside."""
    shape = grid_shape(shape)
    fine = _sample(metric, patch, shape, tuple(conventions), step)
    coarse_shape = refinement_ladder(shape, 2, patch.periodic)[0]
    coarse = _sample(metric, patch, coarse_shape, (), step)
    value = _integral(fine, fine.formula)
    error = abs(value - _integral(coarse, coarse.formula))
    if value.real > zero_tolerance:
        sign = "positive"
    elif value.real < -zero_tolerance:
        sign = "negative"
    else:
        sign = "zero"
    return PositivityReport(
        formula_integral=value,
        error_estimate=float(error),
        sign=sign,
        imaginary_ok=abs(value.imag) <= imaginary_tolerance,
        oracle_integrals={c: _integral(fine, fine.oracle[c]) for c in conventions},
        grid=shape,
    )
