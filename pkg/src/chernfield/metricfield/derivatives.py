"""Finite-difference Wirtinger derivatives of metric entries.

Real partials come from central differences with one Richardson level,
``R = (4 D(h/2) - D(h)) / 3``, which cancels the O(h^2) term.  Wirtinger
derivatives are then linear combinations of the real ones::

    d/dz    = (d/dx - i d/dy) / 2
    d/dzbar = (d/dx + i d/dy) / 2

Slots are ordered (z1, zbar1, z2, zbar2), matching :mod:`chernfield.formcalc`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import StencilError, ValidationError
from .metric import HermitianMetricField, Patch

__all__ = [
    "SLOTS",
    "WIRTINGER",
    "DEFAULT_STEP",
    "Jet",
    "axis_steps",
    "real_jet",
    "metric_jet",
    "wirtinger_derivative",
    "second_derivative_block",
    "SecondDerivativeBlock",
]

SLOTS = ("z1", "zbar1", "z2", "zbar2")

# rows: Wirtinger slot, columns: real axis (x1, y1, x2, y2)
WIRTINGER = np.array(
    [
        [0.5, -0.5j, 0.0, 0.0],
        [0.5, 0.5j, 0.0, 0.0],
        [0.0, 0.0, 0.5, -0.5j],
        [0.0, 0.0, 0.5, 0.5j],
    ]
)

DEFAULT_STEP = 1e-3


def slot_index(slot) -> int:
    if isinstance(slot, str):
        try:
            return SLOTS.index(slot)
        except ValueError:
            raise ValidationError(f"unknown derivative slot {slot!r}; expected one of {SLOTS}")
    return int(slot)


def axis_steps(step=DEFAULT_STEP, patch: Patch | None = None) -> np.ndarray:
    """Absolute per-axis steps: ``step`` times each coordinate range (1 without a patch)."""
    step = np.broadcast_to(np.asarray(step, dtype=float), (4,))
    if np.any(step <= 0):
        raise ValidationError("finite-difference step must be positive")
    widths = patch.widths if patch is not None else np.ones(4)
    return step * widths


@dataclass
class Jet:
    """Value, Wirtinger gradient and Wirtinger Hessian of a matrix field.

    Shapes: ``value (..., r, r)``, ``first (..., 4, r, r)``,
    ``second (..., 4, 4, r, r)`` and ``valid (...)``.  Entries at points
    where ``valid`` is False are placeholders.
    """

    value: np.ndarray
    first: np.ndarray
    second: np.ndarray | None
    valid: np.ndarray
    real_first: np.ndarray
    real_second: np.ndarray | None


def real_jet(func, points, steps, *, second=True, richardson=True, patch=None):
    """Central-difference gradient and Hessian of ``func`` in the real coordinates.

    ``func`` maps ``(..., 4)`` points to ``(..., *tail)`` arrays.  Returns
    ``(value, grad (..., 4, *tail), hess (..., 4, 4, *tail))``.
    """
    points = np.asarray(points, dtype=float)
    steps = np.asarray(steps, dtype=float)
    wrap = patch.wrap if patch is not None else (lambda p: p)
    cache = {}

    def f(offset):
        # offset: tuple of 4 multiples of the base step
        if offset not in cache:
            shift = np.asarray(offset, dtype=float) * steps
            cache[offset] = func(wrap(points + shift))
        return cache[offset]

    def unit(k, scale):
        off = [0.0] * 4
        off[k] = scale
        return tuple(off)

    def pair(k, sk, l, sl):
        off = [0.0] * 4
        off[k] = sk
        off[l] = sl
        return tuple(off)

    zero = (0.0, 0.0, 0.0, 0.0)
    value = f(zero)
    batch = points.shape[:-1]
    scales = (1.0, 0.5) if richardson else (1.0,)

    def extrapolate(estimates):
        if not richardson:
            return estimates[0]
        coarse, fine = estimates
        return (4.0 * fine - coarse) / 3.0

    grad = np.empty((4,) + value.shape, dtype=complex)
    for k in range(4):
        est = []
        for s in scales:
            h = s * steps[k]
            est.append((f(unit(k, s)) - f(unit(k, -s))) / (2.0 * h))
        grad[k] = extrapolate(est)

    nb = len(batch)
    if not second:
        return value, np.moveaxis(grad, 0, nb), None

    hess = np.empty((4, 4) + value.shape, dtype=complex)
    for k in range(4):
        est = []
        for s in scales:
            h = s * steps[k]
            est.append((f(unit(k, s)) - 2.0 * value + f(unit(k, -s))) / (h * h))
        hess[k, k] = extrapolate(est)
        for l in range(k + 1, 4):
            est = []
            for s in scales:
                hk, hl = s * steps[k], s * steps[l]
                est.append(
                    (f(pair(k, s, l, s)) - f(pair(k, s, l, -s))
                     - f(pair(k, -s, l, s)) + f(pair(k, -s, l, -s))) / (4.0 * hk * hl)
                )
            mixed = extrapolate(est)
            hess[k, l] = mixed
            hess[l, k] = mixed
    return value, np.moveaxis(grad, 0, nb), np.moveaxis(hess, (0, 1), (nb, nb + 1))


def _to_wirtinger(grad, hess, batch_ndim):
    # move the derivative axes to the front, contract with WIRTINGER, move back
    g = np.moveaxis(grad, batch_ndim, 0)
    first = np.moveaxis(np.tensordot(WIRTINGER, g, axes=(1, 0)), 0, batch_ndim)
    second = None
    if hess is not None:
        h = np.moveaxis(hess, (batch_ndim, batch_ndim + 1), (0, 1))
        w = np.tensordot(WIRTINGER, h, axes=(1, 0))
        w = np.tensordot(WIRTINGER, w, axes=(1, 1))  # -> (b, a, ...)
        w = np.swapaxes(w, 0, 1)
        second = np.moveaxis(w, (0, 1), (batch_ndim, batch_ndim + 1))
    return first, second


def metric_jet(
    metric: HermitianMetricField,
    points,
    *,
    step=DEFAULT_STEP,
    patch: Patch | None = None,
    second: bool = True,
    richardson: bool = True,
    strict: bool = False,
) -> Jet:
    """Derivatives of every raw entry h_ij at ``points[..., 4]``.

    Points whose stencil would leave a non-periodic face of ``patch`` are
    flagged invalid (and computed at a stand-in location); with
    ``strict=True`` they raise :class:`StencilError` instead.
    """
    points = np.asarray(points, dtype=float)
    steps = axis_steps(step, patch)
    if patch is not None:
        valid = patch.stencil_ok(points, steps)
        if strict and not valid.all():
            bad = points[~valid][0] if points.ndim > 1 else points
            raise StencilError(
                f"point {np.asarray(bad).tolist()} is within the stencil width "
                f"{steps.tolist()} of a non-periodic patch boundary"
            )
        if not valid.all():
            points = points.copy()
            points[~valid] = patch.center
    else:
        valid = np.ones(points.shape[:-1], dtype=bool)
    value, grad, hess = real_jet(
        metric.values, points, steps, second=second, richardson=richardson, patch=patch
    )
    first, sec = _to_wirtinger(grad, hess, points.ndim - 1)
    return Jet(value, first, sec, valid, grad, hess)


def wirtinger_derivative(metric, point, component, slot, *, step=DEFAULT_STEP, patch=None):
    """One first Wirtinger derivative of h_ij at a single point."""
    i, j = component
    jet = metric_jet(metric, point, step=step, patch=patch, second=False, strict=True)
    return complex(jet.first[slot_index(slot), i, j])


@dataclass(frozen=True)
class SecondDerivativeBlock:
    """The 4 x 4 matrix of second Wirtinger derivatives of one entry h_ij.

    ``entries[a, b] = d_a d_b h_ij`` with slots ordered (z1, zbar1, z2, zbar2).
    """

    entries: np.ndarray
    component: tuple = (0, 0)

    @property
    def upper_left(self):
        return self.entries[..., :2, :2]

    @property
    def lower_right(self):
        return self.entries[..., 2:, 2:]

    @property
    def upper_right(self):
        return self.entries[..., :2, 2:]

    @property
    def lower_left(self):
        return self.entries[..., 2:, :2]

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.entries - np.swapaxes(self.entries, -1, -2))))


def second_derivative_block(metric, point, component, *, step=DEFAULT_STEP, patch=None):
    i, j = component
    jet = metric_jet(metric, point, step=step, patch=patch, strict=True)
    return SecondDerivativeBlock(np.array(jet.second[..., :, :, i, j]), (i, j))
