"""Block-pattern checks on the second-derivative matrices of a metric.

In product mode every h_ij must have vanishing second derivatives purely in
(z1, zbar1) and purely in (z2, zbar2); in fibration mode only the (z1, zbar1)
block is constrained.  The mixed 2 x 2 blocks carry whatever content the
metric has and are reported, not judged.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .derivatives import DEFAULT_STEP, metric_jet
from .metric import HermitianMetricField, Patch

__all__ = ["BlockResult", "PatternReport", "flatness_pattern_report", "BLOCKS"]

BLOCKS = {
    "z1z1": (slice(0, 2), slice(0, 2)),
    "z2z2": (slice(2, 4), slice(2, 4)),
    "mixed": (slice(2, 4), slice(0, 2)),
}

CHECKED = {"product": ("z1z1", "z2z2"), "fibration": ("z1z1",)}


@dataclass
class BlockResult:
    name: str
    max_abs: float
    passed: bool | None
    worst_point: list
    worst_component: tuple

    def as_dict(self):
        return {
            "block": self.name,
            "max_abs": self.max_abs,
            "passed": self.passed,
            "worst_point": self.worst_point,
            "worst_component": list(self.worst_component),
        }


@dataclass
class PatternReport:
    mode: str
    tolerance: float
    blocks: dict = field(default_factory=dict)
    points: int = 0
    skipped: int = 0
    # per-point maxima, kept for CSV output
    grid_points: np.ndarray | None = None
    per_point: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.blocks[name].passed for name in CHECKED[self.mode])

    def as_dict(self):
        return {
            "mode": self.mode,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "points": self.points,
            "skipped_points": self.skipped,
            "blocks": {k: v.as_dict() for k, v in self.blocks.items()},
        }


def _block_result(name, second, points, valid, passed_tol):
    rows, cols = BLOCKS[name]
    sub = np.abs(second[..., rows, cols, :, :])  # (..., 2, 2, r, r)
    per_point = sub.max(axis=(-4, -3, -2, -1))
    per_point = np.where(valid, per_point, -np.inf)
    flat = int(np.argmax(per_point))
    idx = np.unravel_index(flat, per_point.shape)
    worst = sub[idx]
    comp = np.unravel_index(int(np.argmax(worst.max(axis=(0, 1)))), worst.shape[2:])
    max_abs = float(per_point[idx])
    passed = None if passed_tol is None else bool(max_abs <= passed_tol)
    return (
        BlockResult(name, max_abs, passed, points[idx].tolist(), tuple(int(c) for c in comp)),
        np.where(valid, per_point, np.nan),
    )


def flatness_pattern_report(
    metric: HermitianMetricField,
    patch: Patch,
    resolution=5,
    tolerance: float = 1e-6,
    *,
    step=DEFAULT_STEP,
    mode: str | None = None,
) -> PatternReport:
    """Maximum pure-block second derivatives of every h_ij over a grid.

    Grid points whose stencil would leave the patch are skipped and counted.
    """
    mode = mode or metric.mode
    if mode not in CHECKED:
        raise ValidationError(f"unknown pattern mode {mode!r}")
    points, _ = patch.grid(resolution)
    jet = metric_jet(metric, points, step=step, patch=patch)
    valid = jet.valid
    if not valid.any():
        raise ValidationError("no grid point has a usable derivative stencil; increase the patch margin")
    report = PatternReport(mode=mode, tolerance=tolerance, points=int(valid.sum()),
                           skipped=int((~valid).sum()), grid_points=points)
    for name in BLOCKS:
        tol = tolerance if name in CHECKED[mode] else None
        result, per_point = _block_result(name, jet.second, points, valid, tol)
        report.blocks[name] = result
        report.per_point[name] = per_point
    return report
