"""Hermitian metric fields over a coordinate patch of C^2."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import DimensionError, EvaluationError, ValidationError
from .expr import Conj, Const, Expression, parse

__all__ = ["Patch", "HermitianMetricField", "MODES", "grid_shape"]

MODES = ("product", "fibration")

# relative slack when comparing stencil reach against patch bounds
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class Patch:
    """Closed box in (x1, y1, x2, y2).

    ``periodic`` holds one flag per complex coordinate; a periodic pair wraps
    both its real coordinates (a torus fundamental domain).  ``margin`` is
    the distance beyond a non-periodic face on which the metric is still
    known to be defined, i.e. how far a derivative stencil may reach out.
    """

    ranges: tuple = ((0.0, 1.0),) * 4
    periodic: tuple = (False, False)
    margin: float = 0.0

    def __post_init__(self):
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        if len(ranges) != 4:
            raise ValidationError("a patch needs ranges for x1, y1, x2, y2")
        for lo, hi in ranges:
            if not hi > lo:
                raise ValidationError(f"empty coordinate interval [{lo}, {hi}]")
        periodic = tuple(bool(p) for p in self.periodic)
        if len(periodic) != 2:
            raise ValidationError("periodicity is given per complex coordinate (two flags)")
        if self.margin < 0:
            raise ValidationError("patch margin must be non-negative")
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "margin", float(self.margin))

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.ranges])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.ranges])

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def axis_periodic(self) -> np.ndarray:
        return np.repeat(np.array(self.periodic), 2)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def wrap(self, points) -> np.ndarray:
        points = np.array(points, dtype=float)
        per = self.axis_periodic
        if per.any():
            lo, w = self.lower[per], self.widths[per]
            points[..., per] = lo + np.mod(points[..., per] - lo, w)
        return points

    def stencil_ok(self, points, reach) -> np.ndarray:
        """Mask of points whose stencil of half-width ``reach`` stays evaluable."""
        points = np.asarray(points, dtype=float)
        reach = np.broadcast_to(np.asarray(reach, dtype=float), (4,))
        slack = _BOUND_SLACK * self.widths
        lo = self.lower - self.margin - slack
        hi = self.upper + self.margin + slack
        inside = (points - reach >= lo) & (points + reach <= hi)
        inside |= self.axis_periodic
        return np.all(inside, axis=-1)

    def axis_nodes(self, n: int, axis: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and trapezoidal weights along one axis."""
        n = int(n)
        lo, hi = self.ranges[axis]
        if self.axis_periodic[axis]:
            if n < 1:
                raise ValidationError("grid resolution must be positive")
            nodes = lo + (hi - lo) * np.arange(n) / n
            weights = np.full(n, (hi - lo) / n)
        else:
            if n < 2:
                raise ValidationError("grid resolution must be at least 2 on an open axis")
            nodes = np.linspace(lo, hi, n)
            weights = np.full(n, (hi - lo) / (n - 1))
            weights[0] *= 0.5
            weights[-1] *= 0.5
        return nodes, weights

    def grid(self, shape) -> tuple[np.ndarray, np.ndarray]:
        """Tensor-product grid: points ``(n1, n2, n3, n4, 4)`` and weights ``(n1, n2, n3, n4)``."""
        shape = grid_shape(shape)
        axes = [self.axis_nodes(n, k) for k, n in enumerate(shape)]
        mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        points = np.stack(mesh, axis=-1)
        weights = np.einsum("i,j,k,l->ijkl", *[a[1] for a in axes])
        return points, weights


def grid_shape(shape) -> tuple[int, int, int, int]:
    if np.isscalar(shape):
        shape = (int(shape),) * 4
    shape = tuple(int(n) for n in shape)
    if len(shape) != 4:
        raise ValidationError(f"grid shape needs four resolutions, got {shape}")
    return shape


class _Reflected(Expression):
    """``conj(e(x1, -y1, x2, -y2))``."""

    def __init__(self, arg: Expression):
        self.arg = arg

    def _eval(self, env):
        flipped = dict(env)
        flipped["y1"] = -np.asarray(env["y1"], dtype=float)
        flipped["y2"] = -np.asarray(env["y2"], dtype=float)
        return np.conj(self.arg._eval(flipped))

    def variables(self):
        return self.arg.variables()

    def __str__(self):
        return f"reflect({self.arg})"


def _coerce(entry) -> Expression:
    if isinstance(entry, Expression):
        return entry
    if isinstance(entry, str):
        return parse(entry)
    if np.isscalar(entry):
        return Const(complex(entry))
    raise ValidationError(f"cannot interpret metric entry {entry!r}")


class HermitianMetricField:
    """An r x r matrix of entry expressions h_ij, Hermitian and positive definite.

    ``entries`` is either an r x r nested sequence (``None`` in the lower
    triangle means "conjugate of the mirrored entry") or a mapping
    ``{(i, j): expr}`` with zero-based indices.  Missing off-diagonal pairs are
    zero; diagonal entries are required.
    """

    def __init__(self, entries, mode: str = "product"):
        if mode not in MODES:
            raise ValidationError(f"unknown metric mode {mode!r}; expected one of {MODES}")
        if isinstance(entries, Mapping):
            given = {tuple(k): v for k, v in entries.items()}
            rank = 1 + max(max(k) for k in given) if given else 0
        else:
            rows = [list(row) for row in entries]
            rank = len(rows)
            if any(len(row) != rank for row in rows):
                raise DimensionError("metric entries must form a square array")
            given = {(i, j): rows[i][j] for i in range(rank) for j in range(rank)
                     if rows[i][j] is not None}
        if rank < 1:
            raise DimensionError("metric rank must be at least 1")
        table: list[list[Expression | None]] = [[None] * rank for _ in range(rank)]
        for (i, j), value in given.items():
            if not (0 <= i < rank and 0 <= j < rank):
                raise DimensionError(f"entry index {(i, j)} outside rank {rank}")
            table[i][j] = _coerce(value)
        for i in range(rank):
            if table[i][i] is None:
                raise ValidationError(f"diagonal entry h{i + 1}{i + 1} is missing")
            for j in range(rank):
                if table[i][j] is None:
                    mirror = table[j][i]
                    table[i][j] = Conj(mirror) if mirror is not None else Const(0j)
        self._entries = tuple(tuple(row) for row in table)
        self.rank = rank
        self.mode = mode

    @property
    def entries(self) -> tuple[tuple[Expression, ...], ...]:
        return self._entries

    def entry(self, i: int, j: int) -> Expression:
        return self._entries[i][j]

    def values(self, points) -> np.ndarray:
        """Raw entry values at ``points[..., 4]``, shape ``(..., r, r)``; no symmetrisation."""
        points = np.asarray(points, dtype=float)
        out = np.empty(points.shape[:-1] + (self.rank, self.rank), dtype=complex)
        # lower triangle first so faults name the entry the user wrote, not its mirror
        pairs = sorted(((i, j) for i in range(self.rank) for j in range(self.rank)),
                       key=lambda ij: (ij[0] < ij[1], ij))
        for i, j in pairs:
            try:
                out[..., i, j] = self._entries[i][j].at(points)
            except EvaluationError as exc:
                if exc.entry is not None:
                    raise
                raise EvaluationError(str(exc), entry=(i, j)) from exc
        return out

    def evaluate_with_defect(self, point) -> tuple[np.ndarray, float]:
        raw = self.values(point)
        herm = np.conj(np.swapaxes(raw, -1, -2))
        defect = float(np.max(np.abs(raw - herm))) if raw.size else 0.0
        return 0.5 * (raw + herm), defect

    def evaluate(self, point) -> np.ndarray:
        return self.evaluate_with_defect(point)[0]

    def hermiticity_defect(self, points) -> np.ndarray:
        raw = self.values(points)
        return np.max(np.abs(raw - np.conj(np.swapaxes(raw, -1, -2))), axis=(-1, -2))

    def positive_definite(self, points) -> np.ndarray:
        """Leading-principal-minor test at each point."""
        h = self.evaluate(points)
        ok = np.ones(h.shape[:-2], dtype=bool)
        for k in range(1, self.rank + 1):
            minor = np.linalg.det(h[..., :k, :k]).real
            ok &= minor > 0
        return ok

    def validate(self, patch: Patch, resolution=3, threshold: float = 1e-10) -> dict:
        """Sample the Hermitian and positivity invariants on a coarse grid.

        Returns a summary; raises :class:`ValidationError` if either fails.
        """
        points, _ = patch.grid(resolution)
        defect = self.hermiticity_defect(points)
        pd = self.positive_definite(points)
        summary = {
            "points": int(pd.size),
            "max_hermiticity_defect": float(defect.max()),
            "positive_definite": bool(pd.all()),
        }
        if summary["max_hermiticity_defect"] > threshold:
            worst = np.unravel_index(np.argmax(defect), defect.shape)
            raise ValidationError(
                f"metric is not Hermitian: defect {defect.max():.3e} at {points[worst].tolist()}"
            )
        if not pd.all():
            bad = np.argwhere(~pd)[0]
            raise ValidationError(
                f"metric is not positive definite at {points[tuple(bad)].tolist()}"
            )
        return summary

    # derived metrics ----------------------------------------------------

    def conjugate_reflected(self) -> HermitianMetricField:
        """``h~(x1, y1, x2, y2) = conj(h(x1, -y1, x2, -y2))``, i.e. ``conj(h(zbar))``."""
        return HermitianMetricField(
            [[_Reflected(e) for e in row] for row in self._entries], mode=self.mode
        )

    def permuted(self, perm: Sequence[int]) -> HermitianMetricField:
        """Relabel the frame: new h_ij = old h_{perm[i] perm[j]}."""
        perm = list(perm)
        if sorted(perm) != list(range(self.rank)):
            raise ValidationError(f"{perm} is not a permutation of the frame")
        return HermitianMetricField(
            [[self._entries[perm[i]][perm[j]] for j in range(self.rank)]
             for i in range(self.rank)],
            mode=self.mode,
        )

    @classmethod
    def identity(cls, rank: int, mode: str = "product") -> HermitianMetricField:
        return cls([[1.0 if i == j else 0.0 for j in range(rank)] for i in range(rank)], mode)

    @classmethod
    def block_diagonal(cls, *blocks: HermitianMetricField, mode=None) -> HermitianMetricField:
        rank = sum(b.rank for b in blocks)
        table = [[Const(0j)] * rank for _ in range(rank)]
        offset = 0
        for b in blocks:
            for i in range(b.rank):
                for j in range(b.rank):
                    table[offset + i][offset + j] = b.entry(i, j)
            offset += b.rank
        return cls(table, mode or blocks[0].mode)

    def __repr__(self):
        body = "; ".join(
            ", ".join(str(e) for e in row) for row in self._entries
        )
        return f"HermitianMetricField(rank={self.rank}, mode={self.mode!r}, [{body}])"
