"""Families of curves and moduli sections: bookkeeping only.

A moduli point is an opaque payload (a mapping of descriptive keys); no
moduli-space geometry is computed, and smoothness of a section is not
checked because it has no meaning for a bare point set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping, Sequence

from .errors import ValidationError

__all__ = [
    "FAMILY_MODES",
    "FiberDescriptor",
    "CurveFamily",
    "ModuliSection",
    "ParabolicData",
    "IncompleteSectionError",
    "StabilityViolation",
    "WrongModeError",
    "build_section",
    "cycle_from_constant_family",
    "validate_parabolic_data",
]

FAMILY_MODES = ("constant-curve", "product", "fibration")


class IncompleteSectionError(ValidationError):
    def __init__(self, missing):
        self.missing = sorted(missing, key=str)
        super().__init__(f"no moduli point assigned to fibers {self.missing}")


class StabilityViolation(ValidationError):
    def __init__(self, unstable):
        self.unstable = sorted(unstable, key=str)
        super().__init__(f"fibers {self.unstable} are not stable")


class WrongModeError(ValidationError):
    pass


@dataclass(frozen=True)
class FiberDescriptor:
    parameter: object
    genus: int
    singularities: int = 0
    stable: bool = True
    bundle_point: Mapping | None = None

    def __post_init__(self):
        if self.genus < 0 or self.singularities < 0:
            raise ValidationError(
                f"fiber {self.parameter!r}: genus and singularity count must be non-negative"
            )
        if self.bundle_point is not None:
            object.__setattr__(self, "bundle_point", MappingProxyType(dict(self.bundle_point)))


@dataclass(frozen=True)
class CurveFamily:
    mode: str
    fibers: tuple
    max_singularities: int | None = None

    def __init__(self, mode: str, fibers: Sequence[FiberDescriptor], max_singularities=None):
        if mode not in FAMILY_MODES:
            raise ValidationError(f"unknown family mode {mode!r}; expected one of {FAMILY_MODES}")
        fibers = tuple(fibers)
        if not fibers:
            raise ValidationError("a curve family needs at least one fiber")
        params = [f.parameter for f in fibers]
        if len(set(params)) != len(params):
            raise ValidationError("fiber parameters must be distinct")
        if mode == "constant-curve":
            kinds = {(f.genus, f.singularities) for f in fibers}
            if len(kinds) > 1:
                raise ValidationError(
                    f"constant-curve family has differing (genus, singularities): {sorted(kinds)}"
                )
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "fibers", fibers)
        object.__setattr__(self, "max_singularities", max_singularities)

    def __len__(self):
        return len(self.fibers)

    @property
    def parameters(self) -> list:
        return [f.parameter for f in self.fibers]

    def too_singular(self) -> list:
        """Fibers over the configured singularity threshold (empty when none is set)."""
        if self.max_singularities is None:
            return []
        return sorted((f.parameter for f in self.fibers
                       if f.singularities > self.max_singularities), key=str)


@dataclass(frozen=True)
class ModuliSection:
    family: CurveFamily
    assignment: Mapping

    def __getitem__(self, parameter):
        return self.assignment[parameter]


def build_section(family: CurveFamily, assignments: Mapping | None = None) -> ModuliSection:
    """Attach one moduli point to every fiber.

    ``assignments`` maps fiber parameters to payloads; fibers absent from it
    fall back to their own ``bundle_point``.
    """
    assignments = dict(assignments or {})
    unknown = set(assignments) - set(family.parameters)
    if unknown:
        raise ValidationError(f"assignments for unknown fibers {sorted(unknown, key=str)}")
    resolved = {}
    missing = []
    for fiber in family.fibers:
        point = assignments.get(fiber.parameter, fiber.bundle_point)
        if point is None:
            missing.append(fiber.parameter)
        else:
            resolved[fiber.parameter] = point
    if missing:
        raise IncompleteSectionError(missing)
    unstable = [f.parameter for f in family.fibers if not f.stable]
    if unstable:
        raise StabilityViolation(unstable)
    return ModuliSection(family, MappingProxyType(resolved))


def cycle_from_constant_family(section: ModuliSection) -> list:
    """The assigned points in fiber order (a multiset in one moduli space)."""
    if section.family.mode != "constant-curve":
        raise WrongModeError(
            f"cycle extraction needs a constant-curve family, not {section.family.mode!r}"
        )
    return [section.assignment[p] for p in section.family.parameters]


@dataclass(frozen=True)
class ParabolicData:
    weights: tuple
    multiplicities: tuple = field(default=())

    def __init__(self, weights, multiplicities=None):
        w = tuple(Fraction(x) for x in weights)
        m = tuple(int(k) for k in multiplicities) if multiplicities is not None else (1,) * len(w)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "multiplicities", m)


def validate_parabolic_data(p: ParabolicData) -> tuple[bool, list[str]]:
    """Check ``0 <= a_1 < a_2 < ... < a_r < 1`` and positive multiplicities."""
    problems = []
    w = p.weights
    if not w:
        problems.append("no weights given")
    for k, a in enumerate(w):
        if a < 0:
            problems.append(f"weight {k + 1} = {a} is negative")
        if a >= 1:
            problems.append(f"weight {k + 1} = {a} is not below 1")
    for k in range(len(w) - 1):
        if not w[k] < w[k + 1]:
            problems.append(f"weights {k + 1} and {k + 2} are not strictly increasing ({w[k]}, {w[k + 1]})")
    if len(p.multiplicities) != len(w):
        problems.append(
            f"{len(p.multiplicities)} multiplicities given for {len(w)} weights"
        )
    for k, m in enumerate(p.multiplicities):
        if m <= 0:
            problems.append(f"multiplicity {k + 1} = {m} is not positive")
    return not problems, problems
