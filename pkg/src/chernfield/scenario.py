"""Scenario files: INI-style sections describing one run.

Sections: ``[scenario]``, ``[metric]``, ``[patch]``, ``[grid]``, ``[run]``,
``[lattice]``, ``[family]`` plus one ``[fiber <name>]`` per family member.
See the README for the full key list.  Errors carry ``file:line:column``.
"""
from __future__ import annotations

import configparser
import re
from importlib import resources
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ExpressionSyntaxError, ValidationError
from .family import CurveFamily, FiberDescriptor, ParabolicData
from .lattice import BoundQuery, IntersectionForm, LatticeClass
from .metricfield import HermitianMetricField, Patch, parse
from .metricfield.metric import grid_shape

__all__ = ["ScenarioError", "Scenario", "GridSpec", "RunSpec", "LatticeSpec", "FamilySpec",
           "load_scenario", "parse_scenario", "parse_shape", "shipped_scenarios", "COMMANDS"]

COMMANDS = ("inspect", "curvature", "c2", "verify", "bound", "family", "report")
_NEEDS = {
    "inspect": ("metric", "patch"),
    "curvature": ("metric",),
    "c2": ("metric", "patch"),
    "verify": ("metric", "patch"),
    "family": ("family",),
}
_AXES = ("x1", "y1", "x2", "y2")


class ScenarioError(ValidationError):
    def __init__(self, message, source="<scenario>", line=None, column=None):
        self.source, self.line, self.column = source, line, column
        loc = source
        if line is not None:
            loc += f":{line}"
            if column is not None:
                loc += f":{column}"
        super().__init__(f"{loc}: {message}")


@dataclass
class GridSpec:
    resolution: tuple = (8, 8, 8, 8)
    levels: int = 3
    fd_step: float = 1e-3
    tolerance: float = 1e-6
    pattern_resolution: tuple = (5, 5, 5, 5)
    pd_resolution: tuple = (3, 3, 3, 3)
    zero_tolerance: float = 1e-12


@dataclass
class RunSpec:
    commands: list = field(default_factory=list)
    conventions: tuple = ("paper", "chernweil")
    points: list = field(default_factory=list)


@dataclass
class LatticeSpec:
    form: IntersectionForm
    classes: dict
    ample: list
    distances: list
    kplus: list
    bounds: list


@dataclass
class FamilySpec:
    family: CurveFamily
    parabolic: ParabolicData | None


@dataclass
class Scenario:
    name: str
    source: str
    metric: HermitianMetricField | None = None
    patch: Patch | None = None
    grid: GridSpec = field(default_factory=GridSpec)
    run: RunSpec = field(default_factory=RunSpec)
    lattice: LatticeSpec | None = None
    family: FamilySpec | None = None

    def require(self, command: str) -> None:
        for section in _NEEDS.get(command, ()):
            if getattr(self, section) is None:
                raise ScenarioError(f"command {command!r} needs a [{section}] section", self.source)


def parse_shape(text: str) -> tuple:
    parts = [p for p in re.split(r"[x,\s]+", text.strip().lower()) if p]
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise ValidationError(f"bad grid resolution {text!r}; expected e.g. 16 or 8x8x8x8")
    if len(values) == 1:
        values *= 4
    return grid_shape(values)


def _unquote(text: str) -> tuple[str, int]:
    """Strip matching quotes; also return how many leading characters were removed."""
    raw = text
    text = text.strip()
    lead = len(raw) - len(raw.lstrip())
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1], lead + 1
    return text, lead


class _Reader:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.lines = text.splitlines()
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=source)
        except configparser.MissingSectionHeaderError as exc:
            raise ScenarioError("file must start with a [section] header", source, exc.lineno, 1)
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else None
            raise ScenarioError("malformed line", source, lineno, 1)
        except configparser.Error as exc:
            lineno = getattr(exc, "lineno", None)
            raise ScenarioError(exc.message if hasattr(exc, "message") else str(exc), source,
                                lineno)

    def locate(self, section: str, key: str) -> tuple[int | None, int | None]:
        """Line and column (1-based) of the value of ``key`` in ``section``."""
        current = None
        pattern = re.compile(r"^\s*" + re.escape(key) + r"\s*[=:]")
        for n, line in enumerate(self.lines, start=1):
            stripped = line.strip()
            if stripped.startswith("[") and stripped.endswith("]"):
                current = stripped[1:-1].strip()
                continue
            if current == section:
                m = pattern.match(line)
                if m:
                    rest = line[m.end():]
                    return n, m.end() + len(rest) - len(rest.lstrip()) + 1
        return None, None

    def fail(self, section, key, message, offset=0):
        line, col = self.locate(section, key)
        if col is not None:
            col += offset
        raise ScenarioError(f"[{section}] {key}: {message}", self.source, line, col)

    def has(self, section):
        return self.cp.has_section(section)

    def get(self, section, key, default=None):
        if not self.cp.has_option(section, key):
            return default
        return self.cp.get(section, key)

    def number(self, section, key, default, kind=float):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return kind(_unquote(raw)[0])
        except ValueError:
            self.fail(section, key, f"expected a {kind.__name__}, got {raw!r}")

    def check_keys(self, section, allowed, prefixes=()):
        for key in self.cp.options(section):
            if key not in allowed and not key.startswith(tuple(prefixes)):
                self.fail(section, key, "unknown key")


def _split_list(text: str) -> list[str]:
    return [p.strip() for p in re.split(r"[,\s]+", text.strip()) if p.strip()]


def _read_metric(rd: _Reader) -> HermitianMetricField:
    sec = "metric"
    rank = rd.number(sec, "rank", None, int)
    if rank is None or rank < 1:
        rd.fail(sec, "rank", "rank must be a positive integer")
    mode = _unquote(rd.get(sec, "mode", "product"))[0]
    allowed = {"rank", "mode"}
    entries = {}
    for i in range(rank):
        for j in range(rank):
            key = f"h{i + 1}{j + 1}"
            allowed.add(key)
            raw = rd.get(sec, key)
            if raw is None:
                continue
            text, offset = _unquote(raw)
            try:
                entries[(i, j)] = parse(text)
            except ExpressionSyntaxError as exc:
                rd.fail(sec, key, str(exc).split(" (column")[0],
                        offset + (exc.column or 0) + len(text) - len(text.lstrip()))
    rd.check_keys(sec, allowed)
    for i in range(rank):
        if (i, i) not in entries:
            rd.fail(sec, "rank", f"diagonal entry h{i + 1}{i + 1} is missing")
    try:
        return HermitianMetricField(entries, mode=mode)
    except ValidationError as exc:
        rd.fail(sec, "mode", str(exc))


def _read_patch(rd: _Reader) -> Patch:
    sec = "patch"
    rd.check_keys(sec, set(_AXES) | {"periodic", "margin"})
    ranges = []
    for axis in _AXES:
        raw = rd.get(sec, axis, "0, 1")
        parts = _split_list(_unquote(raw)[0])
        try:
            lo, hi = (float(p) for p in parts)
        except ValueError:
            rd.fail(sec, axis, f"expected 'low, high', got {raw!r}")
        ranges.append((lo, hi))
    flags = _split_list(_unquote(rd.get(sec, "periodic", "none"))[0].lower())
    periodic = [False, False]
    for flag in flags:
        if flag in ("none", "no", "false"):
            continue
        if flag in ("both", "all"):
            periodic = [True, True]
        elif flag in ("z1", "z2"):
            periodic[int(flag[1]) - 1] = True
        else:
            rd.fail(sec, "periodic", f"unknown periodicity flag {flag!r}; use z1, z2, both or none")
    margin = rd.number(sec, "margin", 0.0)
    try:
        return Patch(tuple(ranges), tuple(periodic), margin)
    except ValidationError as exc:
        rd.fail(sec, "x1", str(exc))


def _read_grid(rd: _Reader) -> GridSpec:
    sec = "grid"
    spec = GridSpec()
    if not rd.has(sec):
        return spec
    rd.check_keys(sec, {"resolution", "levels", "fd_step", "tolerance", "pattern_resolution",
                        "pd_resolution", "zero_tolerance"})
    for key in ("resolution", "pattern_resolution", "pd_resolution"):
        raw = rd.get(sec, key)
        if raw is not None:
            try:
                shape = parse_shape(_unquote(raw)[0])
            except ValidationError as exc:
                rd.fail(sec, key, str(exc))
            if key == "resolution" and min(shape) < 2:
                rd.fail(sec, key, "resolutions must be at least 2")
            setattr(spec, key, shape)
    spec.levels = rd.number(sec, "levels", spec.levels, int)
    spec.fd_step = rd.number(sec, "fd_step", spec.fd_step)
    spec.tolerance = rd.number(sec, "tolerance", spec.tolerance)
    spec.zero_tolerance = rd.number(sec, "zero_tolerance", spec.zero_tolerance)
    if spec.fd_step <= 0:
        rd.fail(sec, "fd_step", "must be positive")
    if spec.levels < 1:
        rd.fail(sec, "levels", "must be at least 1")
    return spec


def parse_conventions(text: str) -> tuple:
    text = text.strip().lower()
    if text in ("both", "all", ""):
        return ("paper", "chernweil")
    out = tuple(_split_list(text))
    for c in out:
        if c not in ("paper", "chernweil"):
            raise ValidationError(f"unknown convention {c!r}; use paper, chernweil or both")
    return out


def _read_run(rd: _Reader) -> RunSpec:
    sec = "run"
    spec = RunSpec()
    if not rd.has(sec):
        return spec
    rd.check_keys(sec, {"commands", "conventions", "points"})
    commands = _split_list(_unquote(rd.get(sec, "commands", ""))[0])
    for c in commands:
        if c not in COMMANDS:
            rd.fail(sec, "commands", f"unknown command {c!r}")
    spec.commands = commands
    try:
        spec.conventions = parse_conventions(_unquote(rd.get(sec, "conventions", "both"))[0])
    except ValidationError as exc:
        rd.fail(sec, "conventions", str(exc))
    raw = rd.get(sec, "points")
    if raw:
        for chunk in _unquote(raw)[0].split(";"):
            if not chunk.strip():
                continue
            try:
                point = [float(v) for v in _split_list(chunk)]
            except ValueError:
                rd.fail(sec, "points", f"bad point {chunk.strip()!r}")
            if len(point) != 4:
                rd.fail(sec, "points", f"point {chunk.strip()!r} needs four coordinates")
            spec.points.append(point)
    return spec


def _parse_rows(text: str) -> list[list[str]]:
    return [_split_list(row) for row in text.split(";") if row.strip()]


def _read_lattice(rd: _Reader) -> LatticeSpec:
    sec = "lattice"
    rd.check_keys(sec, {"form", "classes", "ample", "distances", "kplus", "bounds"})
    raw = rd.get(sec, "form")
    if raw is None:
        rd.fail(sec, "form", "an intersection form is required")
    try:
        form = IntersectionForm([[int(v) for v in row] for row in _parse_rows(_unquote(raw)[0])])
    except (ValueError, ValidationError) as exc:
        rd.fail(sec, "form", str(exc))
    classes = {}
    for item in _unquote(rd.get(sec, "classes", ""))[0].split(";"):
        if not item.strip():
            continue
        if ":" not in item:
            rd.fail(sec, "classes", f"expected 'NAME: c1, c2, ...', got {item.strip()!r}")
        name, coords = item.split(":", 1)
        try:
            classes[name.strip()] = LatticeClass(Fraction(c) for c in _split_list(coords))
        except ValueError as exc:
            rd.fail(sec, "classes", str(exc))
    for name, cls in classes.items():
        if len(cls) != form.dimension:
            rd.fail(sec, "classes", f"class {name} has {len(cls)} coordinates, form has {form.dimension}")

    def names(key):
        out = _split_list(_unquote(rd.get(sec, key, ""))[0])
        for n in out:
            if n not in classes:
                rd.fail(sec, key, f"unknown class {n!r}")
        return out

    ample = names("ample")
    kplus = names("kplus")
    distances = []
    for pair in _unquote(rd.get(sec, "distances", ""))[0].split(";"):
        if not pair.strip():
            continue
        parts = _split_list(pair)
        if len(parts) != 2 or any(p not in classes for p in parts):
            rd.fail(sec, "distances", f"expected two class names, got {pair.strip()!r}")
        distances.append(tuple(parts))
    bounds = []
    for chunk in _unquote(rd.get(sec, "bounds", ""))[0].split(";"):
        if not chunk.strip():
            continue
        kv = dict(part.split("=", 1) for part in chunk.split() if "=" in part)
        try:
            bounds.append(BoundQuery(kv["r"], Fraction(kv["R"]), Fraction(kv["delta"]), kv["n"]))
        except (KeyError, ValueError, ValidationError) as exc:
            rd.fail(sec, "bounds", f"bad bound query {chunk.strip()!r}: {exc}")
    return LatticeSpec(form, classes, ample, distances, kplus, bounds)


_TRUE = {"yes", "true", "1", "on"}
_FALSE = {"no", "false", "0", "off"}


def _read_family(rd: _Reader) -> FamilySpec:
    sec = "family"
    rd.check_keys(sec, {"mode", "fibers", "max_singularities", "weights", "multiplicities"})
    mode = _unquote(rd.get(sec, "mode", "constant-curve"))[0]
    names = _split_list(_unquote(rd.get(sec, "fibers", ""))[0])
    if not names:
        rd.fail(sec, "fibers", "list at least one fiber")
    fibers = []
    for name in names:
        fsec = f"fiber {name}"
        if not rd.has(fsec):
            rd.fail(sec, "fibers", f"missing section [{fsec}]")
        rd.check_keys(fsec, {"genus", "singularities", "stable"}, prefixes=("point.",))
        genus = rd.number(fsec, "genus", 0, int)
        sing = rd.number(fsec, "singularities", 0, int)
        stable_raw = _unquote(rd.get(fsec, "stable", "yes"))[0].lower()
        if stable_raw not in _TRUE | _FALSE:
            rd.fail(fsec, "stable", f"expected yes/no, got {stable_raw!r}")
        payload = {k[len("point."):]: _unquote(v)[0] for k, v in rd.cp.items(fsec)
                   if k.startswith("point.")}
        try:
            fibers.append(FiberDescriptor(name, genus, sing, stable_raw in _TRUE,
                                          payload or None))
        except ValidationError as exc:
            rd.fail(fsec, "genus", str(exc))
    max_sing = rd.number(sec, "max_singularities", None, int)
    try:
        family = CurveFamily(mode, fibers, max_sing)
    except ValidationError as exc:
        rd.fail(sec, "mode", str(exc))
    parabolic = None
    raw = rd.get(sec, "weights")
    if raw is not None:
        try:
            weights = [Fraction(w) for w in _split_list(_unquote(raw)[0])]
            mraw = rd.get(sec, "multiplicities")
            mult = [int(m) for m in _split_list(_unquote(mraw)[0])] if mraw else None
        except ValueError as exc:
            rd.fail(sec, "weights", str(exc))
        parabolic = ParabolicData(weights, mult)
    return FamilySpec(family, parabolic)


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    rd = _Reader(text, source)
    known = {"scenario", "metric", "patch", "grid", "run", "lattice", "family"}
    for section in rd.cp.sections():
        if section not in known and not section.startswith("fiber "):
            raise ScenarioError(f"unknown section [{section}]", source,
                                _section_line(rd.lines, section))
    name = _unquote(rd.get("scenario", "name", Path(source).stem))[0]
    sc = Scenario(name=name, source=source)
    if rd.has("metric"):
        sc.metric = _read_metric(rd)
    if rd.has("patch"):
        sc.patch = _read_patch(rd)
    elif sc.metric is not None:
        sc.patch = Patch()
    sc.grid = _read_grid(rd)
    sc.run = _read_run(rd)
    if rd.has("lattice"):
        sc.lattice = _read_lattice(rd)
    if rd.has("family"):
        sc.family = _read_family(rd)
    return sc


def _section_line(lines, section):
    for n, line in enumerate(lines, start=1):
        if line.strip() == f"[{section}]":
            return n
    return None


def shipped_scenarios() -> dict[str, Path]:
    """Scenario files bundled with the package, keyed by file stem."""
    base = resources.files("chernfield") / "scenarios"
    return {Path(p.name).stem: Path(str(p)) for p in sorted(base.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".ini")}


def load_scenario(path) -> Scenario:
    """Load a scenario file; a bare name like ``rank1_mixed`` selects a shipped one."""
    path = Path(path)
    if not path.exists() and path.suffix == "" and str(path) in shipped_scenarios():
        path = shipped_scenarios()[str(path)]
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", str(path))
    return parse_scenario(text, str(path))
