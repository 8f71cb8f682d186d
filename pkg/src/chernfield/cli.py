"""Command-line entry point.

Each command writes three artifacts into ``<out>/<scenario name>/``:

* ``<command>.csv``: per-point rows ``x1,y1,x2,y2,quantity,convention,value_re,value_im``
* ``<command>_summary.csv``: aggregate rows ``key,quantity,convention,value_re,value_im``
* ``<command>.json``: the summary rows plus non-numeric flags

Every number in the JSON is a summary CSV row, so nothing is summary-only.
Exit status: 0 success, 1 validation failure, 2 numerical fault.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .curvature import chern_densities_from_form, curvature_at, curvature_form, integrate_density
from .errors import NumericalFault, ValidationError
from .formcalc import Basis
from .family import build_section, cycle_from_constant_family, validate_parabolic_data
from .lattice import (
    BoundQuery,
    hyperbolic_distance,
    in_k_plus,
    restriction_bound_satisfied,
)
from .metricfield import flatness_pattern_report
from .paperformulas import identity_residual, positivity_report, refinement_ladder
from .scenario import COMMANDS, Scenario, load_scenario, parse_conventions, parse_shape

OUT_ENV = "CHERNFIELD_OUT"
DEFAULT_OUT = "chernfield-out"
POINT_COLUMNS = ("x1", "y1", "x2", "y2", "quantity", "convention", "value_re", "value_im")
SUMMARY_COLUMNS = ("key", "quantity", "convention", "value_re", "value_im")
SLOT_NAMES = ("z1", "z2")
_DZ = (Basis.DZ1, Basis.DZ2)
_DZBAR = (Basis.DZBAR1, Basis.DZBAR2)


def _num(v) -> str:
    return repr(float(v))


def _shape_label(shape) -> str:
    return "x".join(str(int(n)) for n in shape)


@dataclass
class Artifacts:
    command: str
    scenario: str
    point_rows: list = field(default_factory=list)
    summary_rows: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)
    status: int = 0

    def points(self, coords, quantity, convention, values):
        """Append one row per point; ``coords`` is ``(N, 4)``, ``values`` is ``(N,)``."""
        coords = np.asarray(coords, dtype=float).reshape(-1, 4)
        values = np.broadcast_to(np.asarray(values, dtype=complex), coords.shape[:1])
        for p, v in zip(coords.tolist(), values.tolist()):
            self.point_rows.append(
                (_num(p[0]), _num(p[1]), _num(p[2]), _num(p[3]), quantity, convention,
                 _num(v.real), _num(v.imag))
            )

    def summary(self, key, quantity, convention, value):
        v = complex(value)
        self.summary_rows.append((str(key), quantity, convention, _num(v.real), _num(v.imag)))
        return v

    def as_json(self) -> dict:
        return {
            "command": self.command,
            "scenario": self.scenario,
            "status": self.status,
            "flags": self.flags,
            "summary": [dict(zip(SUMMARY_COLUMNS, row)) for row in self.summary_rows],
        }


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_artifacts(art: Artifacts, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        out_dir / f"{art.command}.csv": _csv_text(POINT_COLUMNS, art.point_rows),
        out_dir / f"{art.command}_summary.csv": _csv_text(SUMMARY_COLUMNS, art.summary_rows),
        out_dir / f"{art.command}.json": json.dumps(art.as_json(), indent=2, sort_keys=True) + "\n",
    }
    for path, text in files.items():
        path.write_text(text, encoding="utf-8")
    return list(files)


# options -----------------------------------------------------------------


@dataclass
class Options:
    grid: tuple | None = None
    tolerance: float | None = None
    conventions: tuple | None = None

    def resolution(self, sc: Scenario):
        return self.grid or sc.grid.resolution

    def tol(self, sc: Scenario):
        return sc.grid.tolerance if self.tolerance is None else self.tolerance

    def convs(self, sc: Scenario):
        return self.conventions or sc.run.conventions


def _validate_metric(sc: Scenario, art: Artifacts):
    info = sc.metric.validate(sc.patch, sc.grid.pd_resolution)
    art.summary("validation", "max_hermiticity_defect", "none", info["max_hermiticity_defect"])
    art.flags["positive_definite"] = info["positive_definite"]


# commands ----------------------------------------------------------------


def cmd_inspect(sc: Scenario, opts: Options) -> Artifacts:
    art = Artifacts("inspect", sc.name)
    _validate_metric(sc, art)
    rep = flatness_pattern_report(sc.metric, sc.patch, sc.grid.pattern_resolution, opts.tol(sc),
                                  step=sc.grid.fd_step)
    pts = rep.grid_points.reshape(-1, 4)
    valid = ~np.isnan(rep.per_point["z1z1"].ravel())
    for name, per in rep.per_point.items():
        art.points(pts[valid], f"{name}_max_abs", "none", per.ravel()[valid])
    for name, block in rep.blocks.items():
        art.summary("pattern", f"{name}_max_abs", "none", block.max_abs)
        verdict = "reported" if block.passed is None else ("pass" if block.passed else "FAIL")
        art.lines.append(f"  {name:6s} max|d2h| = {block.max_abs:.6e}  {verdict}")
    art.summary("pattern", "points", "none", rep.points)
    art.summary("pattern", "skipped_points", "none", rep.skipped)
    art.summary("pattern", "tolerance", "none", rep.tolerance)
    art.flags.update(mode=rep.mode, pattern_passed=rep.passed)
    art.lines.insert(0, f"pattern ({rep.mode} mode): {'passed' if rep.passed else 'failed'}")
    return art


def cmd_curvature(sc: Scenario, opts: Options) -> Artifacts:
    art = Artifacts("curvature", sc.name)
    _validate_metric(sc, art)
    points = np.array(sc.run.points or [sc.patch.center.tolist()], dtype=float)
    tensor = curvature_at(sc.metric, points, step=sc.grid.fd_step, patch=sc.patch)
    omega = curvature_form(tensor)
    r = tensor.rank
    for n, p in enumerate(points):
        for i in range(r):
            for j in range(r):
                for a in range(2):
                    for b in range(2):
                        slot = f"{SLOT_NAMES[a]}_{SLOT_NAMES[b]}bar"
                        art.points(p, f"R_raised_{i + 1}{j + 1}_{slot}", "none",
                                   tensor.raised[n, i, j, a, b])
                        art.points(p, f"R_lowered_{j + 1}{i + 1}_{slot}", "none",
                                   tensor.lowered[n, j, i, a, b])
    for conv in opts.convs(sc):
        dens = chern_densities_from_form(omega, conv)
        art.points(points, "c2_density", conv, dens.c2)
        if conv == opts.convs(sc)[0]:
            for a in range(2):
                for b in range(2):
                    art.points(points, f"c1_{SLOT_NAMES[a]}_{SLOT_NAMES[b]}bar", "none",
                               dens.c1[(_DZ[a], _DZBAR[b])])
    defect = tensor.lowering_defect()
    art.summary("consistency", "lowering_defect", "none", defect)
    art.summary("consistency", "max_hermitian_defect", "none", np.max(tensor.hermitian_defect()))
    art.lines.append(f"curvature at {len(points)} point(s); max |R| = "
                     f"{np.max(np.abs(tensor.raised)):.6e}")
    art.summary("tensor", "max_abs_raised", "none", np.max(np.abs(tensor.raised)))
    return art


def cmd_c2(sc: Scenario, opts: Options) -> Artifacts:
    art = Artifacts("c2", sc.name)
    _validate_metric(sc, art)
    shape = opts.resolution(sc)
    points, _ = sc.patch.grid(shape)
    tensor = curvature_at(sc.metric, points, step=sc.grid.fd_step, patch=sc.patch, strict=False)
    omega = curvature_form(tensor)
    mask = tensor.valid.ravel()
    flat_pts = points.reshape(-1, 4)[mask]
    for conv in opts.convs(sc):
        dens = np.broadcast_to(chern_densities_from_form(omega, conv).c2, tensor.valid.shape)
        art.points(flat_pts, "c2_density", conv, dens.ravel()[mask])
        res = integrate_density(sc.metric, sc.patch, shape, f"c2:{conv}", step=sc.grid.fd_step)
        key = _shape_label(res.shape)
        art.summary(key, "c2_integral", conv, res.value)
        art.summary(key, "error_estimate", conv, res.error)
        art.summary(_shape_label(res.coarse_shape), "c2_integral", conv, res.coarse_value)
        art.summary(key, "failed_points", conv, res.failed)
        art.lines.append(f"c2 [{conv}] on {key}: {res.value.real:.9e} "
                         f"{res.value.imag:+.3e}i  (error ~ {res.error:.2e})")
    return art


def cmd_verify(sc: Scenario, opts: Options) -> Artifacts:
    art = Artifacts("verify", sc.name)
    _validate_metric(sc, art)
    convs = opts.convs(sc)
    finest = opts.resolution(sc)
    ladder = refinement_ladder(finest, max(3, sc.grid.levels), sc.patch.periodic)
    rep = identity_residual(sc.metric, sc.patch, ladder, convs, step=sc.grid.fd_step,
                            pattern_tolerance=opts.tol(sc),
                            pattern_resolution=sc.grid.pattern_resolution)
    art.points(rep.points, "det_formula_density", "none", rep.formula)
    for conv in convs:
        art.points(rep.points, "c2_density", conv, rep.oracle[conv])
        art.points(rep.points, "residual", conv, rep.residual[conv])
    art.lines.append(f"flatness pattern: {'in hypothesis' if rep.in_hypothesis else 'OUTSIDE hypothesis'}")
    art.lines.append(f"  {'grid':>14s} {'det formula':>16s} " +
                     " ".join(f"{'c2 ' + c:>16s} {'max resid ' + c:>20s}" for c in convs))
    for row in rep.table:
        key = _shape_label(row["grid"])
        art.summary(key, "det_formula_integral", "none", row["formula_integral"])
        art.summary(key, "failed_points", "none", row["failed_points"])
        cells = []
        for conv in convs:
            art.summary(key, "c2_integral", conv, row["oracle_integral"][conv])
            art.summary(key, "residual_integral", conv, row["residual_integral"][conv])
            art.summary(key, "max_residual", conv, row["max_residual"][conv])
            cells.append(f"{row['oracle_integral'][conv].real:16.9e} {row['max_residual'][conv]:20.3e}")
        art.lines.append(f"  {key:>14s} {row['formula_integral'].real:16.9e} " + " ".join(cells))
    tol = opts.tol(sc)
    art.flags["in_hypothesis"] = rep.in_hypothesis
    art.flags["converged"] = rep.converged(tol)
    art.flags["convention_gap"] = rep.gap_flags(sc.grid.zero_tolerance)
    for conv, gap in art.flags["convention_gap"].items():
        if gap:
            art.lines.append(f"  convention gap [{conv}]: det formula and c2 differ "
                             f"(max residual {rep.max_residual[conv]:.3e})")
    pos = positivity_report(sc.metric, sc.patch, finest, convs, step=sc.grid.fd_step,
                            zero_tolerance=sc.grid.zero_tolerance)
    key = _shape_label(pos.grid)
    art.summary(key, "positivity_integral", "none", pos.formula_integral)
    art.summary(key, "positivity_error_estimate", "none", pos.error_estimate)
    art.flags["positivity_sign"] = pos.sign
    art.flags["imaginary_ok"] = pos.imaginary_ok
    art.lines.append(f"det formula integral on {key}: {pos.formula_integral.real:.9e} "
                     f"{pos.formula_integral.imag:+.3e}i  sign={pos.sign}")
    return art


def _bound_rows(art: Artifacts, query: BoundQuery):
    res = restriction_bound_satisfied(query)
    key = f"r={query.r};R={query.R};delta={query.delta};n={query.n}"
    art.summary(key, "threshold", "none", float(res.threshold))
    art.summary(key, "minimal_n", "none", res.minimal_n)
    art.summary(key, "satisfied", "none", int(res.satisfied))
    art.lines.append(str(res))
    return res


def cmd_bound(sc: Scenario | None, opts: Options, query: BoundQuery | None = None) -> Artifacts:
    art = Artifacts("bound", sc.name if sc else "bound")
    results = []
    if query is not None:
        results.append(_bound_rows(art, query))
    lat = sc.lattice if sc else None
    if lat is not None:
        for q in lat.bounds:
            results.append(_bound_rows(art, q))
        for name, cls in lat.classes.items():
            art.summary(name, "self_intersection", "none", float(lat.form.square(cls)))
        for a, b in lat.distances:
            d = hyperbolic_distance(lat.classes[a], lat.classes[b], lat.form)
            art.summary(f"{a}-{b}", "hyperbolic_distance", "none", d)
            art.lines.append(f"d({a}, {b}) = {d:.9f}")
        if lat.kplus:
            if not lat.ample:
                raise ValidationError("[lattice] kplus needs at least one ample class")
            samples = [lat.classes[n] for n in lat.ample]
            for name in lat.kplus:
                inside = in_k_plus(lat.classes[name], lat.form, samples)
                art.summary(name, "in_k_plus", "none", int(inside))
                art.lines.append(f"{name} in K+: {'yes' if inside else 'no'}")
    if not results and lat is None:
        raise ValidationError("bound needs --r/--R/--delta/--n or a scenario with a [lattice] section")
    art.flags["all_satisfied"] = all(r.satisfied for r in results)
    return art


def cmd_family(sc: Scenario, opts: Options) -> Artifacts:
    art = Artifacts("family", sc.name)
    fam = sc.family.family
    art.flags["mode"] = fam.mode
    problems = []
    art.summary("family", "fibers", "none", len(fam))
    too = fam.too_singular()
    if too:
        problems.append(f"fibers over the singularity limit: {too}")
    try:
        section = build_section(fam)
        art.flags["section_complete"] = True
        if fam.mode == "constant-curve":
            cycle = cycle_from_constant_family(section)
            art.summary("cycle", "points", "none", len(cycle))
            art.flags["cycle"] = [dict(p) for p in cycle]
    except ValidationError as exc:
        art.flags["section_complete"] = False
        problems.append(str(exc))
    if sc.family.parabolic is not None:
        ok, msgs = validate_parabolic_data(sc.family.parabolic)
        art.flags["parabolic_valid"] = ok
        problems.extend(msgs)
    art.flags["problems"] = problems
    art.lines.append("family valid" if not problems else "family INVALID")
    art.lines.extend(f"  {p}" for p in problems)
    art.status = 1 if problems else 0
    return art


def cmd_report(out_dir: Path, name: str) -> Artifacts:
    art = Artifacts("report", name)
    bundle = {}
    for path in sorted(out_dir.glob("*.json")):
        if path.stem == "report":
            continue
        data = json.loads(path.read_text(encoding="utf-8"))
        bundle[path.stem] = data
        for row in data.get("summary", []):
            art.summary_rows.append((f"{path.stem}:{row['key']}", row["quantity"], row["convention"],
                                     row["value_re"], row["value_im"]))
        art.lines.append(f"{path.stem:10s} status={data.get('status')}")
    if not bundle:
        raise ValidationError(f"no command outputs found in {out_dir}")
    art.flags["commands"] = sorted(bundle)
    art.flags["statuses"] = {k: v.get("status") for k, v in bundle.items()}
    art.flags["details"] = {k: v.get("flags", {}) for k, v in bundle.items()}
    return art


# driver ------------------------------------------------------------------


def run_command(command: str, sc: Scenario | None, opts: Options, out_root: Path,
                query: BoundQuery | None = None) -> int:
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    out_dir = out_root / (sc.name if sc else "bound")
    if command == "report":
        art = cmd_report(out_dir, sc.name if sc else "bound")
    elif command == "bound":
        art = cmd_bound(sc, opts, query)
    else:
        if sc is None:
            raise ValidationError(f"command {command!r} needs --scenario")
        sc.require(command)
        art = {"inspect": cmd_inspect, "curvature": cmd_curvature, "c2": cmd_c2,
               "verify": cmd_verify, "family": cmd_family}[command](sc, opts)
    write_artifacts(art, out_dir)
    print(f"[{art.scenario}] {command}")
    for line in art.lines:
        print(line)
    return art.status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chernfield", allow_abbrev=False,
                     description="Curvature, Chern densities and determinant-formula checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS + ("run",),
                        help="command to run; 'run' executes the scenario's [run] commands then 'report'")
    parser.add_argument("--scenario", type=Path, help="scenario file (INI sections)")
    parser.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    parser.add_argument("--grid-override", metavar="N1xN2xN3xN4", help="finest grid resolution")
    parser.add_argument("--tolerance", type=float, help="flatness/convergence tolerance")
    parser.add_argument("--convention", choices=("paper", "chernweil", "both"))
    bound = parser.add_argument_group("bound")
    bound.add_argument("--r", type=int, help="rank")
    bound.add_argument("--R", dest="R", help="constant R (positive rational)")
    bound.add_argument("--delta", help="discriminant value (non-negative rational)")
    bound.add_argument("--n", type=int, help="multiple n")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_root = args.out or Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)
    try:
        opts = Options(
            grid=parse_shape(args.grid_override) if args.grid_override else None,
            tolerance=args.tolerance,
            conventions=parse_conventions(args.convention) if args.convention else None,
        )
        sc = load_scenario(args.scenario) if args.scenario else None
        query = None
        bound_args = (args.r, args.R, args.delta, args.n)
        if any(v is not None for v in bound_args):
            if any(v is None for v in bound_args):
                raise ValidationError("bound needs all of --r, --R, --delta and --n")
            try:
                query = BoundQuery(*bound_args)
            except (ValueError, ZeroDivisionError) as exc:
                raise ValidationError(f"bad bound arguments: {exc}") from exc
        if args.command == "run":
            if sc is None:
                raise ValidationError("run needs --scenario")
            if not sc.run.commands:
                raise ValidationError(f"{sc.source}: [run] lists no commands")
            status = 0
            for command in sc.run.commands:
                status = max(status, run_command(command, sc, opts, out_root, query))
            run_command("report", sc, opts, out_root)
            return status
        return run_command(args.command, sc, opts, out_root, query)
    except NumericalFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
