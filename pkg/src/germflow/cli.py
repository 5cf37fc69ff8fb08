"""Command line interface: ``germflow <command> SYSTEM [options]``.

Exit codes: 0 verification passed (or command succeeded), 1 verification
failed, 2 bad input or usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import errors
from .flow_map import FlowOptions, VectorFieldJet, flow_jet
from .jet_core import DEFAULT_TOLERANCES, MapJet, ToleranceProfile, map_compose, map_inverse, map_iterate
from .jetio import JetDocumentError, dump_jet, load_jet
from .normal_form import normalize
from .numeric_sim import (
    DEFAULT_PERIOD_TOL,
    DEFAULT_RETURN_TOL,
    DEFAULT_TOL,
    EvaluableField,
    integrate,
    isochrony_scan,
)
from .system import SystemSpec, parse_complex_list, parse_system
from .theorems import compare_flow_closed_form, verify_isochronous_center, verify_iteration_formula

TOL_PROFILE_ENV = "GERMFLOW_TOL_PROFILE"
DEFAULT_DEGREE = 8
DEFAULT_RADIUS = 1.0

# raised when the mathematics says no, as opposed to malformed input
_VERDICT_ERRORS = (
    errors.HypothesisViolated,
    errors.PrimitivityFailed,
    errors.NonScalarLinearPart,
    errors.NearResonance,
    errors.SeriesNotConverged,
    errors.FlowPostconditionError,
    errors.DomainExit,
    errors.StepUnderflow,
)


class UsageError(Exception):
    pass


def load_tolerances(path: str | None) -> ToleranceProfile:
    path = path or os.environ.get(TOL_PROFILE_ENV)
    if not path:
        return DEFAULT_TOLERANCES
    try:
        with open(path) as fh:
            return ToleranceProfile.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot load tolerance profile {path}: {exc}") from None


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(str(exc)) from None


def _system(args, kind: str | None = None, path: str | None = None) -> SystemSpec:
    spec = parse_system(_read(path or args.system))
    if kind is not None and spec.kind != kind:
        raise UsageError(f"{args.command} expects a '{kind}:' system, got '{spec.kind}:'")
    return spec


def _degree(args, spec: SystemSpec) -> int:
    if args.degree is not None:
        return args.degree
    return spec.degree if spec.degree is not None else DEFAULT_DEGREE


def _fmt_num(c: complex) -> str:
    if c.imag == 0:
        return f"{c.real:.10g}"
    return f"({c.real:.10g}{'+' if c.imag >= 0 else '-'}{abs(c.imag):.10g}i)"


def render_map(f: MapJet, variables: Sequence[str], tol: ToleranceProfile) -> list[str]:
    lines = []
    for name, comp in zip(variables, f):
        terms = []
        for alpha, c in comp.items():
            if tol.is_zero(c):
                continue
            mono = "*".join(
                v if e == 1 else f"{v}^{e}" for v, e in zip(variables, alpha) if e
            )
            terms.append(_fmt_num(c) + ("*" + mono if mono else ""))
        lines.append(f"  {name}' = " + (" + ".join(terms) if terms else "0"))
    return lines


class Output:
    def __init__(self, args):
        self.text: list[str] = []
        self.doc: str | None = None
        self.out = getattr(args, "out", None)

    def line(self, s: str = ""):
        self.text.append(s)

    def report(self, data: dict):
        self.doc = json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"

    def flush(self):
        sys.stdout.write("\n".join(self.text) + ("\n" if self.text else ""))
        if self.out and self.doc is not None:
            if self.out == "-":
                sys.stdout.write(self.doc)
            else:
                with open(self.out, "w") as fh:
                    fh.write(self.doc)


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def _emit_jet(out: Output, f: MapJet, spec: SystemSpec, tol):
    out.line(f"n = {f.n}, degree = {f.D}")
    for s in render_map(f, spec.variables, tol):
        out.line(s)
    out.doc = dump_jet(f, tol, spec.variables)


def cmd_jet_compose(args, tol, out):
    outer = _system(args, "map")
    inner = _system(args, "map", args.inner)
    if outer.variables != inner.variables:
        raise UsageError("outer and inner systems declare different variables")
    D = _degree(args, outer)
    _emit_jet(out, map_compose(outer.to_mapjet(D), inner.to_mapjet(D)), outer, tol)
    return 0


def cmd_iterate(args, tol, out):
    spec = _system(args, "map")
    _emit_jet(out, map_iterate(spec.to_mapjet(_degree(args, spec)), args.k), spec, tol)
    return 0


def cmd_inverse(args, tol, out):
    spec = _system(args, "map")
    _emit_jet(out, map_inverse(spec.to_mapjet(_degree(args, spec)), tol), spec, tol)
    return 0


def cmd_normal_form(args, tol, out):
    spec = _system(args, "map")
    res = normalize(spec.to_mapjet(_degree(args, spec)), args.order, tol)
    out.line(f"normal form through order {args.order}")
    out.line("g:")
    for s in render_map(res.g, spec.variables, tol):
        out.line(s)
    out.line("h:")
    for s in render_map(res.h, spec.variables, tol):
        out.line(s)
    kept = ", ".join(f"({j}, {list(a)})" for j, a in res.resonant_monomials) or "none"
    out.line(f"resonant monomials: {kept}")
    out.line(f"conjugacy residual: {res.conjugacy_residual:.3e}")
    ok = res.conjugacy_residual < tol.residual
    out.line("PASS" if ok else "FAIL")
    doc = res.to_dict()
    doc["g"] = json.loads(dump_jet(res.g, tol, spec.variables))
    doc["h"] = json.loads(dump_jet(res.h, tol, spec.variables))
    doc["h_inv"] = json.loads(dump_jet(res.h_inv, tol, spec.variables))
    doc["passed"] = ok
    out.report(doc)
    return 0 if ok else 1


def _flow_opts(args) -> FlowOptions:
    return FlowOptions(substeps=args.substeps if args.substeps else "auto")


def cmd_flow_jet(args, tol, out):
    spec = _system(args, "field")
    V = VectorFieldJet(spec.to_mapjet(_degree(args, spec)))
    res = flow_jet(V, args.t, _flow_opts(args), tol)
    out.line(f"time-{args.t:g} map ({res.substeps_used} substeps, {res.lie_terms_used} Lie terms, "
             f"linear part error {res.linear_part_error:.3e})")
    _emit_jet(out, res.phi, spec, tol)
    return 0


def cmd_verify_iteration(args, tol, out):
    spec = _system(args, "map")
    rep = verify_iteration_formula(spec.to_mapjet(_degree(args, spec)), args.m, tol)
    out.line(f"iteration formula, m = {rep.m}, lambda = {_fmt_num(rep.lam)}")
    for d, v in rep.residual_by_degree.items():
        out.line(f"  degree {d}: max |coef(f^m - id)| = {v:.3e}")
    for d, v in rep.higher_degrees.items():
        out.line(f"  degree {d}: {v:.3e} (not judged)")
    out.line("PASS" if rep.passed else "FAIL")
    out.report(rep.to_dict())
    return 0 if rep.passed else 1


def cmd_verify_center(args, tol, out):
    spec = _system(args, "field")
    V = VectorFieldJet(spec.to_mapjet(_degree(args, spec)))
    rep = verify_isochronous_center(V, args.omega, _flow_opts(args), tol, args.threshold)
    out.line(f"isochronous center, omega = {rep.omega:g}, period T = {rep.period:.12g}")
    for d, v in rep.residual_by_degree.items():
        out.line(f"  degree {d}: max |coef(Phi_T - id)| = {v:.3e}")
    out.line("PASS" if rep.passed else "FAIL")
    out.report(rep.to_dict())
    return 0 if rep.passed else 1


def cmd_compare_flow(args, tol, out):
    spec = _system(args, "field")
    D = _degree(args, spec)
    closed = load_jet(_read(args.closed_form))
    if (closed.n, closed.D) != (spec.n, D):
        raise UsageError(f"closed form has (n={closed.n}, D={closed.D}), system has (n={spec.n}, D={D})")
    rep = compare_flow_closed_form(VectorFieldJet(spec.to_mapjet(D)), closed, args.t, _flow_opts(args))
    threshold = tol.residual if args.threshold is None else args.threshold
    ok = rep.passed(threshold)
    out.line(f"flow vs closed form at t = {args.t:g}: residual {rep.residual:.3e} (threshold {threshold:g})")
    for d, v in rep.residual_by_degree.items():
        out.line(f"  degree {d}: {v:.3e}")
    out.line("PASS" if ok else "FAIL")
    doc = rep.to_dict()
    doc.update(passed=ok, threshold=threshold)
    out.report(doc)
    return 0 if ok else 1


def _field(spec: SystemSpec, args) -> EvaluableField:
    radius = args.radius_domain or spec.domain_radius or DEFAULT_RADIUS
    return EvaluableField.from_polynomials(spec.polynomials, radius)


def _z0(args, n: int) -> np.ndarray:
    z0 = np.array(parse_complex_list(args.z0))
    if z0.size != n:
        raise UsageError(f"--z0 has {z0.size} entries, system has {n} variables")
    return z0


def cmd_simulate(args, tol, out):
    spec = _system(args, "field")
    V = _field(spec, args)
    traj = integrate(V, _z0(args, spec.n), args.t, args.tol)
    out.line(f"integrated to t = {traj.t_end:.12g} in {len(traj.times) - 1} steps")
    for name, z in zip(spec.variables, traj.end):
        out.line(f"  {name} = {z.real:.15g} {'+' if z.imag >= 0 else '-'} {abs(z.imag):.15g}i")
    out.report({"t": traj.t_end, "steps": len(traj.times) - 1,
                "state": [[z.real, z.imag] for z in traj.end]})
    return 0


def cmd_period_scan(args, tol, out):
    spec = _system(args, "field")
    V = _field(spec, args)
    radii = [float(r) for part in args.radius for r in part.split(",") if r.strip()]
    rep = isochrony_scan(
        V, radii, args.samples, args.expected_T, args.period_tol, args.return_tol,
        args.tol, workers=args.workers,
    )
    out.line(f"isochrony scan, expected period {rep.expected_T:.12g}, tolerance {rep.period_tol:g}")
    for i, s in enumerate(rep.samples):
        T = "none" if s.measured_period is None else f"{s.measured_period:.12g}"
        d = "-" if s.return_distance is None else f"{s.return_distance:.3e}"
        out.line(f"  sample {i:3d}: period {T}  return distance {d}")
    for i, why in rep.failures:
        out.line(f"  failure {i}: {why}")
    out.line("PASS" if rep.passed else "FAIL")
    out.report(rep.to_dict())
    return 0 if rep.passed else 1


def cmd_plot_orbit(args, tol, out):
    spec = _system(args, "field")
    V = _field(spec, args)
    traj = integrate(V, _z0(args, spec.n), args.t, args.tol)
    ts = np.linspace(0.0, traj.t_end, args.points)
    header = ["t"] + [f"{p}({v})" for v in spec.variables for p in ("Re", "Im")]
    out.line("\t".join(header))
    rows = []
    for t, z in zip(ts, traj.sample(ts)):
        row = [t] + [x for c in z for x in (c.real, c.imag)]
        rows.append(row)
        out.line("\t".join(f"{x:.15e}" for x in row))
    out.report({"columns": header, "rows": rows})
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--degree", type=int, default=None,
                        help=f"truncation degree D (default: file value or {DEFAULT_DEGREE})")
    common.add_argument("--tol-profile", default=None,
                        help=f"JSON tolerance profile (default: ${TOL_PROFILE_ENV})")
    common.add_argument("--out", default=None, help="write the machine-readable document here ('-' for stdout)")

    flow = argparse.ArgumentParser(add_help=False)
    flow.add_argument("--substeps", type=int, default=None)

    numeric = argparse.ArgumentParser(add_help=False)
    numeric.add_argument("--tol", type=float, default=DEFAULT_TOL, help="integrator tolerance")
    numeric.add_argument("--domain-radius", dest="radius_domain", type=float, default=None)

    p = argparse.ArgumentParser(prog="germflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, parents=(), help=None):
        sp = sub.add_parser(name, parents=[common, *parents], help=help)
        sp.add_argument("system", help="system file ('-' for stdin)")
        sp.set_defaults(func=func)
        return sp

    sp = add("jet-compose", cmd_jet_compose, help="jet of OUTER o INNER")
    sp.add_argument("inner", help="inner map file")
    sp = add("iterate", cmd_iterate, help="k-th iterate of a map germ")
    sp.add_argument("--k", type=int, required=True)
    add("inverse", cmd_inverse, help="compositional inverse of a map germ")
    sp = add("normal-form", cmd_normal_form, help="Poincaré–Dulac normal form")
    sp.add_argument("--order", type=int, required=True)
    sp = add("flow-jet", cmd_flow_jet, [flow], help="jet of the time-t map of a field")
    sp.add_argument("--t", type=float, required=True)
    sp = add("verify-iteration", cmd_verify_iteration, help="check f^m = id + o(|z|^m)")
    sp.add_argument("--m", type=int, required=True)
    sp = add("verify-center", cmd_verify_center, [flow], help="check the time-2π/|ω| map is the identity")
    sp.add_argument("--omega", type=float, required=True)
    sp.add_argument("--threshold", type=float, default=None)
    sp = add("compare-flow", cmd_compare_flow, [flow], help="compare the flow jet with a closed form")
    sp.add_argument("--closed-form", required=True, help="jet document of the closed-form map")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--threshold", type=float, default=None)
    sp = add("simulate", cmd_simulate, [numeric], help="integrate one orbit numerically")
    sp.add_argument("--z0", required=True, help="initial point, e.g. '0.1, 0.05+0.02i'")
    sp.add_argument("--t", type=float, required=True)
    sp = add("period-scan", cmd_period_scan, [numeric], help="measure return times on spheres")
    sp.add_argument("--radius", action="append", required=True, help="radius or comma list; repeatable")
    sp.add_argument("--samples", type=int, default=8)
    sp.add_argument("--expected-T", dest="expected_T", type=float, required=True)
    sp.add_argument("--period-tol", type=float, default=DEFAULT_PERIOD_TOL)
    sp.add_argument("--return-tol", type=float, default=DEFAULT_RETURN_TOL)
    sp.add_argument("--workers", type=int, default=1)
    sp = add("plot-orbit", cmd_plot_orbit, [numeric], help="tab-separated (t, Re, Im) table of an orbit")
    sp.add_argument("--z0", required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--points", type=int, default=200)
    return p


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    out = Output(args)
    try:
        tol = load_tolerances(args.tol_profile)
        code = args.func(args, tol, out)
    except _VERDICT_ERRORS as exc:
        out.line(f"{type(exc).__name__}: {exc}")
        out.line("FAIL")
        out.report({"command": args.command, "passed": False,
                    "error": type(exc).__name__, "detail": str(exc)})
        code = 1
    except (UsageError, JetDocumentError, errors.GermflowError, ValueError) as exc:
        sys.stderr.write(f"germflow {args.command}: {type(exc).__name__}: {exc}\n")
        return 2
    out.flush()
    return code


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
