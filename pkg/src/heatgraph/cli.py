"""Command-line interface: ``heatgraph <command> --spec FILE ...``.

Every command writes a CSV table (to ``--out`` or standard output) and a
verdict block on standard error.  Exit codes: 0 success, 1 a validation or
inequality check failed, 2 an estimate did not converge by ``--Rmax``, 64
usage error (bad flags, unreadable or malformed spec).
"""
from __future__ import annotations

import argparse
import ast
import csv
import io
import math
import sys
from typing import Iterable, Sequence

import numpy as np

from heatgraph import covering, curvature, feller, graph, heat, metric
from heatgraph.exprlang import ParseError, compile_expr
from heatgraph.specfile import GraphSpec, SpecError

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_USAGE = 0, 1, 2, 64
DEFAULT_TOL = 1e-8
DEFAULT_RMAX = 24
GRID_POINTS = 16


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default; usage errors are 64 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- output helpers -----------------------------------------------------------------


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


class Output:
    """Collects the CSV table and verdict lines of one command."""

    def __init__(self, out_path: str | None):
        self.out_path = out_path
        self.verdicts: list[str] = []
        self.code = EXIT_OK

    def table(self, header: Sequence[str], rows: Iterable[Sequence]) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
        if self.out_path:
            with open(self.out_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())

    def verdict(self, name: str, state: str, **evidence) -> None:
        ev = ", ".join(f"{k}={fmt(v)}" for k, v in evidence.items())
        self.verdicts.append(f"verdict {name}: {state}" + (f" ({ev})" if ev else ""))

    def check(self, name: str, ok: bool, failure: int = EXIT_INVALID, **evidence) -> None:
        """Verdict line for a pass/fail check; failures raise the exit code."""
        self.verdict(name, "holds" if ok else "fails", **evidence)
        if not ok:
            self.fail(failure)

    def fail(self, code: int) -> None:
        # validation failures take precedence over non-convergence
        if self.code == EXIT_OK or code == EXIT_INVALID:
            self.code = code

    def flush(self) -> int:
        for line in self.verdicts:
            print(line, file=sys.stderr)
        return self.code


def parse_vertex(text: str | None):
    """``"3"`` -> 3, ``"1,2"`` or ``"(1, 2)"`` -> (1, 2), ``"()"`` -> ()."""
    if text is None:
        return None
    try:
        v = ast.literal_eval(text.strip())
    except (ValueError, SyntaxError):
        raise UsageError(f"cannot parse vertex {text!r}") from None
    if isinstance(v, list):
        v = tuple(v)
    return v


def t_grid(values: Sequence[float] | None, tmax: float = 1.0) -> list[float]:
    if values:
        if any(t < 0 for t in values):
            raise UsageError("times must be nonnegative")
        return [float(t) for t in values]
    return [tmax * k / GRID_POINTS for k in range(1, GRID_POINTS + 1)]


def load(args, want_cover: bool | None = False):
    if not args.spec:
        raise UsageError("--spec is required")
    try:
        spec = GraphSpec.load(args.spec)
    except OSError as exc:
        raise UsageError(f"cannot read spec: {exc}") from None
    if want_cover is True and not spec.is_cover:
        raise UsageError("this command needs a cover spec ([family] name = cover)")
    if want_cover is False and spec.is_cover:
        raise UsageError("spec describes a covering; use 'heatgraph cover ...'")
    return spec, spec.build()


def _vertex_or_root(g, text):
    v = parse_vertex(text)
    return g.root if v is None else v


# --- commands ------------------------------------------------------------------------


def cmd_validate(args, out: Output) -> None:
    spec, g = load(args, want_cover=None)
    if spec.is_cover:
        rep = covering.validate_covering(g, R=args.R or 4)
    else:
        rep = graph.validate_graph(g, radius=args.R or 6)
    out.table(["index", "violation"], enumerate(rep.violations))
    for v in rep.violations:
        out.verdicts.append(f"violation: {v}")
    out.check("valid", rep.ok, checked=rep.checked, violations=len(rep.violations))


def cmd_heat(args, out: Output) -> None:
    _, g = load(args)
    x = _vertex_or_root(g, args.x)
    y = _vertex_or_root(g, args.y) if args.y is not None else x
    rows = []
    for t in t_grid(args.t, args.tmax):
        hk = heat.heat_kernel(g, x, y, t, tol=args.tol, Rmax=args.Rmax)
        est = hk.estimate
        mass = heat.heat_mass(g, x, t, tol=args.tol, Rmax=args.Rmax) if t > 0 else None
        masses = dict(zip(mass.estimate.radii, mass.estimate.values)) if mass else {}
        for R, val in zip(est.radii, est.values):
            rows.append((t, R, val, masses.get(R, 1.0 if t == 0 else math.nan)))
        out.verdict(f"kernel t={fmt(t)}", est.verdict, value=est.value, last_increment=est.last_increment, R=est.radii[-1])
        if est.verdict != heat.CONVERGED:
            out.fail(EXIT_NONCONVERGED)
        if mass:
            out.verdict(f"mass t={fmt(t)}", mass.verdict, mass=mass.estimate.value, limit=mass.limit, deficit=mass.deficit)
    out.table(["t", "R", "kernel", "mass"], rows)


def cmd_green(args, out: Output) -> None:
    _, g = load(args)
    x = _vertex_or_root(g, args.x)
    y = _vertex_or_root(g, args.y) if args.y is not None else x
    ge = heat.green(g, x, y, Rmax=args.Rmax, tol=args.tol if args.tol_set else 1e-3)
    out.table(["R", "green"], zip(ge.estimate.radii, ge.estimate.values))
    out.verdict("green", ge.verdict, value=ge.estimate.value, last_increment=ge.estimate.last_increment)
    if ge.verdict == heat.INCONCLUSIVE:
        out.fail(EXIT_NONCONVERGED)


def cmd_capacity(args, out: Output) -> None:
    _, g = load(args)
    x = _vertex_or_root(g, args.x)
    ce = heat.capacity(g, x, Rmax=args.Rmax, tol=args.tol if args.tol_set else 1e-3)
    out.table(["R", "capacity"], zip(ce.estimate.radii, ce.estimate.values))
    out.verdict("capacity", ce.verdict, value=ce.estimate.value, last_increment=ce.estimate.last_increment)
    if ce.verdict == heat.INCONCLUSIVE:
        out.fail(EXIT_NONCONVERGED)


def cmd_lambda0(args, out: Output) -> None:
    _, g = load(args)
    x = _vertex_or_root(g, args.x)
    est = heat.lambda0(g, x, Rmax=args.Rmax, tol=args.tol)
    out.table(["R", "lambda0"], zip(est.radii, est.values))
    out.verdict("lambda0", est.verdict, value=est.value, last_increment=est.last_increment)
    out.check("non-increasing", est.is_monotone())
    if est.verdict != heat.CONVERGED:
        out.fail(EXIT_NONCONVERGED)


def cmd_feller(args, out: Output) -> None:
    _, g = load(args)
    x = _vertex_or_root(g, args.x)
    R = args.N
    inner = feller.series_inner_degree(g, x, R)
    nonf = feller.series_nonfeller(g, x, R)
    profiles = graph.sphere_profiles(g, x, len(inner.terms))
    rows = [
        (p.radius, p.D, p.Dminus, p.dminus, a, b)
        for p, a, b in zip(profiles, inner.terms, nonf.terms)
    ]
    out.table(["r", "D", "Dminus", "dminus", "term_inner", "term_nonfeller"], rows)
    out.verdict("sum 1/D_-(r)", inner.verdict, exponent=inner.exponent, partial_sum=inner.partial_sums[-1], note=inner.note or "-")
    out.verdict("sum (D-d_-+1)/d_-", nonf.verdict, exponent=nonf.exponent, partial_sum=nonf.partial_sums[-1], note=nonf.note or "-")
    if not nonf.note:
        cert = feller.certificate_v([p.Dminus for p in profiles], args.lam, len(profiles), graph=g, x0=x)
        out.verdict("certificate v vanishes", "holds" if cert.vanishing else "fails", v_end=cert.values[-1])
        out.check("certificate L v >= lam v", cert.holds, min_residual=cert.min_residual)
        w = feller.comparison_w([p.D for p in profiles], [p.dminus for p in profiles], args.lam, 1.0, len(profiles))
        out.verdict("comparison w bounded below", "holds" if w.bounded_below else "fails", epsilon=w.epsilon)
    if isinstance(g, graph.BirthDeathChain):
        bd = feller.birth_death_nonfeller(g, Rmax=R)
        out.verdict("birth-death non-Feller", bd.verdict,
                    conductance=bd.conductance_series.verdict, tails=bd.tail_series.verdict)
    probe = feller.uniform_feller_probe(g, x, args.T, n_times=GRID_POINTS, Rmax=args.Rmax)
    out.verdict("max_t p_t(x, y_r) decreasing", "holds" if probe.decreasing else "fails",
                last=probe.rows[-1].max_p, r=probe.rows[-1].r)
    out.check("p_t <= e^{T Deg} p_T", probe.max_comparison_residual <= 1e-10, max_residual=probe.max_comparison_residual)


def cmd_metric(args, out: Output) -> None:
    _, g = load(args)
    x0 = _vertex_or_root(g, args.x)
    R = args.R or 8
    dm = metric.degree_metric(g)
    region = metric.ball(g, x0, R + 16)
    j = metric.jump_size(g, dm, region)
    viol = metric.verify_intrinsic(g, dm, metric.ball(g, x0, R))
    ts = t_grid(args.t) if args.t else [0.5, 1.0, 2.0]
    rows = metric.davies_table(g, dm, j, x0, R, ts)
    out.table(["x", "y", "t", "p", "residual"], rows)
    out.check("intrinsic", viol <= 1e-12, max_violation=viol)
    worst = max(r[4] for r in rows)
    out.check("heat kernel bound", worst <= 1e-10, jump=j, max_residual=worst)
    f2 = metric.feller2_check(g, dm, j, x0, args.C, R)
    out.verdict("measure-decay criterion", "holds" if f2.passed else ("fails" if f2.rows else "inconclusive"),
                C=args.C, minimal_C=f2.minimal_C, failures=len(f2.failures), skipped=len(f2.skipped))


def _expr(text: str):
    try:
        return compile_expr(text)
    except ParseError as exc:
        raise UsageError(f"bad expression {text!r}: {exc}") from None


def _profile_rows(profiles):
    return [(p.r, p.kappa, p.K_BE, p.target, p.W_minus, p.W_plus, p.W_ok) for p in profiles]


PROFILE_HEADER = ["r", "kappa", "K_BE", "k", "W_minus", "W_plus", "W_ok"]


def cmd_curvature(args, out: Output) -> None:
    k = _expr(args.k)
    if args.action == "chain":
        _, g = load(args)
        if not isinstance(g, graph.BirthDeathChain):
            raise UsageError("curvature chain needs a birth_death spec")
        rows = curvature.curvature_table(g, k, args.N)
        out.table(PROFILE_HEADER, _profile_rows(rows))
        out.verdict("kappa >= k", "holds" if all(p.kappa >= p.target for p in rows) else "fails")
        out.verdict("K_BE >= k", "holds" if all(p.K_BE >= p.target for p in rows) else "fails")
        return
    if args.action == "counterexample":
        rep = curvature.build_feller_counterexample(k, args.N)
        dm = rep.extra["dminus"]
        rows = [(*row, dm[row[0]], rep.graph.m(row[0])) for row in _profile_rows(rep.profiles)]
        out.table(PROFILE_HEADER + ["dminus", "m"], rows)
        for name, ok in rep.checks.items():
            out.check(name, ok)
        out.verdict("non-Feller series", rep.series.verdict, exponent=rep.series.exponent)
        return
    rep = curvature.build_exact_kappa(k, args.N)
    rows = [(p.r, p.kappa, p.target, p.K_BE, rep.graph.b(p.r), rep.graph.m(p.r)) for p in rep.profiles]
    out.table(["r", "kappa", "k", "K_BE", "b", "m"], rows)
    for name, ok in rep.checks.items():
        out.check(name, ok, **({"max_error": rep.extra["kappa_error"]} if name.startswith("kappa") else {}))


def cmd_cover(args, out: Output) -> None:
    _, c = load(args, want_cover=True)
    act = args.action
    if act == "validate":
        rep = covering.validate_covering(c, R=args.R or 4)
        out.table(["index", "violation"], enumerate(rep.violations))
        for v in rep.violations:
            out.verdicts.append(f"violation: {v}")
        out.check("covering", rep.ok, checked=rep.checked, violations=len(rep.violations))
        return
    x = _vertex_or_root(c.base, args.x)
    if act == "fiber-sum":
        y = _vertex_or_root(c.base, args.y) if args.y is not None else x
        rows = []
        for t in t_grid(args.t, args.tmax):
            rep = covering.fiber_sum_residual(c, x, y, t, R=args.R or 20, tol=args.tol)
            for R, s in zip(rep.estimate.radii, rep.estimate.values):
                rows.append((t, R, s, rep.base_value, rep.base_value - s))
            res = rep.residual
            bad = res < -args.tol or (c.finite_sheets and abs(res) > args.tol)
            out.check(f"fiber sum t={fmt(t)}", not bad, residual=res, sheets=c.sheets)
            if rep.estimate.verdict != heat.CONVERGED:
                out.verdict(f"fiber sum t={fmt(t)} convergence", rep.estimate.verdict)
                out.fail(EXIT_NONCONVERGED)
        out.table(["t", "R", "fiber_sum", "base", "residual"], rows)
        return
    if act == "sheet-check":
        rows = []
        for t in t_grid(args.t, args.tmax):
            res = covering.diag_sheet_check(c, x, t, Rmax=args.Rmax)
            rows.append((t, res))
            out.check(f"n p~_t >= p_t t={fmt(t)}", res >= -1e-10, residual=res)
        out.table(["t", "residual"], rows)
        return
    if act == "lambda0-compare":
        cmp_ = covering.lambda0_compare(c, R=args.R or 8)
        rows = [(R, b, cv, cv - b) for R, b, cv in zip(cmp_.base.radii, cmp_.base.values, cmp_.cover.values)]
        out.table(["R", "base", "cover", "gap"], rows)
        out.check("cover >= base", cmp_.holds(args.tol), gap=cmp_.gap)
        if c.finite_sheets:
            out.check("finite-sheet equality", abs(cmp_.gap) < args.tol, gap=cmp_.gap)
        return
    if act == "mass-compare":
        rows = []
        for t in t_grid(args.t, args.tmax):
            mc = covering.mass_deficit_compare(c, x, t, R=args.R or 20)
            for R, a, b in zip(mc.radii, mc.base_deficit, mc.cover_deficit):
                rows.append((t, R, a, b, abs(a - b)))
            out.verdict(f"deficits t={fmt(t)}", "agree" if mc.difference < 1e-3 else "differ",
                        base=mc.base_deficit[-1], cover=mc.cover_deficit[-1], difference=mc.difference)
        out.table(["t", "R", "base_deficit", "cover_deficit", "difference"], rows)
        return
    # converse-report
    rep = covering.converse_counterexample_report()
    rows = [
        ("tail_sum", rep.tail_sum),
        ("certificate_end", rep.certificate_inf),
        ("certificate_residual", rep.certificate_residual),
        *[(f"cover_capacity_R{R}", v) for R, v in zip(rep.cover_capacity.radii, rep.cover_capacity.values)],
        *[(f"base_ray_{r}", v) for r, v in enumerate(rep.base_ray)],
        *[(f"cover_ray_{r}", v) for r, v in enumerate(rep.cover_ray)],
    ]
    out.table(["quantity", "value"], rows)
    out.verdict("base factor", rep.factor_verdict)
    out.verdict("cover capacity", rep.cover_capacity_verdict, value=rep.cover_capacity.value)
    for name, ok in rep.verdicts.items():
        out.check(name, ok)


# --- argument parsing -------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", help="graph spec (.hg)")
    p.add_argument("--x", help="vertex, e.g. 0 or 1,2 (default: root)")
    p.add_argument("--y", help="second vertex (default: x)")
    p.add_argument("--t", type=float, nargs="+", help="times (default: 16-point grid on (0, tmax])")
    p.add_argument("--tmax", type=float, default=1.0, help="end of the default time grid")
    p.add_argument("--R", type=int, help="radius (command specific)")
    p.add_argument("--Rmax", type=int, default=DEFAULT_RMAX, help=f"largest exhaustion radius (default {DEFAULT_RMAX})")
    p.add_argument("--tol", type=float, default=None, help=f"tolerance (default {DEFAULT_TOL})")
    p.add_argument("--out", help="CSV output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heatgraph", description="Heat kernels, Feller tests, curvature and coverings of weighted graphs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in [
        ("validate", "check a graph or covering spec"),
        ("heat", "heat kernel and heat mass over a time grid"),
        ("green", "Green function over an exhaustion"),
        ("capacity", "capacity over an exhaustion"),
        ("lambda0", "bottom of the spectrum over an exhaustion"),
    ]:
        _common(sub.add_parser(name, help=helptext))
    p = sub.add_parser("feller", help="Feller criteria: series, certificates, probe")
    _common(p)
    p.add_argument("--lam", type=float, default=-1.0, help="negative spectral parameter (default -1)")
    p.add_argument("--T", type=float, default=1.0, help="time horizon of the uniform probe")
    p.add_argument("--N", type=int, default=100, help="number of spheres in the series window (default 100)")
    p = sub.add_parser("metric", help="degree metric, heat kernel bound, measure-decay test")
    _common(p)
    p.add_argument("--C", type=float, default=1.0, help="constant of the measure-decay test")
    p = sub.add_parser("curvature", help="curvature tables and constructions")
    p.add_argument("action", choices=["chain", "counterexample", "exact-kappa"])
    _common(p)
    p.add_argument("--k", default="0", help="target curvature sequence k_r (expression in r)")
    p.add_argument("--N", type=int, default=20, help="largest radius")
    p = sub.add_parser("cover", help="covering checks")
    p.add_argument("action", choices=["validate", "fiber-sum", "sheet-check", "lambda0-compare", "mass-compare", "converse-report"])
    _common(p)
    return parser


COMMANDS = {
    "validate": cmd_validate,
    "heat": cmd_heat,
    "green": cmd_green,
    "capacity": cmd_capacity,
    "lambda0": cmd_lambda0,
    "feller": cmd_feller,
    "metric": cmd_metric,
    "curvature": cmd_curvature,
    "cover": cmd_cover,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args.tol_set = args.tol is not None
    if args.tol is None:
        args.tol = DEFAULT_TOL
    out = Output(args.out)
    try:
        COMMANDS[args.command](args, out)
    except (UsageError, SpecError) as exc:
        print(f"heatgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError, KeyError, graph.GraphError) as exc:
        # parameters the library rejects (negative times, unknown vertices, ...)
        print(f"heatgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"heatgraph: numeric failure: {exc!r} (weights under- or overflow; try a smaller window)", file=sys.stderr)
        return EXIT_NONCONVERGED
    return out.flush()


run = main

if __name__ == "__main__":
    sys.exit(main())
